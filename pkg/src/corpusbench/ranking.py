"""Statistically robust model comparison: paired bootstrap, tie-aware ranks,
and cross-category median-rank aggregation.

Pairwise significance comes from an empirical bootstrap over per-item score
differences (default 1000 resamples); a pair differs significantly when the
95% percentile interval of the resampled mean difference excludes zero.
A system's rank is one plus the number of systems significantly better than
it, so statistically indistinguishable systems share a rank.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

N_BOOTSTRAP_ITERATIONS = 1000
MIN_RECOMMENDED_ITEMS = 10


class MisalignedVectors(ValueError):
    pass


class TooFewItems(ValueError):
    pass


class MissingCategory(KeyError):
    pass


@dataclass(frozen=True)
class ScoreVector:
    system: str
    layer: str
    item_ids: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        if len(self.item_ids) != len(self.scores):
            raise MisalignedVectors(
                f"{self.system}: {len(self.item_ids)} item ids vs {len(self.scores)} scores"
            )

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))


@dataclass(frozen=True)
class PairwiseResult:
    system_a: str
    system_b: str
    mean_diff: float
    ci_low: float
    ci_high: float
    significant: bool


@dataclass(frozen=True)
class Leaderboard:
    layer: str
    entries: tuple[dict, ...]  # {system, mean_score, rank}
    pairwise: tuple[PairwiseResult, ...]


def derive_pair_seed(master_seed: int, name_a: str, name_b: str) -> int:
    """Order-independent per-pair seed: the sorted pair name hashed into the
    master seed, so parallel pairwise runs reproduce serial results."""
    first, second = sorted((name_a, name_b))
    digest = hashlib.sha256(f"{master_seed}|{first}|{second}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def bootstrap_pair(
    a: ScoreVector,
    b: ScoreVector,
    n_iter: int = N_BOOTSTRAP_ITERATIONS,
    seed: int = 0,
) -> PairwiseResult:
    """Paired bootstrap of the mean score difference a - b.

    Items are resampled with replacement (the same index draws apply to both
    systems, which is what pairing means); the 95% interval is the empirical
    2.5th/97.5th percentile of resampled mean differences.
    """
    if a.item_ids != b.item_ids:
        raise MisalignedVectors(
            f"{a.system} and {b.system} are not aligned on the same item ids"
        )
    n = len(a.item_ids)
    if n < 2:
        raise TooFewItems(f"need at least 2 paired items, got {n}")
    if n < MIN_RECOMMENDED_ITEMS:
        logger.warning(
            "bootstrapping %s vs %s on only %d items; intervals will be coarse",
            a.system, b.system, n,
        )
    diffs = np.asarray(a.scores, dtype=np.float64) - np.asarray(b.scores, dtype=np.float64)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_iter, n))
    means = diffs[idx].mean(axis=1)
    ci_low, ci_high = np.percentile(means, [2.5, 97.5])
    return PairwiseResult(
        system_a=a.system,
        system_b=b.system,
        mean_diff=float(diffs.mean()),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        significant=not (ci_low <= 0.0 <= ci_high),
    )


def rank_with_ties(
    systems: list[ScoreVector],
    n_iter: int = N_BOOTSTRAP_ITERATIONS,
    seed: int = 0,
) -> Leaderboard:
    """All-pairs bootstrap, then rank = 1 + number of significantly better
    systems. Entries sort by (rank, mean desc, name)."""
    if len(systems) < 2:
        raise ValueError("a leaderboard needs at least 2 systems")
    names = [s.system for s in systems]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate system names: {names}")

    pairwise: list[PairwiseResult] = []
    beats: dict[str, set[str]] = {name: set() for name in names}
    for i in range(len(systems)):
        for j in range(i + 1, len(systems)):
            a, b = systems[i], systems[j]
            result = bootstrap_pair(a, b, n_iter=n_iter, seed=derive_pair_seed(seed, a.system, b.system))
            pairwise.append(result)
            if result.significant:
                if a.mean > b.mean:
                    beats[a.system].add(b.system)
                elif b.mean > a.mean:
                    beats[b.system].add(a.system)

    entries = []
    for s in systems:
        better = sum(1 for other in systems if s.system in beats[other.system])
        entries.append({"system": s.system, "mean_score": s.mean, "rank": 1 + better})
    entries.sort(key=lambda e: (e["rank"], -e["mean_score"], e["system"]))
    return Leaderboard(layer=systems[0].layer, entries=tuple(entries), pairwise=tuple(pairwise))


def _median(values) -> float:
    ordered = sorted(values)
    if not ordered:
        raise ValueError("median of empty sequence")
    mid = len(ordered) // 2
    if len(ordered) % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def _quantize_half_rank(x: float) -> float:
    # Ranks are reported in half steps; exact quarter values (the midpoint
    # between two half steps) resolve toward the lower half step.
    return math.ceil(2.0 * x - 0.5) / 2.0


def median_rank(category_ranks: dict[str, dict[str, float | list[float]]]) -> list[dict]:
    """Aggregate per-category ranks into one table row per system.

    ``category_ranks`` maps system -> category -> rank or list of ranks (a
    category with several subsets medians those first). The cross-category
    aggregate is the midpoint median, quantized to the half-rank grid. Rows
    sort by (aggregate, mean category rank, name). Every system must cover
    every category seen anywhere.
    """
    if not category_ranks:
        raise ValueError("no systems to aggregate")
    all_categories: list[str] = []
    for cats in category_ranks.values():
        for c in cats:
            if c not in all_categories:
                all_categories.append(c)

    rows = []
    for system, cats in category_ranks.items():
        missing = [c for c in all_categories if c not in cats]
        if missing:
            raise MissingCategory(f"system {system!r} lacks categories {missing}")
        per_category = {}
        for category in all_categories:
            value = cats[category]
            values = list(value) if isinstance(value, (list, tuple)) else [value]
            per_category[category] = _median(values)
        aggregate = _quantize_half_rank(_median(list(per_category.values())))
        rows.append({
            "system": system,
            "categories": per_category,
            "median_rank": aggregate,
            "_mean": sum(per_category.values()) / len(per_category),
        })

    rows.sort(key=lambda r: (r["median_rank"], r["_mean"], r["system"]))
    for row in rows:
        del row["_mean"]
    return rows
