"""Pairwise bootstrap significance, tie-aware ranks, and the cross-category
median-rank aggregate.

Run: python3 demos/06_bootstrap_leaderboard.py
"""

import numpy as np

from corpusbench import ScoreVector, bootstrap_pair, median_rank, rank_with_ties


def vectors(layer, quality, n=120, seed=0):
    rng = np.random.default_rng(seed)
    ids = tuple(f"item{i}" for i in range(n))
    return [
        ScoreVector(system=name, layer=layer, item_ids=ids,
                    scores=(rng.random(n) < p).astype(float))
        for name, p in quality.items()
    ]


def main():
    quality = {"strong": 0.85, "solid": 0.80, "mid": 0.55, "weak": 0.30}
    vecs = vectors("mcq", quality, seed=42)

    pair = bootstrap_pair(vecs[0], vecs[1], n_iter=1000, seed=7)
    print(f"{pair.system_a} vs {pair.system_b}: mean diff {pair.mean_diff:+.3f}, "
          f"95% CI [{pair.ci_low:+.3f}, {pair.ci_high:+.3f}], "
          f"significant={pair.significant}")

    board = rank_with_ties(vecs, n_iter=1000, seed=7)
    print("\nleaderboard (ties mean no significant difference):")
    for entry in board.entries:
        print(f"  rank {entry['rank']}  {entry['system']:<8} mean {entry['mean_score']:.3f}")

    table = {
        "strong": {"mcq": [1, 1, 2], "textsim": 1, "judge": 2, "human": 3},
        "solid": {"mcq": [1, 2, 2], "textsim": 2, "judge": 1, "human": 1},
        "mid": {"mcq": [3, 3, 3], "textsim": 3, "judge": 3, "human": 3},
        "weak": {"mcq": [4, 4, 4], "textsim": 4, "judge": 4, "human": 3},
    }
    print("\nmedian ranks across categories:")
    for row in median_rank(table):
        cats = "  ".join(f"{c}={v:g}" for c, v in row["categories"].items())
        print(f"  {row['median_rank']:<4g} {row['system']:<8} {cats}")


if __name__ == "__main__":
    main()
