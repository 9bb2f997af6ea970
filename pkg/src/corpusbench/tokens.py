"""Token counting for window sizing and chunk arithmetic.

The pipeline only uses token counts to bound generation windows and to slice
retrieval chunks, so the default estimator is a dependency-free heuristic:
a token is either a run of word characters or a single non-space symbol.
Anything smarter (a real BPE tokenizer) can be plugged in through the
TokenEstimator protocol as long as it also reports character spans.
"""

from __future__ import annotations

import re
from typing import Protocol

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class TokenEstimator(Protocol):
    def count(self, text: str) -> int: ...

    def spans(self, text: str) -> list[tuple[int, int]]:
        """Character (start, end) span of every token, in order."""
        ...


class HeuristicTokenEstimator:
    """Counts word runs and standalone punctuation marks.

    Deterministic and monotone under concatenation: joining two strings can
    merge at most the pair of tokens that meet at the seam, so
    count(a + b) >= max(count(a), count(b)).
    """

    def count(self, text: str) -> int:
        return len(_TOKEN_RE.findall(text))

    def spans(self, text: str) -> list[tuple[int, int]]:
        return [m.span() for m in _TOKEN_RE.finditer(text)]


DEFAULT_ESTIMATOR = HeuristicTokenEstimator()

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def estimate_tokens(text: str, estimator: TokenEstimator | None = None) -> int:
    """Deterministic token count of ``text`` under the given estimator."""
    return (estimator or DEFAULT_ESTIMATOR).count(text)


def word_tokens(text: str) -> list[str]:
    """Lowercased word tokens (punctuation and whitespace discarded).

    Shared by the surface-similarity metrics and the lexical mock providers.
    """
    return _WORD_RE.findall(text.lower())
