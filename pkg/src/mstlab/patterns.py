"""Causal attention patterns: dense, strided, and block-fixed masks.

A pattern is a boolean (n, n) matrix; entry [i, j] says query i may attend
key j.  All patterns are causal (j <= i) and reflexive (diagonal allowed),
so every softmax row has at least one admissible key.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AttentionPattern:
    kind: str          # dense | strided | fixed
    n: int
    l: int             # stride / block length (1 for dense)
    c: int             # summary columns per block (fixed only, else 0)
    mask: np.ndarray   # bool (n, n)

    def pair_count(self):
        return int(self.mask.sum())

    def q_atten(self):
        """Attention density: admissible pairs / n^2; dense is defined as 1."""
        if self.kind == "dense":
            return 1.0
        return self.pair_count() / float(self.n * self.n)

    def additive(self, dtype=np.float32):
        """0 where admissible, -inf where masked, for pre-softmax addition."""
        out = np.zeros((self.n, self.n), dtype=dtype)
        out[~self.mask] = -np.inf
        return out


def _check(kind, n, l, c, mask):
    if not mask.any(axis=1).all():
        raise ValueError(f"{kind} pattern has a fully masked row")
    return AttentionPattern(kind, n, l, c, mask)


def dense_pattern(n):
    return _check("dense", n, 1, 0, np.tril(np.ones((n, n), dtype=bool)))


def strided_pattern(n, l):
    """Local window of width l unioned with every l-th prior position.

    Row i keeps keys j <= i with i - j < l, plus keys with (i - j) % l == 0.
    """
    if l < 1:
        raise ValueError("stride must be >= 1")
    if l == 1:
        return dense_pattern(n)
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    d = i - j
    mask = (d >= 0) & ((d < l) | (d % l == 0))
    return _check("strided", n, l, 0, mask)


def fixed_pattern(n, l, c=1):
    """Block-causal attention plus c trailing summary columns per block.

    Row i keeps causal keys inside its own length-l block, plus every causal
    key whose column index satisfies j % l >= l - c (the last c positions of
    each block act as summaries visible to all later queries).
    """
    if l < 1 or not 0 <= c <= l:
        raise ValueError("need l >= 1 and 0 <= c <= l")
    if l == 1:
        return dense_pattern(n)
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    same_block = (i // l) == (j // l)
    summary = (j % l) >= (l - c)
    mask = (j <= i) & (same_block | summary)
    return _check("fixed", n, l, c, mask)


def build_pattern(kind, n, l=1, c=1):
    if kind == "dense":
        return dense_pattern(n)
    if kind == "strided":
        return strided_pattern(n, l)
    if kind == "fixed":
        return fixed_pattern(n, l, c)
    raise ValueError(f"unknown pattern kind {kind!r}")


def pattern_for_stride(n, l):
    """Strided pattern at stride l, collapsing to dense when l == 1."""
    return dense_pattern(n) if l <= 1 else strided_pattern(n, l)


def to_text_grid(pattern):
    """Render the boolean mask as lines of '#' (attend) and '.' (masked)."""
    return "\n".join("".join("#" if v else "." for v in row) for row in pattern.mask)
