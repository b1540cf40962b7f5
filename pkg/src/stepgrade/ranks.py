"""Tie-corrected Kendall rank correlation with asymptotic and permutation
significance tests.

tau_b = (nc - nd) / sqrt((n0 - n1)(n0 - n2)) over all unordered index
pairs, where n1/n2 discount tie groups in each ranking. The asymptotic
test standardizes S = nc - nd with the tie-adjusted variance; the
permutation test shuffles one ranking and reports an add-one-smoothed
two-sided p-value.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np


class DegenerateRankingError(ValueError):
    """tau_b is undefined: one of the rankings is entirely tied."""


@dataclass(frozen=True)
class RankPairs:
    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.xs) != len(self.ys):
            raise ValueError("paired observations must align")
        if len(self.xs) < 2:
            raise ValueError("need at least two pairs")

    @classmethod
    def from_sequences(cls, xs, ys) -> "RankPairs":
        return cls(tuple(float(v) for v in xs), tuple(float(v) for v in ys))


def _concordance(xs: np.ndarray, ys: np.ndarray) -> tuple[int, int]:
    dx = np.sign(xs[:, None] - xs[None, :])
    dy = np.sign(ys[:, None] - ys[None, :])
    prod = dx * dy
    upper = np.triu_indices(len(xs), k=1)
    vals = prod[upper]
    return int(np.sum(vals > 0)), int(np.sum(vals < 0))


def _tie_stats(values) -> tuple[int, list[int]]:
    groups = [t for t in Counter(values).values() if t > 1]
    return sum(t * (t - 1) // 2 for t in groups), groups


def kendall_tau_b(pairs: RankPairs) -> tuple[float, float]:
    """Return (tau_b, two-sided asymptotic p-value)."""
    xs = np.asarray(pairs.xs, dtype=float)
    ys = np.asarray(pairs.ys, dtype=float)
    n = len(xs)
    nc, nd = _concordance(xs, ys)
    n0 = n * (n - 1) // 2
    n1, tgroups = _tie_stats(pairs.xs)
    n2, ugroups = _tie_stats(pairs.ys)
    denom_sq = (n0 - n1) * (n0 - n2)
    if denom_sq <= 0:
        raise DegenerateRankingError("all values tied in one ranking")
    tau = (nc - nd) / math.sqrt(denom_sq)

    # Tie-adjusted variance of S = nc - nd under the null.
    s = nc - nd
    v0 = n * (n - 1) * (2 * n + 5)
    vt = sum(t * (t - 1) * (2 * t + 5) for t in tgroups)
    vu = sum(u * (u - 1) * (2 * u + 5) for u in ugroups)
    sum_t2 = sum(t * (t - 1) for t in tgroups)
    sum_u2 = sum(u * (u - 1) for u in ugroups)
    sum_t3 = sum(t * (t - 1) * (t - 2) for t in tgroups)
    sum_u3 = sum(u * (u - 1) * (u - 2) for u in ugroups)
    var_s = (v0 - vt - vu) / 18.0
    var_s += sum_t2 * sum_u2 / (2.0 * n * (n - 1))
    if n > 2:
        var_s += sum_t3 * sum_u3 / (9.0 * n * (n - 1) * (n - 2))
    if var_s <= 0:
        raise DegenerateRankingError("degenerate variance")
    z = s / math.sqrt(var_s)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return tau, p


def _tau_only(xs: np.ndarray, ys: np.ndarray, denom: float) -> float:
    nc, nd = _concordance(xs, ys)
    return (nc - nd) / denom


def permutation_test(pairs: RankPairs, n_perm: int, seed: int) -> float:
    """Two-sided permutation p for tau_b, add-one smoothed.

    The y ranking is permuted, x stays fixed. Each permutation draws its
    own RNG substream from (seed, index), so results do not depend on
    evaluation order or parallel chunking.
    """
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    xs = np.asarray(pairs.xs, dtype=float)
    ys = np.asarray(pairs.ys, dtype=float)
    n = len(xs)
    n0 = n * (n - 1) // 2
    n1, _ = _tie_stats(pairs.xs)
    n2, _ = _tie_stats(pairs.ys)
    denom_sq = (n0 - n1) * (n0 - n2)
    if denom_sq <= 0:
        raise DegenerateRankingError("all values tied in one ranking")
    denom = math.sqrt(denom_sq)
    observed = abs(_tau_only(xs, ys, denom))
    hits = 0
    for i in range(n_perm):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(i,))))
        perm = rng.permutation(n)
        # Permuting y preserves its tie multiset, so the denominator carries over.
        if abs(_tau_only(xs, ys[perm], denom)) >= observed - 1e-12:
            hits += 1
    return (1 + hits) / (1 + n_perm)
