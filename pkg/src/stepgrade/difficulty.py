"""Difficulty annotation: entropy of the DAG layer structure plus
externally supplied conceptual/computational ratings.

A node's layer is one plus the longest dependency path ending at it
(critical-path leveling), so a pure chain has width 1 everywhere and
contributes zero entropy.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .dag import RubricDag, validate

LABELS = ("Easy", "Medium", "Hard")

# Composite-score bands: 3-4 Easy, 5-6 Medium, 7-9 Hard.
_BANDS = ((3, 4, "Easy"), (5, 6, "Medium"), (7, 9, "Hard"))


def dag_layers(dag: RubricDag) -> dict[int, int]:
    layer: dict[int, int] = {}
    for node in dag.nodes:  # index order is a topological order
        layer[node.index] = 1 + max((layer[d] for d in node.dependency), default=0)
    return layer


def dag_entropy(dag: RubricDag) -> float:
    """Sum of log layer widths (natural log)."""
    report = validate(dag)
    if not report.ok:
        raise ValueError("refusing to annotate an invalid dag")
    widths = Counter(dag_layers(dag).values())
    return sum(math.log(w) for w in widths.values())


@dataclass(frozen=True)
class DifficultyInput:
    c1: int
    c2: int
    dag: RubricDag
    tau1: float
    tau2: float

    def __post_init__(self) -> None:
        if not (1 <= self.c1 <= 3 and 1 <= self.c2 <= 3):
            raise ValueError("c1 and c2 must be in 1..3")
        if not self.tau1 < self.tau2:
            raise ValueError("require tau1 < tau2")


@dataclass(frozen=True)
class DifficultyResult:
    c1: int
    c2: int
    c3: int
    entropy: float
    composite: int
    label: str

    def to_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "e": self.entropy,
            "S": self.composite,
            "label": self.label,
        }


def difficulty_label(inp: DifficultyInput) -> DifficultyResult:
    e = dag_entropy(inp.dag)
    if e <= inp.tau1:
        c3 = 1
    elif e <= inp.tau2:
        c3 = 2
    else:
        c3 = 3
    composite = inp.c1 + inp.c2 + c3
    for lo, hi, label in _BANDS:
        if lo <= composite <= hi:
            return DifficultyResult(inp.c1, inp.c2, c3, e, composite, label)
    raise AssertionError("composite score out of range")


def entropy_tertiles(entropies: list[float]) -> tuple[float, float]:
    """Default thresholds: tertiles of the entropy distribution. Falls back
    to fixed values when the distribution is too degenerate to split."""
    if entropies:
        srt = sorted(entropies)
        t1 = _quantile(srt, 1 / 3)
        t2 = _quantile(srt, 2 / 3)
        if t1 < t2:
            return t1, t2
    return math.log(2), 3 * math.log(2)


def _quantile(sorted_vals: list[float], q: float) -> float:
    if not sorted_vals:
        raise ValueError("empty")
    pos = q * (len(sorted_vals) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(sorted_vals) - 1)
    frac = pos - lo
    return sorted_vals[lo] * (1 - frac) + sorted_vals[hi] * frac
