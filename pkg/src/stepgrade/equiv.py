"""Randomized equation-equivalence decision.

After constant substitution, each trial picks a target variable uniformly
from the union of free variables, assigns the remaining variables uniform
random values in the sampling interval, solves both equations for the
target, and compares the solution sets. A trial either does not reject
equivalence, rejects it, or fails (neither equation solvable). Equivalence
is declared only when enough valid trials accumulate and none rejects.

Determinism and symmetry: the RNG stream is derived from (seed, hash of
the lexicographically smaller canonical print of the two formulas), and
all draws follow the sorted variable order, so swapping the arguments
cannot change the verdict.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .constants import ConstantsMap, substitute_constants
from .expr import Formula, free_variables
from .latex import formula_to_latex
from .solve import (
    DOMAIN_ERROR,
    OK,
    TIMEOUT,
    UNIVERSAL,
    EvalDomainError,
    SolveResult,
    all_close,
    eval_constant,
    solve_target,
)

EQUIVALENT = "Equivalent"
INEQUIVALENT = "Inequivalent"

TRIAL_EQ = "eq"
TRIAL_NEQ = "neq"
TRIAL_FAIL = "fail"

DEFAULT_SEED = 1729


@dataclass(frozen=True)
class EquivParams:
    n_max: int = 40
    n_succ: int = 10
    n_eq: int = 10
    eps: float = 1e-6
    sample_lo: float = 2.0
    sample_hi: float = 20.0
    t_max: float = 0.2  # seconds per solve
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if not (self.n_eq <= self.n_succ <= self.n_max):
            raise ValueError("require n_eq <= n_succ <= n_max")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not (0 < self.sample_lo < self.sample_hi):
            raise ValueError("require 0 < sample_lo < sample_hi")

    def key(self) -> tuple:
        return (
            self.n_max,
            self.n_succ,
            self.n_eq,
            self.eps,
            self.sample_lo,
            self.sample_hi,
            self.t_max,
            self.seed,
        )


@dataclass(frozen=True)
class TrialRecord:
    target: str
    assignment: tuple[tuple[str, float], ...]
    left: SolveResult
    right: SolveResult
    outcome: str


@dataclass(frozen=True)
class EquivVerdict:
    verdict: str
    n_eq_observed: int
    n_neq_observed: int
    n_fail_observed: int
    trials: tuple[TrialRecord, ...] = ()
    note: str = ""

    @property
    def equivalent(self) -> bool:
        return self.verdict == EQUIVALENT


def _orient(f: Formula) -> Formula:
    """Flip gt/ge so that relation kind comparison is direction-free."""
    if f.relation == "gt":
        return Formula(f.rhs, f.lhs, "lt")
    if f.relation == "ge":
        return Formula(f.rhs, f.lhs, "le")
    return f


def _kind(f: Formula) -> str:
    return "eq" if f.relation in ("eq", "approx") else f.relation


def _schedule_rng(seed: int, print1: str, print2: str) -> np.random.Generator:
    anchor = min(print1, print2)
    digest = hashlib.sha256(f"{seed}\x00{anchor}".encode()).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))


def _formula_truth(f: Formula, eps: float) -> bool | None:
    """Truth value of a fully numeric relation; None if not evaluable."""
    try:
        lhs = eval_constant(f.lhs)
        rhs = eval_constant(f.rhs)
    except EvalDomainError:
        return None
    scale = max(1.0, abs(lhs), abs(rhs))
    if _kind(f) == "eq":
        return abs(lhs - rhs) <= eps * scale
    if f.relation == "lt":
        return lhs < rhs
    return lhs <= rhs


def _classify(r1: SolveResult, r2: SolveResult, eps: float) -> str:
    if r1.status in (DOMAIN_ERROR, TIMEOUT) or r2.status in (DOMAIN_ERROR, TIMEOUT):
        return TRIAL_FAIL
    if r1.status == UNIVERSAL or r2.status == UNIVERSAL:
        return TRIAL_EQ if (r1.status == UNIVERSAL and r2.status == UNIVERSAL) else TRIAL_NEQ
    if not r1.roots and not r2.roots:
        return TRIAL_FAIL
    return TRIAL_EQ if all_close(r1.roots, r2.roots, eps) else TRIAL_NEQ


def check_equivalence(
    f1: Formula,
    f2: Formula,
    c: ConstantsMap | None = None,
    p: EquivParams | None = None,
    *,
    diagnostics: bool = False,
) -> EquivVerdict:
    """Decide equivalence of two formulas; deterministic given the seed."""
    if c is None:
        c = ConstantsMap()
    if p is None:
        p = EquivParams()

    o1, o2 = _orient(f1), _orient(f2)
    if _kind(o1) != _kind(o2):
        return EquivVerdict(INEQUIVALENT, 0, 0, 0, note="relation-kind mismatch")

    s1 = substitute_constants(o1, c)
    s2 = substitute_constants(o2, c)
    variables = sorted(free_variables(s1) | free_variables(s2))

    if not variables:
        t1 = _formula_truth(s1, p.eps)
        t2 = _formula_truth(s2, p.eps)
        if t1 is None or t2 is None:
            return EquivVerdict(INEQUIVALENT, 0, 0, 1, note="constant formula not evaluable")
        if t1 == t2:
            return EquivVerdict(EQUIVALENT, 1, 0, 0, note="constant comparison")
        return EquivVerdict(INEQUIVALENT, 0, 1, 0, note="constant comparison")

    rng = _schedule_rng(p.seed, formula_to_latex(o1), formula_to_latex(o2))

    n_eq = n_neq = n_fail = 0
    k = 0
    records: list[TrialRecord] = []
    while k < p.n_max:
        k += 1
        target = variables[int(rng.integers(0, len(variables)))]
        assignment = {v: float(rng.uniform(p.sample_lo, p.sample_hi)) for v in variables if v != target}
        r1 = solve_target(s1, target, assignment, eps=p.eps, t_max=p.t_max)
        r2 = solve_target(s2, target, assignment, eps=p.eps, t_max=p.t_max)
        outcome = _classify(r1, r2, p.eps)
        if diagnostics:
            records.append(TrialRecord(target, tuple(sorted(assignment.items())), r1, r2, outcome))
        if outcome == TRIAL_EQ:
            n_eq += 1
        elif outcome == TRIAL_NEQ:
            n_neq += 1
            break  # a single rejection already decides the verdict
        else:
            n_fail += 1
        if (n_eq + n_neq) >= p.n_succ and k >= p.n_succ:
            break

    verdict = EQUIVALENT if (n_eq >= p.n_eq and n_neq == 0) else INEQUIVALENT
    return EquivVerdict(verdict, n_eq, n_neq, n_fail, tuple(records))
