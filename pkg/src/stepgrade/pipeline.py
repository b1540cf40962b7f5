"""End-to-end grading: extract candidate formulas, match them against the
rubric DAG, score by ancestor closure, and aggregate over a dataset.

Matching is per-node existential and order-free: a node is matched when
any candidate formula is equivalent to it, so shuffling or padding the
candidate list can only grow the matched set. Per-pair equivalence
verdicts are memoized within a batch.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .constants import ConstantsMap
from .dag import RubricDag, ScoreReport, score, validate
from .dataset import Dataset, Problem, Subquestion
from .equiv import EquivParams, EquivVerdict, check_equivalence
from .expr import Formula, Sym, free_symbols
from .latex import ParseError, extract_formulas, formula_to_latex, parse_formula
from .solve import EvalDomainError, eval_constant
from .units import UnitTable, default_unit_table


@dataclass(frozen=True)
class CandidateSolution:
    problem_id: object
    solution_text: str
    model: str | None = None
    latency_s: float | None = None


@dataclass
class ParseDiagnostics:
    extracted_blocks: int = 0
    parsed_formulas: int = 0
    dropped: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "extracted_blocks": self.extracted_blocks,
            "parsed_formulas": self.parsed_formulas,
            "dropped": self.dropped,
        }


class EquivalenceMemo:
    """Batch-scoped cache of pair verdicts, safe for concurrent use."""

    def __init__(self) -> None:
        self._data: dict[tuple, EquivVerdict] = {}
        self._lock = threading.Lock()

    def check(self, f1: Formula, f2: Formula, c: ConstantsMap, p: EquivParams) -> EquivVerdict:
        p1, p2 = formula_to_latex(f1), formula_to_latex(f2)
        key = (min(p1, p2), max(p1, p2), c.fingerprint(), p.key())
        with self._lock:
            hit = self._data.get(key)
        if hit is not None:
            return hit
        verdict = check_equivalence(f1, f2, c, p)
        with self._lock:
            self._data.setdefault(key, verdict)
        return verdict


def parse_candidate_formulas(
    solution: str, units: UnitTable, diagnostics: ParseDiagnostics | None = None
) -> list[Formula]:
    """Step 1: extract math blocks, split stacked lines, parse, drop invalid."""
    formulas: list[Formula] = []
    blocks = extract_formulas(solution)
    if diagnostics is not None:
        diagnostics.extracted_blocks = len(blocks)
    for block in blocks:
        for piece in block.split("\\\\"):
            piece = piece.strip()
            if not piece:
                continue
            try:
                formulas.extend(parse_formula(piece, units))
            except ParseError as exc:
                if diagnostics is not None:
                    diagnostics.dropped.append({"source": piece, "reason": str(exc)})
    if diagnostics is not None:
        diagnostics.parsed_formulas = len(formulas)
    return formulas


def _parse_rubric_node(source: str, units: UnitTable) -> list[Formula]:
    return parse_formula(source, units)


def match_against_dag(
    dag: RubricDag,
    candidate_formulas: list[Formula],
    c: ConstantsMap,
    p: EquivParams,
    *,
    units: UnitTable | None = None,
    memo: EquivalenceMemo | None = None,
    node_log: dict[int, dict] | None = None,
    numeric_finals: dict[int, int] | None = None,
) -> set[int]:
    """Step 2: node v is matched iff some candidate is equivalent to it.

    `numeric_finals` maps node index -> significant figures for final-answer
    nodes graded numerically; those nodes use the sig-figs check first and
    fall back to full equivalence for non-numeric candidates.
    """
    if units is None:
        units = default_unit_table()
    if memo is None:
        memo = EquivalenceMemo()
    numeric_finals = numeric_finals or {}
    matched: set[int] = set()
    for node in dag.nodes:
        entry: dict = {"status": "unmatched"}
        if node_log is not None:
            node_log[node.index] = entry
        try:
            node_formulas = _parse_rubric_node(node.formula, units)
        except ParseError as exc:
            entry["status"] = "unparseable"
            entry["reason"] = str(exc)
            continue
        sig = numeric_finals.get(node.index)
        ok = True
        for nf in node_formulas:  # a chained rubric block must match in full
            hit = False
            for g in candidate_formulas:
                if sig is not None and numeric_final_check(g, nf, sig, constants=c, params=p, memo=memo):
                    hit = True
                    break
                if memo.check(nf, g, c, p).equivalent:
                    hit = True
                    break
            if not hit:
                ok = False
                break
        if ok:
            matched.add(node.index)
            entry["status"] = "matched"
    return matched


def _round_sig(value: float, sig_figs: int) -> float:
    if value == 0:
        return 0.0
    return round(value, -int(math.floor(math.log10(abs(value)))) + (sig_figs - 1))


def _as_numeric_assignment(f: Formula) -> tuple[str, float] | None:
    """(symbol, SI value) for formulas shaped like `v = <closed expression>`."""
    if f.relation not in ("eq", "approx"):
        return None
    sides = [(f.lhs, f.rhs), (f.rhs, f.lhs)]
    for sym_side, value_side in sides:
        if isinstance(sym_side, Sym) and not free_symbols(value_side):
            try:
                return sym_side.name, eval_constant(value_side)
            except EvalDomainError:
                return None
    return None


def numeric_final_check(
    value: Formula,
    reference: Formula,
    sig_figs: int,
    *,
    constants: ConstantsMap | None = None,
    params: EquivParams | None = None,
    memo: EquivalenceMemo | None = None,
) -> bool:
    """True iff the candidate magnitude rounds to the reference at the given
    significant figures after SI unit conversion. Non-numeric inputs fall
    back to the full equivalence check."""
    cand = _as_numeric_assignment(value)
    ref = _as_numeric_assignment(reference)
    if cand is None or ref is None:
        constants = constants if constants is not None else ConstantsMap()
        params = params if params is not None else EquivParams()
        if memo is not None:
            return memo.check(reference, value, constants, params).equivalent
        return check_equivalence(reference, value, constants, params).equivalent
    if cand[0] != ref[0]:
        return False
    a = _round_sig(cand[1], sig_figs)
    b = _round_sig(ref[1], sig_figs)
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


@dataclass
class ProblemGrade:
    problem_id: object
    model: str | None
    report: ScoreReport | None
    node_log: dict[int, dict]
    parse_diag: ParseDiagnostics
    latency_s: float | None = None
    error: str | None = None

    @property
    def score_fraction(self) -> Fraction:
        return self.report.score if self.report is not None else Fraction(0)

    def to_dict(self) -> dict:
        out: dict = {
            "problem_id": self.problem_id,
            "model": self.model,
            "candidate": self.parse_diag.to_dict(),
            "node_log": {str(k): v for k, v in sorted(self.node_log.items())},
        }
        if self.latency_s is not None:
            out["latency_s"] = self.latency_s
        if self.error is not None:
            out["error"] = self.error
        if self.report is not None:
            out.update(self.report.to_dict())
        return out


def _numeric_final_map(problem: Problem) -> dict[int, int]:
    """Final-answer nodes paired with subquestions by order; a numerical
    subquestion with a significant_figures rule grades its final node by
    rounded magnitude."""
    finals = problem.dag.final_indices
    subqs: tuple[Subquestion, ...] = problem.subquestions
    out: dict[int, int] = {}
    if len(finals) == len(subqs):
        for idx, sq in zip(finals, subqs):
            if sq.final_answer_form == "numerical" and sq.significant_figures is not None:
                out[idx] = sq.significant_figures
    return out


def grade_solution(
    problem: Problem,
    candidate: CandidateSolution,
    c: ConstantsMap | None = None,
    p: EquivParams | None = None,
    *,
    units: UnitTable | None = None,
    memo: EquivalenceMemo | None = None,
) -> ProblemGrade:
    """Extract, match, and score one candidate against one problem."""
    if c is None:
        c = ConstantsMap()
    if p is None:
        p = EquivParams()
    if units is None:
        units = default_unit_table()
    report = validate(problem.dag)
    if not report.ok:
        raise ValueError(f"problem {problem.id!r} has an invalid dag: {report.to_dict()['violations']}")

    diag = ParseDiagnostics()
    formulas = parse_candidate_formulas(candidate.solution_text, units, diag)
    node_log: dict[int, dict] = {}
    matched = match_against_dag(
        problem.dag,
        formulas,
        c,
        p,
        units=units,
        memo=memo,
        node_log=node_log,
        numeric_finals=_numeric_final_map(problem),
    )
    sr = score(problem.dag, matched)
    for idx in sr.achieved:
        if node_log.get(idx, {}).get("status") == "unmatched":
            node_log[idx]["status"] = "achieved"
    return ProblemGrade(
        problem_id=problem.id,
        model=candidate.model,
        report=sr,
        node_log=node_log,
        parse_diag=diag,
        latency_s=candidate.latency_s,
    )


@dataclass
class AggregateReport:
    grades: list[ProblemGrade]
    rollups: dict
    run_meta: dict

    def to_dict(self) -> dict:
        return {
            "per_problem": [g.to_dict() for g in self.grades],
            "rollups": self.rollups,
            "run_meta": self.run_meta,
        }


def _group_rollup(grades: list[ProblemGrade], key_of) -> dict:
    groups: dict[str, list[ProblemGrade]] = {}
    for g in grades:
        groups.setdefault(key_of(g), []).append(g)
    out = {}
    for name in sorted(groups):
        members = [g for g in groups[name] if g.error is None]
        if not members:
            out[name] = {"problems": len(groups[name]), "errors": len(groups[name])}
            continue
        achieved = sum(len(g.report.achieved) for g in members)
        total = sum(g.report.score.denominator for g in members)
        latencies = [g.latency_s for g in members if g.latency_s is not None]
        out[name] = {
            "problems": len(groups[name]),
            "step_mean_by_problem": float(sum(g.score_fraction for g in members) / len(members)),
            "step_mean_pooled_nodes": achieved / total if total else 0.0,
            "final_accuracy": sum(1 for g in members if g.report.final_correct) / len(members),
            "mean_latency_s": (sum(latencies) / len(latencies)) if latencies else None,
        }
    return out


def grade_dataset(
    dataset: Dataset,
    candidates: list[CandidateSolution],
    c: ConstantsMap | None = None,
    p: EquivParams | None = None,
    parallelism: int = 1,
    *,
    units: UnitTable | None = None,
) -> AggregateReport:
    """Grade candidates independently and aggregate. Results are identical
    for any parallelism because every trial schedule is derived from the
    seed and the formula pair, never from execution order."""
    if c is None:
        c = ConstantsMap()
    if p is None:
        p = EquivParams()
    if units is None:
        units = default_unit_table()
    memo = EquivalenceMemo()

    def run(candidate: CandidateSolution) -> ProblemGrade:
        problem = dataset.by_id.get(candidate.problem_id)
        if problem is None:
            return ProblemGrade(
                problem_id=candidate.problem_id,
                model=candidate.model,
                report=None,
                node_log={},
                parse_diag=ParseDiagnostics(),
                error=f"unknown problem_id {candidate.problem_id!r}",
            )
        try:
            return grade_solution(problem, candidate, c, p, units=units, memo=memo)
        except Exception as exc:  # per-problem failures never abort the batch
            return ProblemGrade(
                problem_id=candidate.problem_id,
                model=candidate.model,
                report=None,
                node_log={},
                parse_diag=ParseDiagnostics(),
                error=f"{type(exc).__name__}: {exc}",
            )

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            grades = list(pool.map(run, candidates))
    else:
        grades = [run(cand) for cand in candidates]

    grades.sort(key=lambda g: (str(g.problem_id), str(g.model or "")))

    by_id = dataset.by_id
    rollups = {
        "by_difficulty": _group_rollup(
            grades, lambda g: (by_id[g.problem_id].difficulty if g.problem_id in by_id else None) or "unlabeled"
        ),
        "by_domain": _group_rollup(
            grades, lambda g: (by_id[g.problem_id].domain if g.problem_id in by_id else None) or "unlabeled"
        ),
        "overall": _group_rollup(grades, lambda g: "all")["all"],
    }
    run_meta = {
        "seed": p.seed,
        "params": {
            "n_max": p.n_max,
            "n_succ": p.n_succ,
            "n_eq": p.n_eq,
            "eps": p.eps,
            "sample_lo": p.sample_lo,
            "sample_hi": p.sample_hi,
            "t_max": p.t_max,
        },
        "versions": {"stepgrade": _package_version()},
    }
    return AggregateReport(grades, rollups, run_meta)


def _package_version() -> str:
    from . import __version__

    return __version__
