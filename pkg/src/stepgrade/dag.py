"""Reference-solution dependency DAGs and ancestor-closure scoring.

Nodes are 1-indexed formulas; an edge (u, v) recorded as ``u in
dependency(v)`` means v was derived from u, so edges always point forward
in index order. Credit propagates from matched nodes to all their
ancestors; the score is the credited fraction of nodes, kept exact as a
Fraction until reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction


@dataclass(frozen=True)
class RubricNode:
    index: int
    formula: str
    dependency: tuple[int, ...] = ()
    is_final_answer: bool = False


@dataclass(frozen=True)
class RubricDag:
    nodes: tuple[RubricNode, ...]

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, index: int) -> RubricNode:
        node = self.nodes[index - 1]
        if node.index != index:
            raise KeyError(index)
        return node

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(n.index for n in self.nodes)

    @property
    def final_indices(self) -> tuple[int, ...]:
        return tuple(n.index for n in self.nodes if n.is_final_answer)

    def dependents(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {n.index: [] for n in self.nodes}
        for n in self.nodes:
            for d in n.dependency:
                if d in out:
                    out[d].append(n.index)
        return out


@dataclass(frozen=True)
class Violation:
    kind: str
    index: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    warnings: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [v.__dict__ for v in self.violations],
            "warnings": [v.__dict__ for v in self.warnings],
        }


def validate(dag: RubricDag) -> ValidationReport:
    """Check the construction rules; violations are data, not exceptions."""
    violations: list[Violation] = []
    warnings: list[Violation] = []
    n = len(dag.nodes)

    indices = [node.index for node in dag.nodes]
    if indices != list(range(1, n + 1)):
        violations.append(Violation("index-gap", 0, f"node indices must be exactly 1..{n}, got {indices}"))
        return ValidationReport(tuple(violations))

    for node in dag.nodes:
        seen: set[int] = set()
        for d in node.dependency:
            if d in seen:
                violations.append(Violation("duplicate-dependency", node.index, f"dependency {d} repeated"))
            seen.add(d)
            if d < 1 or d >= node.index:
                violations.append(
                    Violation("backward-edge", node.index, f"dependency {d} does not precede node {node.index}")
                )

    finals = dag.final_indices
    if not finals:
        violations.append(Violation("no-final", 0, "no node is flagged as a final answer"))
    if n and not dag.nodes[-1].is_final_answer:
        violations.append(Violation("last-not-final", n, "the last node must be a final answer"))

    if not violations and finals:
        reachable = ancestor_closure(dag, set(finals))
        for node in dag.nodes:
            if node.index not in reachable:
                violations.append(
                    Violation(
                        "unreachable-to-final",
                        node.index,
                        f"node {node.index} has no directed path to a final-answer node",
                    )
                )

    if not violations:
        dependents = dag.dependents()
        for node in dag.nodes:
            if len(node.dependency) == 1 and len(dependents[node.index]) == 1 and not node.is_final_answer:
                warnings.append(
                    Violation(
                        "possibly-redundant",
                        node.index,
                        "single dependency and single dependent; possibly a redundant algebraic step",
                    )
                )

    return ValidationReport(tuple(violations), tuple(warnings))


def ancestor_closure(dag: RubricDag, matched: set[int]) -> frozenset[int]:
    """Matched nodes plus all their ancestors (iterative ancestor marking)."""
    index_set = set(dag.indices)
    unknown = set(matched) - index_set
    if unknown:
        raise ValueError(f"matched set references unknown node indices {sorted(unknown)}")
    deps = {node.index: node.dependency for node in dag.nodes}
    achieved: set[int] = set()
    stack = list(matched)
    while stack:
        u = stack.pop()
        if u in achieved:
            continue
        achieved.add(u)
        stack.extend(deps[u])
    return frozenset(achieved)


@dataclass(frozen=True)
class ScoreReport:
    matched: frozenset[int]
    achieved: frozenset[int]
    score: Fraction
    final_correct: bool
    per_final: tuple[tuple[int, bool], ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "matched": sorted(self.matched),
            "achieved": sorted(self.achieved),
            "score": float(self.score),
            "score_exact": f"{self.score.numerator}/{self.score.denominator}",
            "final_correct": self.final_correct,
            "per_final": {str(i): ok for i, ok in self.per_final},
        }


def score(dag: RubricDag, matched: set[int]) -> ScoreReport:
    """Ancestor-closure score; finals must be directly matched to count."""
    report = validate(dag)
    if not report.ok:
        raise ValueError(f"refusing to score an invalid dag: {report.to_dict()['violations']}")
    achieved = ancestor_closure(dag, matched)
    per_final = tuple((i, i in matched) for i in dag.final_indices)
    return ScoreReport(
        matched=frozenset(matched),
        achieved=achieved,
        score=Fraction(len(achieved), len(dag.nodes)),
        final_correct=all(ok for _, ok in per_final),
        per_final=per_final,
    )


# ---------------------------------------------------------------------------
# Justification-kernel serialization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Kernel:
    """Minimal prerequisite relation: the edge pairs (A, B) with A |- B,
    together with the node payloads the DAG carries."""

    size: int
    pairs: tuple[tuple[int, int], ...]
    formulas: tuple[str, ...]
    finals: tuple[int, ...]


def to_kernel(dag: RubricDag) -> Kernel:
    pairs = tuple((d, node.index) for node in dag.nodes for d in node.dependency)
    return Kernel(
        size=len(dag.nodes),
        pairs=pairs,
        formulas=tuple(node.formula for node in dag.nodes),
        finals=dag.final_indices,
    )


def from_kernel(kernel: Kernel) -> RubricDag:
    deps: dict[int, list[int]] = {i: [] for i in range(1, kernel.size + 1)}
    for a, b in kernel.pairs:
        deps[b].append(a)
    finals = set(kernel.finals)
    nodes = tuple(
        RubricNode(
            index=i,
            formula=kernel.formulas[i - 1],
            dependency=tuple(deps[i]),
            is_final_answer=i in finals,
        )
        for i in range(1, kernel.size + 1)
    )
    return RubricDag(nodes)


def kernel_roundtrip(dag: RubricDag) -> RubricDag:
    return from_kernel(to_kernel(dag))
