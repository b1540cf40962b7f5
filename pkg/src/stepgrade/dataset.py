"""Dataset loading: problems with subquestions and a grading-standard DAG.

Top-level problem schema:
  {id, context, images[], subquestions[{letter, subproblem, solution,
   final_answer_form, final_answer_instructions, significant_figures?}],
   grading_standard[{index, formula, dependency, is_final_answer?}]}

Formula strings are wrapped in $$...$$. Optional top-level "difficulty"
and "domain" labels feed report rollups when present.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .dag import RubricDag, RubricNode


class DatasetError(ValueError):
    """Structurally invalid dataset file."""


@dataclass(frozen=True)
class Subquestion:
    letter: str
    subproblem: str
    solution: str
    final_answer_form: str | None = None
    final_answer_instructions: str | None = None
    significant_figures: int | None = None


@dataclass(frozen=True)
class Problem:
    id: object  # int or str, kept verbatim
    context: str
    images: tuple[dict, ...]
    subquestions: tuple[Subquestion, ...]
    dag: RubricDag
    difficulty: str | None = None
    domain: str | None = None

    def reference_solution_text(self) -> str:
        return "\n\n".join(sq.solution for sq in self.subquestions)


@dataclass(frozen=True)
class Dataset:
    problems: tuple[Problem, ...]
    by_id: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "by_id", {p.id: p for p in self.problems})


def _strip_dollars(formula: str) -> str:
    s = formula.strip()
    while s.startswith("$"):
        s = s[1:]
    while s.endswith("$"):
        s = s[:-1]
    return s.strip()


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise DatasetError(f"{where}: missing required key {key!r}")
    return obj[key]


def parse_problem(data: dict) -> Problem:
    pid = _require(data, "id", "problem")
    where = f"problem {pid!r}"
    context = _require(data, "context", where)
    standard = _require(data, "grading_standard", where)
    if not isinstance(standard, list) or not standard:
        raise DatasetError(f"{where}: grading_standard must be a non-empty list")

    nodes = []
    for entry in standard:
        idx = _require(entry, "index", f"{where} grading_standard")
        formula = _require(entry, "formula", f"{where} node {idx}")
        deps = entry.get("dependency", [])
        if not isinstance(deps, list):
            raise DatasetError(f"{where} node {idx}: dependency must be a list")
        nodes.append(
            RubricNode(
                index=int(idx),
                formula=_strip_dollars(str(formula)),
                dependency=tuple(int(d) for d in deps),
                is_final_answer=bool(entry.get("is_final_answer", False)),
            )
        )
    nodes.sort(key=lambda n: n.index)

    problem_sig = data.get("significant_figures")
    subqs = []
    for sq in data.get("subquestions", []):
        sig = sq.get("significant_figures", problem_sig)
        subqs.append(
            Subquestion(
                letter=str(sq.get("letter", "")),
                subproblem=str(sq.get("subproblem", "")),
                solution=str(sq.get("solution", "")),
                final_answer_form=sq.get("final_answer_form", data.get("final_answer_form")),
                final_answer_instructions=sq.get(
                    "final_answer_instructions", data.get("final_answer_instructions")
                ),
                significant_figures=int(sig) if sig is not None else None,
            )
        )

    return Problem(
        id=pid,
        context=str(context),
        images=tuple(data.get("images", [])),
        subquestions=tuple(subqs),
        dag=RubricDag(tuple(nodes)),
        difficulty=data.get("difficulty"),
        domain=data.get("domain"),
    )


def load_dataset(path: str) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list):
        raise DatasetError("dataset must be a JSON list of problems (or a single problem object)")
    return Dataset(tuple(parse_problem(p) for p in data))


def load_candidates(path: str) -> list[dict]:
    """JSON-lines candidate records: {problem_id, model?, solution, latency_s?}."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"candidates line {lineno}: {exc}") from exc
            if "problem_id" not in obj or "solution" not in obj:
                raise DatasetError(f"candidates line {lineno}: need problem_id and solution")
            records.append(obj)
    return records
