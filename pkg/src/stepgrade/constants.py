"""Constant substitution: symbol -> replacement expression or numeric value.

Substitution is two single passes per the matching algorithm: expression
entries first, then numeric entries. Named constants pi/e stay symbolic;
they are evaluated numerically only at solve time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .expr import Expr, Formula, free_symbols, num, rewrite
from .latex import ParseError, parse_formula
from .units import UnitTable, default_unit_table


class ConstantsError(ValueError):
    """Malformed constants map."""


def _parse_entry_expr(name: str, source: str, units: UnitTable) -> Expr:
    # Entry strings are bare expressions; wrap in a throwaway relation so the
    # formula parser can be reused.
    try:
        formulas = parse_formula(f"Z_{{cmapentry}} = {source}", units)
    except ParseError as exc:
        raise ConstantsError(f"constants entry {name!r}: {exc}") from exc
    if len(formulas) != 1:
        raise ConstantsError(f"constants entry {name!r}: expected a single expression")
    return formulas[0].rhs


@dataclass(frozen=True)
class ConstantsMap:
    expr_entries: dict[str, Expr] = field(default_factory=dict)
    value_entries: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        expr_keys = set(self.expr_entries)
        for name, expr in self.expr_entries.items():
            bad = free_symbols(expr) & expr_keys
            if bad:
                raise ConstantsError(
                    f"constants entry {name!r} references expression-valued keys {sorted(bad)}; "
                    "single-pass substitution would not terminate"
                )
        for name, value in self.value_entries.items():
            if not isinstance(value, (int, float)) or value != value or value in (float("inf"), float("-inf")):
                raise ConstantsError(f"constants entry {name!r}: value must be finite")

    def fingerprint(self) -> tuple:
        """Stable identity for memo keys."""
        from .latex import expr_to_latex

        exprs = tuple(sorted((k, expr_to_latex(v)) for k, v in self.expr_entries.items()))
        vals = tuple(sorted(self.value_entries.items()))
        return (exprs, vals)

    @classmethod
    def from_dict(cls, data: dict, units: UnitTable | None = None) -> "ConstantsMap":
        if units is None:
            units = default_unit_table()
        exprs: dict[str, Expr] = {}
        values: dict[str, float] = {}
        for name, entry in data.items():
            if isinstance(entry, str):
                exprs[name] = _parse_entry_expr(name, entry, units)
            elif isinstance(entry, (int, float)) and not isinstance(entry, bool):
                values[name] = float(entry)
            else:
                raise ConstantsError(f"constants entry {name!r}: expected string or number")
        return cls(exprs, values)

    @classmethod
    def from_file(cls, path: str, units: UnitTable | None = None) -> "ConstantsMap":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConstantsError("constants file must hold a JSON object")
        return cls.from_dict(data, units)


def substitute_constants(f: Formula, c: ConstantsMap) -> Formula:
    """Expression-valued entries first, then numeric-valued, one pass each."""
    lhs, rhs = f.lhs, f.rhs
    if c.expr_entries:
        lhs = rewrite(lhs, c.expr_entries)
        rhs = rewrite(rhs, c.expr_entries)
    if c.value_entries:
        value_map = {name: num(value) for name, value in c.value_entries.items()}
        lhs = rewrite(lhs, value_map)
        rhs = rewrite(rhs, value_map)
    return Formula(lhs, rhs, f.relation)


def default_constants_map() -> ConstantsMap:
    text = resources.files("stepgrade.data").joinpath("constants.json").read_text("utf-8")
    return ConstantsMap.from_dict(json.loads(text))
