"""Expression trees for the constrained physics-formula dialect.

Trees are immutable; construction helpers (`num`, `neg`, `add`, `mul`)
normalize shape (no negative literals, no double negation, n-ary
sums/products flattened) so that structural equality is meaningful and
the canonical printer round-trips.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

FUNCTIONS = frozenset({"sin", "cos", "tan", "exp", "ln", "log", "sqrt", "abs"})

RELATIONS = ("eq", "approx", "lt", "le", "gt", "ge")

Number = Union[int, float]


class Expr:
    """Base class for all expression nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    """Dimensionless numeric literal. Always non-negative; see `num`."""

    value: Number


@dataclass(frozen=True, eq=False)
class UnitVal(Expr):
    """Unit-annotated literal: magnitude times a resolved unit.

    Equality and hashing use the resolved (magnitude, SI factor, dimension)
    triple, not the spelling, so 50 Hz == 50 s^-1.
    """

    magnitude: float
    unit: str
    si_factor: float
    dimension: tuple[int, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UnitVal):
            return NotImplemented
        return (
            self.magnitude == other.magnitude
            and self.si_factor == other.si_factor
            and self.dimension == other.dimension
        )

    def __hash__(self) -> int:
        return hash((self.magnitude, self.si_factor, self.dimension))

    @property
    def si_magnitude(self) -> float:
        return self.magnitude * self.si_factor


@dataclass(frozen=True)
class Sym(Expr):
    """Named variable; subscripts and primes are part of the name."""

    name: str


@dataclass(frozen=True)
class Const(Expr):
    """Named mathematical constant: 'pi' or 'e'."""

    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    terms: tuple[Expr, ...]


@dataclass(frozen=True)
class Mul(Expr):
    factors: tuple[Expr, ...]


@dataclass(frozen=True)
class Div(Expr):
    num: Expr
    den: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exp: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr


def num(value: Number) -> Expr:
    """Numeric literal; negatives become Neg(Num(abs)) so the printer
    round-trips through the parser's unary minus."""
    if value < 0:
        return Neg(Num(-value))
    return Num(value)


def neg(arg: Expr) -> Expr:
    if isinstance(arg, Neg):
        return arg.arg
    return Neg(arg)


def add(terms: Iterable[Expr]) -> Expr:
    flat: list[Expr] = []
    for t in terms:
        if isinstance(t, Add):
            flat.extend(t.terms)
        else:
            flat.append(t)
    if not flat:
        raise ValueError("empty sum")
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(factors: Iterable[Expr]) -> Expr:
    flat: list[Expr] = []
    for f in factors:
        if isinstance(f, Mul):
            flat.extend(f.factors)
        else:
            flat.append(f)
    if not flat:
        raise ValueError("empty product")
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


@dataclass(frozen=True)
class Formula:
    """One binary relation between two expression trees."""

    lhs: Expr
    rhs: Expr
    relation: str = "eq"

    def __post_init__(self) -> None:
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")


def children(expr: Expr) -> tuple[Expr, ...]:
    if isinstance(expr, Neg):
        return (expr.arg,)
    if isinstance(expr, Add):
        return expr.terms
    if isinstance(expr, Mul):
        return expr.factors
    if isinstance(expr, Div):
        return (expr.num, expr.den)
    if isinstance(expr, Pow):
        return (expr.base, expr.exp)
    if isinstance(expr, Call):
        return (expr.arg,)
    return ()


def free_symbols(expr: Expr) -> frozenset[str]:
    """All symbol names in the tree; named constants are not symbols."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Sym):
            out.add(node.name)
        else:
            stack.extend(children(node))
    return frozenset(out)


def free_variables(formula: Formula) -> frozenset[str]:
    return free_symbols(formula.lhs) | free_symbols(formula.rhs)


def rewrite(expr: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace Sym nodes by name, simultaneously, in a single pass."""
    if isinstance(expr, Sym):
        return mapping.get(expr.name, expr)
    if isinstance(expr, Neg):
        return neg(rewrite(expr.arg, mapping))
    if isinstance(expr, Add):
        return add(rewrite(t, mapping) for t in expr.terms)
    if isinstance(expr, Mul):
        return mul(rewrite(f, mapping) for f in expr.factors)
    if isinstance(expr, Div):
        return Div(rewrite(expr.num, mapping), rewrite(expr.den, mapping))
    if isinstance(expr, Pow):
        return Pow(rewrite(expr.base, mapping), rewrite(expr.exp, mapping))
    if isinstance(expr, Call):
        return Call(expr.fn, rewrite(expr.arg, mapping))
    return expr
