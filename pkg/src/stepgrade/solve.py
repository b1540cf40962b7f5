"""Numeric root finding for the equivalence trials.

Solving a formula for a target variable means finding real roots of
residual(x) = lhs(x) - rhs(x) under a fixed assignment of all other
variables. The residual is scanned over a fixed composite grid
(logarithmic decades plus a linear window around zero, 4096 probes);
sign changes are refined by bisection and near-tangent contacts are
accepted from refined local minima of |residual|.

Residuals are compiled per (formula, target): subtrees independent of the
target are hoisted into per-assignment constants, the grid scan runs a
vectorized numpy evaluation, and bisection uses a scalar math-module twin.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass

import numpy as np

from .expr import (
    Add,
    Call,
    Const,
    Div,
    Expr,
    Formula,
    Mul,
    Neg,
    Num,
    Pow,
    Sym,
    UnitVal,
    free_symbols,
)

# Composite probe grid: log decades 1e-8..1e18 on both signs plus a linear
# window; 4096 probes total. The wide span keeps substituted physical
# constants (c^2 ~ 9e16) inside the searchable domain.
_NEG_LOG = -np.logspace(18.0, -8.0, 1663)
_POS_LOG = np.logspace(-8.0, 18.0, 1664)
_LIN = np.linspace(-100.0, 100.0, 768)
GRID = np.unique(np.concatenate([_NEG_LOG, _LIN, np.array([0.0]), _POS_LOG]))

_TANGENT_ACCEPT = 1e-9  # |residual| at which a refined minimum counts as a root
_TANGENT_TRIGGER = 1e-3  # local minima worth refining
_UNIVERSAL_TOL = 1e-9  # residual bound under which the equation holds everywhere
_MAX_BRACKETS = 64
_MAX_TANGENT = 8

OK = "ok"
UNIVERSAL = "universal"
DOMAIN_ERROR = "domain_error"
TIMEOUT = "timeout"


@dataclass(frozen=True)
class SolveResult:
    status: str  # ok | universal | domain_error | timeout
    roots: tuple[float, ...] = ()

    @property
    def is_empty(self) -> bool:
        return self.status == OK and not self.roots


class EvalDomainError(ValueError):
    """Expression not evaluable at the given assignment."""


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------

_FN_NP = {
    "sin": "np.sin",
    "cos": "np.cos",
    "tan": "np.tan",
    "exp": "np.exp",
    "ln": "np.log",
    "log": "np.log10",
    "sqrt": "np.sqrt",
    "abs": "np.abs",
}
_FN_MATH = {
    "sin": "math.sin",
    "cos": "math.cos",
    "tan": "math.tan",
    "exp": "math.exp",
    "ln": "math.log",
    "log": "math.log10",
    "sqrt": "math.sqrt",
    "abs": "abs",
}
_CONST_LITERAL = {"pi": repr(math.pi), "e": repr(math.e)}


class _CodeGen:
    """Emit python source for a residual as a function of the target."""

    def __init__(self, target: str):
        self.target = target
        self.hoisted: dict[str, str] = {}  # scalar code -> const name

    def hoist(self, scalar_code: str) -> str:
        name = self.hoisted.get(scalar_code)
        if name is None:
            name = f"_c[{len(self.hoisted)}]"
            self.hoisted[scalar_code] = name
        return name

    def emit(self, node: Expr) -> tuple[str, str, bool]:
        """Return (numpy code, math code, uses_target)."""
        vec, sca, uses = self._emit(node)
        if not uses:
            name = self.hoist(sca)
            return name, name, False
        return vec, sca, True

    def _emit(self, node: Expr) -> tuple[str, str, bool]:
        if isinstance(node, Num):
            lit = repr(float(node.value))
            return lit, lit, False
        if isinstance(node, UnitVal):
            lit = repr(node.si_magnitude)
            return lit, lit, False
        if isinstance(node, Const):
            lit = _CONST_LITERAL[node.name]
            return lit, lit, False
        if isinstance(node, Sym):
            if node.name == self.target:
                return "x", "x", True
            code = f"_env[{node.name!r}]"
            return code, code, False
        if isinstance(node, Neg):
            v, s, u = self.emit(node.arg)
            return f"(-{v})", f"(-{s})", u
        if isinstance(node, Add):
            parts = [self.emit(t) for t in node.terms]
            uses = any(p[2] for p in parts)
            return (
                "(" + " + ".join(p[0] for p in parts) + ")",
                "(" + " + ".join(p[1] for p in parts) + ")",
                uses,
            )
        if isinstance(node, Mul):
            parts = [self.emit(f) for f in node.factors]
            uses = any(p[2] for p in parts)
            return (
                "(" + " * ".join(p[0] for p in parts) + ")",
                "(" + " * ".join(p[1] for p in parts) + ")",
                uses,
            )
        if isinstance(node, Div):
            nv, ns, nu = self.emit(node.num)
            dv, ds, du = self.emit(node.den)
            return f"({nv} / {dv})", f"({ns} / {ds})", nu or du
        if isinstance(node, Pow):
            bv, bs, bu = self.emit(node.base)
            ev, es, eu = self.emit(node.exp)
            if isinstance(node.exp, Num) and isinstance(node.exp.value, int) and abs(node.exp.value) <= 4:
                n = node.exp.value
                return f"({bv} ** {n})", f"({bs} ** {n})", bu
            return f"({bv} ** {ev})", f"math.pow({bs}, {es})", bu or eu
        if isinstance(node, Call):
            av, asrc, au = self.emit(node.arg)
            return f"{_FN_NP[node.fn]}({av})", f"{_FN_MATH[node.fn]}({asrc})", au
        raise TypeError(f"cannot compile {node!r}")


@dataclass
class _Compiled:
    setup: object  # (env) -> tuple of floats, or raises EvalDomainError
    vec: object  # (x array, consts) -> residual array
    scalar: object  # (x float, consts) -> residual float or nan
    constant: bool  # residual does not involve the target


_EXC = "(ValueError, OverflowError, ZeroDivisionError, TypeError)"


def _compile_residual(formula: Formula, target: str) -> _Compiled:
    gen = _CodeGen(target)
    lv, ls, lu = gen.emit(formula.lhs)
    rv, rs, ru = gen.emit(formula.rhs)
    uses = lu or ru
    const_codes = list(gen.hoisted.items())
    # _t is a plain list during setup; the tuple it becomes is passed as _c.
    # Hoisted entries may reference earlier ones (children hoist first).
    setup_lines = "".join(
        f"        {name.replace('_c[', '_t[')} = {code.replace('_c[', '_t[')}\n"
        for code, name in const_codes
    )
    src = (
        "def _setup(_env):\n"
        "    _t = [0.0] * %d\n"
        "    try:\n"
        "%s"
        "    except %s as _exc:\n"
        "        raise EvalDomainError(str(_exc))\n"
        "    for _val in _t:\n"
        "        if not math.isfinite(_val):\n"
        "            raise EvalDomainError('non-finite constant subexpression')\n"
        "    return tuple(_t)\n"
        "def _vec(x, _c):\n"
        "    return (%s) - (%s)\n"
        "def _scalar(x, _c):\n"
        "    try:\n"
        "        return (%s) - (%s)\n"
        "    except %s:\n"
        "        return _NAN\n"
    ) % (
        len(const_codes),
        setup_lines if const_codes else "        pass\n",
        _EXC,
        lv,
        rv,
        ls,
        rs,
        _EXC,
    )
    namespace: dict = {"np": np, "math": math, "_NAN": float("nan"), "EvalDomainError": EvalDomainError}
    exec(compile(src, f"<residual:{target}>", "exec"), namespace)
    return _Compiled(
        setup=namespace["_setup"],
        vec=namespace["_vec"],
        scalar=namespace["_scalar"],
        constant=not uses,
    )


_compile_cache: dict[tuple[Formula, str], _Compiled] = {}
_compile_lock = threading.Lock()


def _compiled(formula: Formula, target: str) -> _Compiled:
    key = (formula, target)
    hit = _compile_cache.get(key)
    if hit is not None:
        return hit
    built = _compile_residual(formula, target)
    with _compile_lock:
        if len(_compile_cache) > 4096:
            _compile_cache.clear()
        _compile_cache[key] = built
    return built


_FN_EVAL = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "ln": math.log,
    "log": math.log10,
    "sqrt": math.sqrt,
    "abs": abs,
}


def eval_constant(expr: Expr) -> float:
    """Numeric value of a closed expression (no free symbols)."""
    try:
        value = _eval_const(expr)
    except (ValueError, OverflowError, ZeroDivisionError) as exc:
        raise EvalDomainError(str(exc)) from exc
    if not math.isfinite(value):
        raise EvalDomainError("non-finite value")
    return value


def _eval_const(expr: Expr) -> float:
    if isinstance(expr, Num):
        return float(expr.value)
    if isinstance(expr, UnitVal):
        return expr.si_magnitude
    if isinstance(expr, Const):
        return math.pi if expr.name == "pi" else math.e
    if isinstance(expr, Sym):
        raise EvalDomainError(f"free variable {expr.name!r} in constant context")
    if isinstance(expr, Neg):
        return -_eval_const(expr.arg)
    if isinstance(expr, Add):
        return sum(_eval_const(t) for t in expr.terms)
    if isinstance(expr, Mul):
        out = 1.0
        for f in expr.factors:
            out *= _eval_const(f)
        return out
    if isinstance(expr, Div):
        return _eval_const(expr.num) / _eval_const(expr.den)
    if isinstance(expr, Pow):
        return math.pow(_eval_const(expr.base), _eval_const(expr.exp))
    if isinstance(expr, Call):
        return _FN_EVAL[expr.fn](_eval_const(expr.arg))
    raise TypeError(f"cannot evaluate {expr!r}")


# ---------------------------------------------------------------------------
# Root search
# ---------------------------------------------------------------------------


def _bisect(fs, consts, a: float, b: float, fa: float, fb: float, eps: float) -> float:
    for _ in range(200):
        if (b - a) <= eps * max(1.0, abs(a), abs(b)) * 1e-3:
            break
        m = 0.5 * (a + b)
        fm = fs(m, consts)
        if math.isnan(fm):
            for frac in (0.4, 0.6, 0.25, 0.75):
                m = a + frac * (b - a)
                fm = fs(m, consts)
                if not math.isnan(fm):
                    break
            else:
                break  # interior not evaluable; settle for the midpoint
        if fm == 0.0:
            return m
        if (fa < 0.0) != (fm < 0.0):
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def _refine_tangent(fs, consts, lo: float, hi: float) -> tuple[float, float]:
    """Golden-ish ternary search minimizing |residual| on [lo, hi]."""
    f = lambda t: abs(fs(t, consts))  # noqa: E731
    for _ in range(60):
        if (hi - lo) <= 1e-15 * max(1.0, abs(lo), abs(hi)):
            break
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        v1, v2 = f(m1), f(m2)
        if math.isnan(v1) or math.isnan(v2):
            break
        if v1 <= v2:
            hi = m2
        else:
            lo = m1
    mid = 0.5 * (lo + hi)
    return mid, abs(fs(mid, consts))


def _dedupe(roots: list[float], eps: float) -> tuple[float, ...]:
    roots.sort()
    out: list[float] = []
    for r in roots:
        if out and abs(r - out[-1]) <= eps * max(1.0, abs(r), abs(out[-1])):
            continue
        out.append(r)
    return tuple(out)


def solve_target(
    f: Formula,
    target: str,
    assignment: dict[str, float],
    *,
    eps: float = 1e-6,
    t_max: float = 0.2,
) -> SolveResult:
    """All real roots of the residual found by the grid/bisection search.

    Status is `universal` when the residual vanishes everywhere it is
    evaluable, `domain_error` when it is evaluable nowhere, `timeout` when
    the wall-clock budget is exhausted (a defensive bound; the structural
    caps keep ordinary solves far below it).
    """
    deadline = time.monotonic() + t_max
    comp = _compiled(f, target)
    try:
        consts = comp.setup(assignment)
    except EvalDomainError:
        return SolveResult(DOMAIN_ERROR)
    except KeyError as exc:
        raise ValueError(f"assignment missing variable {exc.args[0]!r} for formula") from exc

    if comp.constant:
        # Residual does not involve the target: the equation holds for every
        # value or for none.
        value = comp.scalar(0.0, consts)
        if math.isnan(value):
            return SolveResult(DOMAIN_ERROR)
        if abs(value) <= _UNIVERSAL_TOL:
            return SolveResult(UNIVERSAL)
        return SolveResult(OK, ())

    with np.errstate(all="ignore"):
        r = np.asarray(comp.vec(GRID, consts), dtype=float)
    if r.ndim == 0:
        r = np.full(GRID.shape, float(r))
    finite = np.isfinite(r)
    n_finite = int(finite.sum())
    if n_finite == 0:
        return SolveResult(DOMAIN_ERROR)
    if float(np.max(np.abs(r[finite]))) <= _UNIVERSAL_TOL:
        return SolveResult(UNIVERSAL)

    roots: list[float] = []

    exact = finite & (r == 0.0)
    roots.extend(float(v) for v in GRID[exact])

    both = finite[:-1] & finite[1:]
    sign_change = both & ((r[:-1] < 0) != (r[1:] < 0)) & (r[:-1] != 0.0) & (r[1:] != 0.0)
    idx = np.nonzero(sign_change)[0]
    if len(idx) > _MAX_BRACKETS:
        # Deterministic cap: keep the brackets closest to zero.
        order = np.argsort(np.abs(GRID[idx]), kind="stable")
        idx = idx[np.sort(order[:_MAX_BRACKETS])]
    fs = comp.scalar
    for i in idx:
        if time.monotonic() > deadline:
            return SolveResult(TIMEOUT)
        a, b = float(GRID[i]), float(GRID[i + 1])
        roots.append(_bisect(fs, consts, a, b, float(r[i]), float(r[i + 1]), eps))

    # Near-tangent roots: refined local minima of |residual|.
    absr = np.abs(r)
    interior = finite[1:-1] & finite[:-2] & finite[2:]
    local_min = interior & (absr[1:-1] <= absr[:-2]) & (absr[1:-1] <= absr[2:]) & (absr[1:-1] < _TANGENT_TRIGGER)
    cand = np.nonzero(local_min)[0] + 1
    if len(cand) > _MAX_TANGENT:
        order = np.argsort(absr[cand], kind="stable")
        cand = cand[np.sort(order[:_MAX_TANGENT])]
    for i in cand:
        if time.monotonic() > deadline:
            return SolveResult(TIMEOUT)
        x_star, v = _refine_tangent(fs, consts, float(GRID[i - 1]), float(GRID[i + 1]))
        if v <= _TANGENT_ACCEPT:
            roots.append(x_star)

    return SolveResult(OK, _dedupe(roots, eps))


def all_close(s1, s2, eps: float) -> bool:
    """Pairwise match of two sorted root lists at mixed tolerance."""
    if len(s1) != len(s2):
        return False
    return all(abs(a - b) <= eps * max(1.0, abs(a), abs(b)) for a, b in zip(s1, s2))
