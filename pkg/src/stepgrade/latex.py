"""Parsing for the constrained LaTeX formula dialect.

Pipeline per formula block: `normalize_source` strips presentation-only
commands, then a recursive-descent parser builds `Formula` trees. A chained
comparison yields one Formula per relation. The canonical printer
`formula_to_latex` is the inverse of the parser up to structural equality.

Unsupported constructs (calculus operators, unknown commands, missing
relations) raise `ParseError`; callers treat such blocks as invalid and
skip them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .expr import (
    FUNCTIONS,
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
    add,
    mul,
    neg,
    num,
)
from .units import UnitError, UnitTable, default_unit_table


class ParseError(ValueError):
    """The block is not a valid formula in the supported dialect."""


# ---------------------------------------------------------------------------
# Source normalization
# ---------------------------------------------------------------------------

# Wrapper commands removed outright; their brace groups survive as plain
# grouping for the parser.
_FONT_COMMANDS = ("mathrm", "mathit", "mathbf", "boldsymbol", "mathsf", "text", "textrm", "mbox")

_SPACING_RE = re.compile(r"\\[,;!:]|\\quad\b|\\qquad\b|\\ ")
_ENV_RE = re.compile(r"\\(?:begin|end)\{[a-zA-Z*]+\}")
_LEFTRIGHT_RE = re.compile(r"\\left|\\right")
_FONT_RE = re.compile(r"\\(?:%s)\b" % "|".join(_FONT_COMMANDS))
_TRAILING_PUNCT = ".,;:!?"


def normalize_source(raw: str) -> str:
    """Strip presentation-only LaTeX from a formula block. Idempotent."""
    s = raw.strip()
    while s.startswith("$"):
        s = s[1:]
    while s.endswith("$"):
        s = s[:-1]
    s = _ENV_RE.sub(" ", s)
    s = _LEFTRIGHT_RE.sub("", s)
    s = _FONT_RE.sub("", s)
    s = _SPACING_RE.sub("", s)
    s = s.replace("~", " ").replace("&", " ")
    s = re.sub(r"\s+", " ", s).strip()
    while s and s[-1] in _TRAILING_PUNCT:
        s = s[:-1].rstrip()
    return s


# ---------------------------------------------------------------------------
# Formula extraction from solution text
# ---------------------------------------------------------------------------


def extract_formulas(solution: str) -> list[str]:
    """Return math-block contents in document order.

    Double-dollar blocks first-class; single-dollar inline spans are also
    collected because candidate solutions routinely misuse them. Unbalanced
    delimiters: complete pairs are kept, the dangling remainder is skipped.
    """
    spans: list[tuple[int, str]] = []
    masked = list(solution)
    positions = [m.start() for m in re.finditer(r"\$\$", solution)]
    for i in range(0, len(positions) - 1, 2):
        start, end = positions[i], positions[i + 1]
        spans.append((start, solution[start + 2 : end]))
        for j in range(start, end + 2):
            masked[j] = " "
    rest = "".join(masked)
    singles = [m.start() for m in re.finditer(r"\$", rest)]
    for i in range(0, len(singles) - 1, 2):
        start, end = singles[i], singles[i + 1]
        spans.append((start, rest[start + 1 : end]))
    spans.sort(key=lambda item: item[0])
    return [content.strip() for _, content in spans if content.strip()]


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_GREEK = {
    "alpha", "beta", "gamma", "epsilon", "zeta", "eta", "theta", "iota",
    "kappa", "lambda", "mu", "nu", "xi", "omicron", "rho", "sigma", "tau",
    "upsilon", "phi", "chi", "psi", "omega",
    "Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi", "Sigma", "Upsilon",
    "Phi", "Psi", "Omega",
}

# Fixed alias table: var-variants fold onto the plain letter.
_GREEK_ALIASES = {
    "varepsilon": "epsilon",
    "vartheta": "theta",
    "varrho": "rho",
    "varsigma": "sigma",
    "varphi": "phi",
}

# Extra letter-like commands usable as symbols.
_LETTERLIKE = {"hbar", "ell"}

_REL_COMMANDS = {"le": "le", "leq": "le", "ge": "ge", "geq": "ge", "approx": "approx", "lt": "lt", "gt": "gt"}

_REL_CHARS = {"=": "eq", "<": "lt", ">": "gt"}

# \delta is rejected along with the calculus operators: in this corpus it
# marks Dirac deltas and differentials, which the dialect cannot grade.
_BANNED_COMMANDS = {
    "int", "iint", "iiint", "oint", "partial", "nabla", "delta", "sum",
    "prod", "lim", "infty", "pm", "mp", "neq", "equiv", "propto", "sim",
    "cdots", "dots", "ldots", "vec", "dot", "ddot", "binom", "Bigl", "Bigr",
    "bigl", "bigr", "Big", "big",
}

# \frac{d...}{d...} means a derivative, not division by a product led by 'd'.
_DERIV_RE = re.compile(r"\\frac\s*\{\s*d[a-zA-Z\\}]|\\frac\s*d")


@dataclass(frozen=True)
class _Tok:
    kind: str  # NUM LETTER CMD REL OP LBRACE RBRACE LPAREN RPAREN LBRACK RBRACK PIPE PRIME
    value: str
    pos: int


_NUM_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_CMD_RE = re.compile(r"\\([a-zA-Z]+)")

_SINGLE_OPS = {"+", "-", "/", "^", "_"}


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i = 0
    n = len(src)
    while i < n:
        ch = src[i]
        if ch in " \t":
            i += 1
            continue
        if ch == "\\":
            m = _CMD_RE.match(src, i)
            if not m:
                raise ParseError(f"stray backslash at {i}")
            name = m.group(1)
            if name in ("dfrac", "tfrac"):
                name = "frac"
            if name in _BANNED_COMMANDS:
                raise ParseError(f"unsupported command \\{name}")
            toks.append(_Tok("CMD", name, i))
            i = m.end()
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and src[i + 1].isdigit()):
            m = _NUM_RE.match(src, i)
            assert m is not None
            toks.append(_Tok("NUM", m.group(0), i))
            i = m.end()
            continue
        if ch.isalpha():
            toks.append(_Tok("LETTER", ch, i))
            i += 1
            continue
        if ch in _REL_CHARS:
            toks.append(_Tok("REL", _REL_CHARS[ch], i))
            i += 1
            continue
        if ch in _SINGLE_OPS:
            toks.append(_Tok("OP", ch, i))
            i += 1
            continue
        if ch == "{":
            toks.append(_Tok("LBRACE", ch, i))
        elif ch == "}":
            toks.append(_Tok("RBRACE", ch, i))
        elif ch == "(":
            toks.append(_Tok("LPAREN", ch, i))
        elif ch == ")":
            toks.append(_Tok("RPAREN", ch, i))
        elif ch == "[":
            toks.append(_Tok("LBRACK", ch, i))
        elif ch == "]":
            toks.append(_Tok("RBRACK", ch, i))
        elif ch == "|":
            toks.append(_Tok("PIPE", ch, i))
        elif ch == "'":
            toks.append(_Tok("PRIME", ch, i))
        else:
            raise ParseError(f"unexpected character {ch!r} at {i}")
        i += 1
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, src: str, units: UnitTable):
        self.src = src
        self.units = units
        self.toks = _tokenize(src)
        self.i = 0
        self.abs_depth = 0

    # -- token helpers ------------------------------------------------------

    def _peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def _next(self) -> _Tok:
        tok = self._peek()
        if tok is None:
            raise ParseError("unexpected end of formula")
        self.i += 1
        return tok

    def _expect(self, kind: str) -> _Tok:
        tok = self._next()
        if tok.kind != kind:
            raise ParseError(f"expected {kind}, got {tok.kind} {tok.value!r} at {tok.pos}")
        return tok

    # -- entry point --------------------------------------------------------

    def parse_chain(self) -> list[Formula]:
        sides = [self._sum()]
        relations: list[str] = []
        while self._peek() is not None and self._is_relation(self.toks[self.i]):
            tok = self._next()
            relations.append(tok.value if tok.kind == "REL" else _REL_COMMANDS[tok.value])
            sides.append(self._sum())
        if self._peek() is not None:
            tok = self.toks[self.i]
            raise ParseError(f"trailing input at {tok.pos}: {tok.value!r}")
        if not relations:
            raise ParseError("no relation in formula block")
        return [Formula(sides[k], sides[k + 1], relations[k]) for k in range(len(relations))]

    def _is_relation(self, tok: _Tok) -> bool:
        return tok.kind == "REL" or (tok.kind == "CMD" and tok.value in _REL_COMMANDS)

    # -- grammar ------------------------------------------------------------

    def _sum(self) -> Expr:
        terms: list[Expr] = []
        sign = self._leading_sign()
        first = self._quotient()
        terms.append(neg(first) if sign < 0 else first)
        while True:
            tok = self._peek()
            if tok is None or tok.kind != "OP" or tok.value not in "+-":
                break
            op = self._next().value
            sign = -1 if op == "-" else 1
            sign *= self._leading_sign()
            term = self._quotient()
            terms.append(neg(term) if sign < 0 else term)
        return add(terms)

    def _leading_sign(self) -> int:
        sign = 1
        while True:
            tok = self._peek()
            if tok is not None and tok.kind == "OP" and tok.value in "+-":
                if tok.value == "-":
                    sign = -sign
                self.i += 1
            else:
                return sign

    def _quotient(self) -> Expr:
        # Implicit multiplication binds tighter than '/': a/bc == a/(b*c).
        left = self._product()
        while True:
            tok = self._peek()
            if tok is None or tok.kind != "OP" or tok.value != "/":
                break
            self.i += 1
            right = self._product()
            left = Div(left, right)
        return left

    def _product(self) -> Expr:
        factors = [self._power()]
        while True:
            tok = self._peek()
            if tok is None:
                break
            if tok.kind == "CMD" and tok.value in ("cdot", "times"):
                self.i += 1
                factors.append(self._power())
                continue
            if self._starts_atom(tok):
                factors.append(self._power())
                continue
            break
        return mul(factors)

    def _starts_atom(self, tok: _Tok) -> bool:
        if tok.kind in ("NUM", "LETTER", "LPAREN", "LBRACE"):
            return True
        if tok.kind == "PIPE":
            return self.abs_depth == 0
        if tok.kind == "CMD":
            v = tok.value
            return (
                v in _GREEK
                or v in _GREEK_ALIASES
                or v in _LETTERLIKE
                or v in FUNCTIONS
                or v in ("frac", "sqrt", "pi", "unit")
            )
        return False

    def _power(self) -> Expr:
        base = self._atom()
        tok = self._peek()
        if tok is not None and tok.kind == "OP" and tok.value == "^":
            self.i += 1
            return Pow(base, self._exponent())
        return base

    def _exponent(self) -> Expr:
        tok = self._peek()
        if tok is None:
            raise ParseError("missing exponent")
        if tok.kind == "LBRACE":
            self.i += 1
            inner = self._sum()
            self._expect("RBRACE")
            return inner
        sign = self._leading_sign()
        exp = self._atom()
        return neg(exp) if sign < 0 else exp

    # -- atoms --------------------------------------------------------------

    def _atom(self) -> Expr:
        tok = self._peek()
        if tok is None:
            raise ParseError("expected operand")
        if tok.kind == "NUM":
            self.i += 1
            value: float | int = float(tok.value) if ("." in tok.value or "e" in tok.value or "E" in tok.value) else int(tok.value)
            nxt = self._peek()
            if nxt is not None and nxt.kind == "CMD" and nxt.value == "unit":
                self.i += 1
                return self._unit_literal(float(value))
            return num(value)
        if tok.kind == "LETTER":
            self.i += 1
            return self._symbol(tok.value)
        if tok.kind == "LPAREN":
            self.i += 1
            inner = self._sum()
            self._expect("RPAREN")
            return inner
        if tok.kind == "LBRACE":
            self.i += 1
            inner = self._sum()
            self._expect("RBRACE")
            nxt = self._peek()
            if nxt is not None and nxt.kind == "OP" and nxt.value == "_":
                # {e}_r and friends: a subscripted one-symbol group is a symbol
                # (font wrappers leave bare brace groups behind).
                base = None
                if isinstance(inner, Sym):
                    base = inner.name
                elif isinstance(inner, Const):
                    base = "pi" if inner.name == "pi" else "e"
                if base is not None:
                    self.i += 1
                    name = base + "_" + self._subscript_text()
                    while True:
                        t2 = self._peek()
                        if t2 is not None and t2.kind == "PRIME":
                            self.i += 1
                            name += "'"
                        else:
                            break
                    return Sym(name)
            return inner
        if tok.kind == "PIPE":
            self.i += 1
            self.abs_depth += 1
            inner = self._sum()
            self.abs_depth -= 1
            self._expect("PIPE")
            return Call("abs", inner)
        if tok.kind == "OP" and tok.value == "-":
            # unary minus in operand position, e.g. inside an exponent group
            self.i += 1
            return neg(self._power())
        if tok.kind == "CMD":
            return self._command_atom(tok)
        raise ParseError(f"unexpected token {tok.value!r} at {tok.pos}")

    def _command_atom(self, tok: _Tok) -> Expr:
        name = tok.value
        self.i += 1
        if name == "pi":
            return self._maybe_subscripted_const("pi")
        if name in _GREEK_ALIASES:
            name = _GREEK_ALIASES[name]
        if name in _GREEK or name in _LETTERLIKE:
            return self._symbol(name)
        if name == "frac":
            numer = self._group_arg()
            denom = self._group_arg()
            return Div(numer, denom)
        if name == "sqrt":
            return self._sqrt()
        if name in FUNCTIONS:
            return self._function(name)
        if name == "unit":
            return self._unit_literal(1.0)
        raise ParseError(f"unsupported command \\{name}")

    def _maybe_subscripted_const(self, base: str) -> Expr:
        # A subscript turns the constant letter into a plain symbol (e_r).
        tok = self._peek()
        if tok is not None and ((tok.kind == "OP" and tok.value == "_") or tok.kind == "PRIME"):
            return self._symbol(base)
        return Const(base)

    def _symbol(self, base: str) -> Expr:
        name = base
        tok = self._peek()
        if tok is not None and tok.kind == "OP" and tok.value == "_":
            self.i += 1
            name += "_" + self._subscript_text()
        while True:
            tok = self._peek()
            if tok is not None and tok.kind == "PRIME":
                self.i += 1
                name += "'"
            else:
                break
        if name == "e":
            return Const("e")
        return Sym(name)

    def _subscript_text(self) -> str:
        tok = self._next()
        if tok.kind == "LBRACE":
            depth = 1
            parts: list[str] = []
            while depth > 0:
                t = self._next()
                if t.kind == "LBRACE":
                    depth += 1
                elif t.kind == "RBRACE":
                    depth -= 1
                    if depth == 0:
                        break
                if t.kind == "CMD":
                    parts.append("\\" + t.value)
                else:
                    parts.append(t.value)
            return "".join(parts)
        if tok.kind == "CMD":
            return "\\" + tok.value
        if tok.kind in ("NUM", "LETTER"):
            # single-token subscript: one letter or one digit run
            return tok.value
        raise ParseError(f"bad subscript at {tok.pos}")

    def _group_arg(self) -> Expr:
        """Argument of \\frac etc.: brace group or a single token."""
        tok = self._peek()
        if tok is None:
            raise ParseError("missing argument")
        if tok.kind == "LBRACE":
            self.i += 1
            inner = self._sum()
            self._expect("RBRACE")
            return inner
        return self._atom_single()

    def _atom_single(self) -> Expr:
        """One unbraced token as an argument (\\frac 1 2)."""
        tok = self._next()
        if tok.kind == "NUM":
            value: float | int = float(tok.value) if ("." in tok.value or "e" in tok.value or "E" in tok.value) else int(tok.value)
            return num(value)
        if tok.kind == "LETTER":
            return self._symbol(tok.value)
        if tok.kind == "CMD":
            name = tok.value
            if name == "pi":
                return Const("pi")
            if name in _GREEK_ALIASES:
                name = _GREEK_ALIASES[name]
            if name in _GREEK or name in _LETTERLIKE:
                return self._symbol(name)
        raise ParseError(f"bad argument at {tok.pos}")

    def _sqrt(self) -> Expr:
        tok = self._peek()
        if tok is not None and tok.kind == "LBRACK":
            self.i += 1
            idx_tok = self._expect("NUM")
            self._expect("RBRACK")
            arg = self._group_arg()
            return Pow(arg, Div(Num(1), num(int(idx_tok.value))))
        arg = self._group_arg()
        return Call("sqrt", arg)

    def _function(self, name: str) -> Expr:
        # \sin^2 x parses as (sin x)^2
        exponent: Expr | None = None
        tok = self._peek()
        if tok is not None and tok.kind == "OP" and tok.value == "^":
            self.i += 1
            exponent = self._exponent()
        arg = self._function_arg()
        result: Expr = Call(name, arg)
        if exponent is not None:
            result = Pow(result, exponent)
        return result

    def _function_arg(self) -> Expr:
        tok = self._peek()
        if tok is None:
            raise ParseError("missing function argument")
        if tok.kind == "LPAREN":
            self.i += 1
            inner = self._sum()
            self._expect("RPAREN")
            return inner
        if tok.kind == "LBRACE":
            self.i += 1
            inner = self._sum()
            self._expect("RBRACE")
            return inner
        # Bare argument: consume a run of juxtaposed simple factors so that
        # \sin \omega t means sin(omega*t); stops before another function,
        # \frac, parens, or any operator.
        factors: list[Expr] = []
        sign = 1
        if tok.kind == "OP" and tok.value == "-":
            self.i += 1
            sign = -1
        while True:
            tok = self._peek()
            if tok is None or not self._is_simple_factor(tok):
                break
            factors.append(self._power())
        if not factors:
            raise ParseError("missing function argument")
        result = mul(factors)
        return neg(result) if sign < 0 else result

    def _is_simple_factor(self, tok: _Tok) -> bool:
        if tok.kind in ("NUM", "LETTER"):
            return True
        if tok.kind == "CMD":
            v = tok.value
            return v in _GREEK or v in _GREEK_ALIASES or v in _LETTERLIKE or v == "pi"
        return False

    def _unit_literal(self, magnitude: float) -> Expr:
        # caller has already consumed the \unit command token
        tok = self._expect("LBRACE")
        depth = 1
        start = tok.pos + 1
        end = start
        while depth > 0:
            t = self._next()
            if t.kind == "LBRACE":
                depth += 1
            elif t.kind == "RBRACE":
                depth -= 1
            end = t.pos
        unit_text = self.src[start:end].strip()
        try:
            factor, dim = self.units.resolve(unit_text)
        except UnitError as exc:
            raise ParseError(str(exc)) from exc
        return UnitVal(magnitude, unit_text, factor, dim)


def parse_formula(src: str, units: UnitTable | None = None) -> list[Formula]:
    """Parse one normalized formula block into Formulas, one per relation."""
    if units is None:
        units = default_unit_table()
    normalized = normalize_source(src)
    if not normalized:
        raise ParseError("empty formula block")
    if _DERIV_RE.search(normalized):
        raise ParseError("derivative notation is unsupported")
    return _Parser(normalized, units).parse_chain()


# ---------------------------------------------------------------------------
# Canonical printer
# ---------------------------------------------------------------------------

_REL_PRINT = {"eq": "=", "approx": "\\approx", "lt": "<", "le": "\\le", "gt": ">", "ge": "\\ge"}

_GREEK_PRINT = _GREEK | _LETTERLIKE


def _print_symbol(name: str) -> str:
    primes = ""
    while name.endswith("'"):
        primes += "'"
        name = name[:-1]
    base, _, sub = name.partition("_")
    out = "\\" + base if base in _GREEK_PRINT else base
    if sub:
        out += "_" + (sub if len(sub) == 1 else "{" + sub + "}")
    return out + primes


def _is_atomic(expr: Expr) -> bool:
    return isinstance(expr, (Num, Sym, Const, UnitVal, Call, Div))


def expr_to_latex(expr: Expr) -> str:
    if isinstance(expr, Num):
        return repr(expr.value) if isinstance(expr.value, float) else str(expr.value)
    if isinstance(expr, UnitVal):
        return f"{expr.magnitude!r}\\unit{{{expr.unit}}}"
    if isinstance(expr, Sym):
        return _print_symbol(expr.name)
    if isinstance(expr, Const):
        return "\\pi" if expr.name == "pi" else "e"
    if isinstance(expr, Neg):
        inner = expr.arg
        if isinstance(inner, Add):
            return "-(" + expr_to_latex(inner) + ")"
        return "-" + expr_to_latex(inner)
    if isinstance(expr, Add):
        parts = []
        for k, term in enumerate(expr.terms):
            if isinstance(term, Neg):
                parts.append(("- " if k else "-") + _addend(term.arg))
            else:
                parts.append(("+ " if k else "") + _addend(term))
        return " ".join(parts)
    if isinstance(expr, Mul):
        return " \\cdot ".join(_factor(f) for f in expr.factors)
    if isinstance(expr, Div):
        return "\\frac{" + expr_to_latex(expr.num) + "}{" + expr_to_latex(expr.den) + "}"
    if isinstance(expr, Pow):
        base = expr.base
        base_s = expr_to_latex(base)
        if not _is_atomic(base) or isinstance(base, Div):
            base_s = "(" + base_s + ")"
        return base_s + "^{" + expr_to_latex(expr.exp) + "}"
    if isinstance(expr, Call):
        if expr.fn == "sqrt":
            return "\\sqrt{" + expr_to_latex(expr.arg) + "}"
        if expr.fn == "abs":
            return "|" + expr_to_latex(expr.arg) + "|"
        return "\\" + expr.fn + "(" + expr_to_latex(expr.arg) + ")"
    raise TypeError(f"unknown node {expr!r}")


def _addend(expr: Expr) -> str:
    return expr_to_latex(expr)


def _factor(expr: Expr) -> str:
    s = expr_to_latex(expr)
    if isinstance(expr, (Add, Neg)):
        return "(" + s + ")"
    return s


def formula_to_latex(f: Formula) -> str:
    return f"{expr_to_latex(f.lhs)} {_REL_PRINT[f.relation]} {expr_to_latex(f.rhs)}"
