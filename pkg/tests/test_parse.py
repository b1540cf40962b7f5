import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepgrade.expr import (
    Add,
    Call,
    Const,
    Div,
    Formula,
    Mul,
    Neg,
    Num,
    Pow,
    Sym,
    UnitVal,
    add,
    free_variables,
    mul,
    neg,
    num,
)
from stepgrade.latex import ParseError, formula_to_latex, parse_formula


def parse_one(src):
    formulas = parse_formula(src)
    assert len(formulas) == 1
    return formulas[0]


def test_projectile_energy_formula():
    f = parse_one(r"E_0 = mgH + \frac 1 2 mv_0^2")
    assert f.lhs == Sym("E_0")
    expected = add(
        [
            mul([Sym("m"), Sym("g"), Sym("H")]),
            mul([Div(Num(1), Num(2)), Sym("m"), Pow(Sym("v_0"), Num(2))]),
        ]
    )
    assert f.rhs == expected


def test_unit_literal_frequency():
    f = parse_one(r"f = 50\unit{Hz}")
    assert f.rhs == UnitVal(50.0, "Hz", 1.0, (0, 0, -1, 0, 0, 0, 0))


def test_hz_equals_inverse_second():
    a = parse_one(r"f = 50\unit{Hz}")
    b = parse_one(r"f = 50\unit{s^{-1}}")
    assert a == b


def test_missing_rhs_is_an_error():
    with pytest.raises(ParseError):
        parse_formula("x =")


def test_no_relation_is_an_error():
    with pytest.raises(ParseError):
        parse_formula("x + y")


def test_chain_splits_into_two_formulas():
    formulas = parse_formula("a < b < c")
    assert formulas == [
        Formula(Sym("a"), Sym("b"), "lt"),
        Formula(Sym("b"), Sym("c"), "lt"),
    ]


@pytest.mark.parametrize(
    "src",
    [
        r"Q = \int \rho dV",
        r"\nabla \cdot E = 0",
        r"\frac{dv}{dt} = a",
        r"\frac{d}{dr}(r f) = 0",
        r"\rho = \delta(r)",
        r"\partial_t u = 0",
        r"x \neq y",
    ],
)
def test_unsupported_operators_rejected(src):
    with pytest.raises(ParseError):
        parse_formula(src)


def test_greek_alias_folding():
    a = parse_one(r"\varepsilon_0 = x")
    b = parse_one(r"\epsilon_0 = x")
    assert a == b
    assert a.lhs == Sym("epsilon_0")


def test_named_constants_excluded_from_free_variables():
    f = parse_one(r"x = 2\pi")
    assert free_variables(f) == {"x"}
    f = parse_one(r"y = e^{-b t}")
    assert free_variables(f) == {"y", "b", "t"}


def test_kepler_free_variables():
    f = parse_one(r"T = 2\pi\sqrt{\frac{a^3}{GM}}")
    assert free_variables(f) == {"T", "a", "G", "M"}


def test_newton_free_variables():
    f = parse_one("F = ma")
    assert free_variables(f) == {"F", "m", "a"}


def test_implicit_multiplication_binds_tighter_than_slash():
    f = parse_one("y = a/bc")
    assert f.rhs == Div(Sym("a"), Mul((Sym("b"), Sym("c"))))


def test_power_binds_tighter_than_multiplication():
    f = parse_one("y = ab^2")
    assert f.rhs == Mul((Sym("a"), Pow(Sym("b"), Num(2))))


def test_scientific_notation_product():
    f = parse_one(r"c = 3.0 \times 10^8")
    assert f.rhs == Mul((Num(3.0), Pow(Num(10), Num(8))))


def test_subscripted_group_symbol():
    f = parse_one(r"\mathbf{E} = A \frac{e^{-b r}}{r} \mathbf{e}_r")
    assert Sym("e_r") in f.rhs.factors
    assert free_variables(f) == {"E", "A", "b", "r", "e_r"}


def test_function_with_power():
    f = parse_one(r"y = \sin^2 \omega t")
    assert f.rhs == Pow(Call("sin", Mul((Sym("omega"), Sym("t")))), Num(2))


def test_adjacent_functions_do_not_swallow_each_other():
    f = parse_one(r"y = \sin x \cos x")
    assert f.rhs == Mul((Call("sin", Sym("x")), Call("cos", Sym("x"))))


def test_absolute_value_bars():
    f = parse_one("y = |x - 1|")
    assert f.rhs == Call("abs", Add((Sym("x"), Neg(Num(1)))))


def test_nth_root():
    f = parse_one(r"y = \sqrt[3]{x}")
    assert f.rhs == Pow(Sym("x"), Div(Num(1), Num(3)))


def test_approx_relation_kept_distinct():
    f = parse_one(r"x \approx 2.5")
    assert f.relation == "approx"


def test_primed_symbol():
    f = parse_one("M' = M + m")
    assert f.lhs == Sym("M'")


# ---------------------------------------------------------------------------
# Round-trip: printing a parsed tree and reparsing gives the identical tree
# ---------------------------------------------------------------------------

_names = st.sampled_from(["x", "y", "E_0", "v_f", "omega", "epsilon_0", "hbar", "m'", "T_{max}"])


def _exprs(depth):
    if depth <= 0:
        return st.one_of(
            st.integers(min_value=0, max_value=99).map(num),
            st.floats(min_value=0.001, max_value=1e6, allow_nan=False).map(num),
            _names.map(Sym),
            st.sampled_from([Const("pi"), Const("e")]),
            st.just(UnitVal(50.0, "Hz", 1.0, (0, 0, -1, 0, 0, 0, 0))),
        )
    sub = _exprs(depth - 1)
    return st.one_of(
        sub,
        sub.map(neg),
        st.lists(sub, min_size=2, max_size=3).map(add),
        st.lists(sub, min_size=2, max_size=3).map(mul),
        st.tuples(sub, sub).map(lambda t: Div(*t)),
        st.tuples(sub, st.integers(min_value=2, max_value=4).map(num)).map(lambda t: Pow(*t)),
        st.tuples(st.sampled_from(["sin", "exp", "ln", "sqrt", "abs"]), sub).map(lambda t: Call(*t)),
    )


@settings(max_examples=300, deadline=None)
@given(lhs=_exprs(2), rhs=_exprs(2), rel=st.sampled_from(["eq", "approx", "lt", "le", "gt", "ge"]))
def test_print_parse_roundtrip(lhs, rhs, rel):
    f = Formula(lhs, rhs, rel)
    text = formula_to_latex(f)
    reparsed = parse_formula(text)
    assert len(reparsed) == 1
    assert reparsed[0] == f
