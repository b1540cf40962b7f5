from hypothesis import given
from hypothesis import strategies as st

from stepgrade.latex import normalize_source


def test_strips_delimiters_and_spacing():
    assert normalize_source(r"\left( x \right)\,") == "( x )"


def test_already_normalized_is_unchanged():
    assert normalize_source("x = y") == "x = y"


def test_trailing_punctuation_removed():
    assert normalize_source("E = mc^2.") == "E = mc^2"
    assert normalize_source("E = mc^2 ;") == "E = mc^2"


def test_font_wrappers_removed():
    assert normalize_source(r"\mathrm{e}^{-x}") == "{e}^{-x}"
    assert normalize_source(r"\mathbf{E} = m") == "{E} = m"


def test_aligned_environment_unwrapped():
    out = normalize_source(r"\begin{aligned} a &= b \\ c &= d \end{aligned}")
    assert "begin" not in out and "&" not in out
    assert "a = b" in out and "c = d" in out


def test_dollar_fences_stripped():
    assert normalize_source("$$F = ma$$") == "F = ma"


@given(st.text(alphabet="xyz+-=()\\leftright{}., ~2", max_size=60))
def test_idempotent(s):
    once = normalize_source(s)
    assert normalize_source(once) == once
