"""Unit table: unit ids mapped to SI conversion factors and dimension vectors.

The dimension basis is (m, kg, s, A, K, mol, cd) with integer exponents.
Composite unit expressions such as ``m/s^2`` or ``C^2/(N m^2)`` are reduced
to a single (factor, dimension) pair.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

DIMENSIONS = ("m", "kg", "s", "A", "K", "mol", "cd")

_NO_DIM = (0, 0, 0, 0, 0, 0, 0)


class UnitError(ValueError):
    """Raised for unknown unit ids or malformed unit expressions."""


@dataclass(frozen=True)
class UnitTable:
    entries: dict[str, tuple[float, tuple[int, ...]]]

    def resolve(self, text: str) -> tuple[float, tuple[int, ...]]:
        """Reduce a unit expression to (SI factor, dimension vector)."""
        text = text.strip()
        if not text:
            raise UnitError("empty unit expression")
        if text in self.entries:
            return self.entries[text]
        return _UnitParser(text, self.entries).parse()


_TOKEN = re.compile(r"\s*(?:(\\cdot)|([A-Za-z]+)|(\^)|(/)|(\()|(\))|(\{)|(\})|(-?\d+))")


class _UnitParser:
    """Tiny grammar: product terms separated by '/', factors with integer
    exponents, parenthesised groups."""

    def __init__(self, text: str, entries: dict[str, tuple[float, tuple[int, ...]]]):
        self.text = text
        self.pos = 0
        self.entries = entries

    def parse(self) -> tuple[float, tuple[int, ...]]:
        factor, dim = self._quotient()
        self._skip_ws()
        if self.pos != len(self.text):
            raise UnitError(f"trailing junk in unit {self.text!r}")
        return factor, dim

    def _skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def _peek(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _quotient(self) -> tuple[float, tuple[int, ...]]:
        factor, dim = self._product()
        while self._peek() == "/":
            self.pos += 1
            f2, d2 = self._product()
            factor /= f2
            dim = tuple(a - b for a, b in zip(dim, d2))
        return factor, dim

    def _product(self) -> tuple[float, tuple[int, ...]]:
        factor, dim = self._factor()
        while True:
            ch = self._peek()
            if ch == "\\" and self.text.startswith("\\cdot", self.pos):
                self.pos += len("\\cdot")
            elif ch.isalpha() or ch == "(":
                pass
            else:
                break
            f2, d2 = self._factor()
            factor *= f2
            dim = tuple(a + b for a, b in zip(dim, d2))
        return factor, dim

    def _factor(self) -> tuple[float, tuple[int, ...]]:
        ch = self._peek()
        if ch == "(":
            self.pos += 1
            factor, dim = self._quotient()
            if self._peek() != ")":
                raise UnitError(f"unbalanced parens in unit {self.text!r}")
            self.pos += 1
        elif ch.isalpha():
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isalpha():
                self.pos += 1
            name = self.text[start : self.pos]
            if name not in self.entries:
                raise UnitError(f"unknown unit {name!r}")
            factor, dim = self.entries[name]
        else:
            raise UnitError(f"bad unit syntax at {self.text[self.pos:]!r}")
        if self._peek() == "^":
            self.pos += 1
            exp = self._int_exponent()
            factor = factor**exp
            dim = tuple(e * exp for e in dim)
        return factor, dim

    def _int_exponent(self) -> int:
        self._skip_ws()
        braced = self.pos < len(self.text) and self.text[self.pos] == "{"
        if braced:
            self.pos += 1
        m = re.match(r"\s*(-?\d+)", self.text[self.pos :])
        if not m:
            raise UnitError(f"bad unit exponent in {self.text!r}")
        self.pos += m.end()
        if braced:
            if self._peek() != "}":
                raise UnitError(f"unterminated unit exponent in {self.text!r}")
            self.pos += 1
        return int(m.group(1))


def load_unit_table(lines: list[str]) -> UnitTable:
    """Parse the plain-text table: 'unit-id factor m kg s A K mol cd'."""
    entries: dict[str, tuple[float, tuple[int, ...]]] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 9:
            raise UnitError(f"unit table line {lineno}: expected 9 fields, got {len(parts)}")
        unit_id = parts[0]
        factor = float(parts[1])
        if factor <= 0:
            raise UnitError(f"unit table line {lineno}: factor must be > 0")
        dim = tuple(int(p) for p in parts[2:9])
        entries[unit_id] = (factor, dim)
    return UnitTable(entries)


def load_unit_table_file(path: str) -> UnitTable:
    with open(path, encoding="utf-8") as fh:
        return load_unit_table(fh.readlines())


def default_unit_table() -> UnitTable:
    text = resources.files("stepgrade.data").joinpath("units.txt").read_text("utf-8")
    return load_unit_table(text.splitlines())
