"""Tiny recursive-descent parser for polynomial literals on the command line.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "·" | "/")? unary)*  # juxtaposition multiplies
    unary  := ("+" | "-") unary | power
    power  := atom (("^" | "**") INT)?
    atom   := NUMBER ["i" | "j"] | "i" | "j" | VAR | "(" expr ")"
    VAR    := "z" | "z" DIGITS                    # z means z1 when d = 1

Division is only by constants.  Examples: ``(1+z)^2``, ``z1^2 + z2^2``,
``(0.5-2i) z1 z2^3``, ``1 + z/2``.
"""
from __future__ import annotations

import re

from .space_core import Poly

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)(?P<imag>[ij](?![A-Za-z0-9]))?"
    r"|(?P<var>z\d*)|(?P<unit>[ij])(?![A-Za-z0-9])|(?P<op>\*\*|[-+*/·^()]))"
)


class PolySyntaxError(ValueError):
    pass


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PolySyntaxError(f"unexpected character {text[pos]!r} at {pos} in {text!r}")
        pos = m.end()
        if m.group("num") is not None:
            tokens.append(("imag" if m.group("imag") else "num", m.group("num")))
        elif m.group("var") is not None:
            tokens.append(("var", m.group("var")))
        elif m.group("unit") is not None:
            tokens.append(("imag", "1"))
        else:
            tokens.append(("op", m.group("op")))
    return tokens


class _Parser:
    def __init__(self, text: str, d: int):
        self.text = text
        self.d = d
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, op: str) -> None:
        kind, val = self.take()
        if (kind, val) != ("op", op):
            raise PolySyntaxError(f"expected {op!r} in {self.text!r}")

    def parse(self) -> Poly:
        if not self.tokens:
            raise PolySyntaxError("empty polynomial")
        out = self.expr()
        if self.i != len(self.tokens):
            raise PolySyntaxError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return out

    def expr(self) -> Poly:
        out = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            _, op = self.take()
            rhs = self.term()
            out = out + rhs if op == "+" else out - rhs
        return out

    def _starts_atom(self) -> bool:
        kind, val = self.peek()
        return kind in ("num", "imag", "var") or (kind, val) == ("op", "(")

    def term(self) -> Poly:
        out = self.unary()
        while True:
            if self.peek() in (("op", "*"), ("op", "·")):
                self.take()
                out = out * self.unary()
            elif self.peek() == ("op", "/"):
                self.take()
                den = self.unary()
                if den.degree > 0 or den.is_zero():
                    raise PolySyntaxError(f"can only divide by a nonzero constant in {self.text!r}")
                out = out / den.coefficient((0,) * self.d)
            elif self._starts_atom():
                out = out * self.power()
            else:
                return out

    def unary(self) -> Poly:
        if self.peek() == ("op", "-"):
            self.take()
            return -self.unary()
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Poly:
        base = self.atom()
        if self.peek() in (("op", "^"), ("op", "**")):
            self.take()
            kind, val = self.take()
            if kind != "num" or not val.isdigit():
                raise PolySyntaxError(f"exponent must be a non-negative integer in {self.text!r}")
            return base ** int(val)
        return base

    def atom(self) -> Poly:
        kind, val = self.take()
        if kind == "num":
            return Poly.constant(self.d, _number(val))
        if kind == "imag":
            return Poly.constant(self.d, 1j * _number(val))
        if kind == "var":
            if val == "z":
                if self.d != 1:
                    raise PolySyntaxError(f"bare 'z' is ambiguous with d={self.d}; use z1..z{self.d}")
                k = 1
            else:
                k = int(val[1:])
            if not 1 <= k <= self.d:
                raise PolySyntaxError(f"variable {val} outside z1..z{self.d}")
            return Poly.variable(self.d, k - 1)
        if (kind, val) == ("op", "("):
            out = self.expr()
            self.expect(")")
            return out
        raise PolySyntaxError(f"unexpected token {val!r} in {self.text!r}")


def _number(text: str) -> float | int:
    return int(text) if text.isdigit() else float(text)


def parse_poly(text: str, d: int = 1) -> Poly:
    return _Parser(text, d).parse()
