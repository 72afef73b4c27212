"""A tiny expression language for radius profiles and center-curve coordinates.

Grammar (whitespace-insensitive; the only variable is ``s``)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" unary ] ;          (* right-associative *)
    atom    = number | "s" | func "(" expr ")" | "(" expr ")" ;
    func    = "sin" | "cos" | "sinh" | "cosh" | "exp" | "ln" | "sqrt" ;
    number  = digits [ "." [ digits ] ] [ exponent ] | "." digits [ exponent ] ;
    exponent = ("e" | "E") [ "+" | "-" ] digits ;

Expressions are evaluated on :class:`~canalqc.numkit.Jet` values, which makes
every derivative exact.
"""

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from canalqc.errors import EvaluationError, ParseError
from canalqc.numkit import Jet

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "exp", "ln", "sqrt")
VARIABLE = "s"


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = VARIABLE


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _byte_offset(source, pos):
    return len(source[:pos].encode("utf-8"))


def _tokenize(source):
    tokens = []
    pos = 0
    while True:
        while pos < len(source) and source[pos].isspace():
            pos += 1
        if pos >= len(source):
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(source, start)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(source, len(source))))
    return tokens


class _Parser:
    def __init__(self, source):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, text, off = self.take()
        if kind != "op" or text != op:
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {op!r}, found {found}", off)

    def parse(self):
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text == VARIABLE:
                return Var()
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            raise ParseError(f"unknown identifier {text!r}", off)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"expected a number, 's', a function or '(', found {found}", off)


def parse(source):
    """Parse ``source`` into an immutable expression tree; raises ParseError."""
    return _Parser(source).parse()


def pretty(e):
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return VARIABLE
    if isinstance(e, Neg):
        return f"(-{pretty(e.operand)})"
    if isinstance(e, BinOp):
        return f"({pretty(e.left)} {e.op} {pretty(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({pretty(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def has_variable(e):
    if isinstance(e, Var):
        return True
    if isinstance(e, Num):
        return False
    if isinstance(e, Neg):
        return has_variable(e.operand)
    if isinstance(e, BinOp):
        return has_variable(e.left) or has_variable(e.right)
    return has_variable(e.arg)


def _as_int_exponent(e, x):
    if has_variable(e):
        return None
    v = float(evaluate(e, Jet.constant(0.0, x.nvars, 0)).value)
    return int(v) if v.is_integer() and abs(v) < 2**31 else None


def evaluate(e, x):
    """Evaluate ``e`` with ``s`` bound to the jet ``x``."""
    if isinstance(e, Num):
        return Jet.constant(e.value, x.nvars, x.order)
    if isinstance(e, Var):
        return x
    if isinstance(e, Neg):
        return -evaluate(e.operand, x)
    if isinstance(e, BinOp):
        a = evaluate(e.left, x)
        if e.op == "^":
            p = _as_int_exponent(e.right, x)
            if p is not None:
                if p < 0 and np.any(a.value == 0):
                    raise EvaluationError("zero raised to a negative power", pretty(e))
                return a**p
            if np.any(a.value <= 0):
                raise EvaluationError("non-integer power of a non-positive base", pretty(e))
            return (evaluate(e.right, x) * a.log()).exp()
        b = evaluate(e.right, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if np.any(b.value == 0):
            raise EvaluationError("division by zero", pretty(e))
        return a / b
    if isinstance(e, Call):
        a = evaluate(e.arg, x)
        v = a.value
        if e.func == "ln" and np.any(v <= 0):
            raise EvaluationError("ln of a non-positive value", pretty(e))
        if e.func == "sqrt":
            if np.any(v < 0):
                raise EvaluationError("sqrt of a negative value", pretty(e))
            if np.any(v == 0):
                if a.order == 0:
                    return a
                raise EvaluationError("sqrt is not differentiable at 0", pretty(e))
        return getattr(a, "log" if e.func == "ln" else e.func)()
    raise TypeError(f"not an expression node: {e!r}")


def eval_jet(e, s0, order=3):
    """Univariate jet of ``e`` at ``s0``."""
    return evaluate(e, Jet.variable(0, float(s0), 1, order))


def eval_float(e, s0):
    return float(evaluate(e, Jet.constant(float(s0), 1, 0)).value)


def jet_derivatives(j):
    """(f, f', f'', ...) from a univariate jet."""
    return tuple(float(c) * math.factorial(k) for k, c in enumerate(j.coeffs))


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class ProfileSpec:
    source: str
    compiled: Expr
    domain: tuple

    @classmethod
    def from_source(cls, source, domain):
        lo, hi = (float(domain[0]), float(domain[1]))
        if not lo <= hi:
            raise ValueError(f"empty domain [{lo}, {hi}]")
        return cls(source, parse(source), (lo, hi))

    def jet(self, s0, order=3):
        return eval_jet(self.compiled, s0, order)

    def __call__(self, s0):
        return eval_float(self.compiled, s0)


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    kind: str
    samples: tuple
    first_violation: tuple = None  # (s, message)

    @property
    def message(self):
        if self.valid:
            return "ok"
        s, msg = self.first_violation
        return f"{msg} at s={s:.17g}"


def chebyshev_points(lo, hi, samples):
    """Chebyshev-Lobatto points on [lo, hi] in ascending order (endpoints included)."""
    k = np.arange(samples)
    x = -np.cos(np.pi * k / (samples - 1))
    pts = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
    pts[0], pts[-1] = lo, hi
    return pts


_RADIUS_RULES = {
    "elliptic": ("R'^2 > 1", lambda r, rp: rp * rp > 1.0),
    "hyperbolic": (None, lambda r, rp: True),
    "parabolic": ("R' != 0", lambda r, rp: rp != 0.0),
    "euclidean": ("R'^2 < 1", lambda r, rp: rp * rp < 1.0),
}


def validate_profile(p, kind, samples=16):
    """Check the kind-specific radius inequalities at Chebyshev samples of the domain."""
    if samples < 2:
        raise ValueError("need at least two samples")
    if kind not in _RADIUS_RULES:
        raise ValueError(f"unknown canal kind {kind!r}")
    label, rule = _RADIUS_RULES[kind]
    pts = chebyshev_points(p.domain[0], p.domain[1], samples)
    for s in pts:
        try:
            r, rp = jet_derivatives(p.jet(s, order=1))
        except EvaluationError as exc:
            return ValidationReport(False, kind, tuple(pts), (float(s), str(exc)))
        if not r > 0:
            return ValidationReport(False, kind, tuple(pts), (float(s), f"R > 0 violated (R={r:.6g})"))
        if not rule(r, rp):
            return ValidationReport(
                False, kind, tuple(pts), (float(s), f"{label} violated (R'={rp:.6g})")
            )
    return ValidationReport(True, kind, tuple(pts))
