"""Closed-form expressions in the plane: parsing, exact partials, interval ranges.

An expression is a small AST over the variables ``x`` and ``y`` built from the
grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-'? power
    power  := atom ('^' integer)?
    atom   := number | 'x' | 'y' | 'pi' | func '(' expr ')' | '(' expr ')'

with ``func`` one of sin, cos, exp, tanh, sqrt, log.  Expressions are immutable
after parsing; evaluation, differentiation and range enclosure are pure, so
instances are safe to share between threads.

Interval enclosures use ordinary float arithmetic with a small relative outward
inflation after every operation rather than directed rounding; they are meant
for desk-scale verification, not formal certificates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Expression",
    "Interval",
    "ParseError",
    "EvalDomainError",
    "parse",
    "evaluate",
    "eval_with_partials",
    "differentiate",
    "range_bound",
    "partial_range",
]

FUNCTIONS = ("sin", "cos", "exp", "tanh", "sqrt", "log")

# Relative outward inflation applied after every interval operation.
INFLATE = 1e-12

_TWO_PI = 2.0 * math.pi


class ParseError(ValueError):
    """Syntax error with the byte offset where parsing failed."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at byte {position})")
        self.position = position


class EvalDomainError(ArithmeticError):
    """log of a non-positive value, sqrt of a negative value, or division by zero."""


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # 'x' or 'y'


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Bin:
    op: str  # one of '+', '-', '*', '/'
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Union[Const, Var, Neg, Bin, Pow, Call]


def _uses_y(node: Node) -> bool:
    match node:
        case Var(name):
            return name == "y"
        case Neg(a) | Call(_, a):
            return _uses_y(a)
        case Bin(_, a, b):
            return _uses_y(a) or _uses_y(b)
        case Pow(a, _):
            return _uses_y(a)
        case _:
            return False


@dataclass(frozen=True)
class Expression:
    """A parsed closed-form function of (x, y)."""

    root: Node
    source: str

    @property
    def uses_y(self) -> bool:
        return _uses_y(self.root)

    def __repr__(self) -> str:
        return f"Expression({self.source!r})"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_]+")
_INTEGER_RE = re.compile(r"\d+$")


class _Tokenizer:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self._skip_ws()

    def _skip_ws(self):
        while self.pos < len(self.source) and self.source[self.pos].isspace():
            self.pos += 1

    def peek(self):
        """Return (kind, text, pos) of the next token without consuming it."""
        if self.pos >= len(self.source):
            return ("eof", "", self.pos)
        ch = self.source[self.pos]
        if ch in "+-*/^()":
            return (ch, ch, self.pos)
        m = _NUMBER_RE.match(self.source, self.pos)
        if m:
            return ("number", m.group(), self.pos)
        m = _IDENT_RE.match(self.source, self.pos)
        if m:
            return ("ident", m.group(), self.pos)
        raise ParseError(f"unexpected character {ch!r}", self.pos)

    def next(self):
        tok = self.peek()
        self.pos += len(tok[1])
        self._skip_ws()
        return tok


def parse(source: str) -> Expression:
    """Parse `source` into an Expression, reporting errors with byte positions."""
    if not source or not source.strip():
        raise ParseError("empty expression", 0)
    tz = _Tokenizer(source)
    root = _parse_expr(tz)
    kind, text, pos = tz.peek()
    if kind != "eof":
        raise ParseError(f"expected operator or end of input, found {text!r}", pos)
    return Expression(root=root, source=source.strip())


def _parse_expr(tz: _Tokenizer) -> Node:
    node = _parse_term(tz)
    while tz.peek()[0] in ("+", "-"):
        op = tz.next()[0]
        node = Bin(op, node, _parse_term(tz))
    return node


def _parse_term(tz: _Tokenizer) -> Node:
    node = _parse_factor(tz)
    while tz.peek()[0] in ("*", "/"):
        op = tz.next()[0]
        node = Bin(op, node, _parse_factor(tz))
    return node


def _parse_factor(tz: _Tokenizer) -> Node:
    if tz.peek()[0] == "-":
        tz.next()
        return Neg(_parse_power(tz))
    return _parse_power(tz)


def _parse_power(tz: _Tokenizer) -> Node:
    node = _parse_atom(tz)
    if tz.peek()[0] == "^":
        tz.next()
        negate = False
        if tz.peek()[0] == "-":
            tz.next()
            negate = True
        kind, text, pos = tz.peek()
        if kind != "number":
            raise ParseError(f"expected integer exponent, found {text or 'end of input'!r}", pos)
        if not _INTEGER_RE.match(text):
            raise ParseError(f"non-integer exponent {text!r}", pos)
        tz.next()
        n = int(text)
        node = Pow(node, -n if negate else n)
    return node


def _parse_atom(tz: _Tokenizer) -> Node:
    kind, text, pos = tz.peek()
    if kind == "number":
        tz.next()
        return Const(float(text))
    if kind == "(":
        tz.next()
        node = _parse_expr(tz)
        kind, text, pos = tz.peek()
        if kind != ")":
            raise ParseError(f"expected ')', found {text or 'end of input'!r}", pos)
        tz.next()
        return node
    if kind == "ident":
        tz.next()
        if text in ("x", "y"):
            return Var(text)
        if text == "pi":
            return Const(math.pi)
        if text in FUNCTIONS:
            kind2, text2, pos2 = tz.peek()
            if kind2 != "(":
                raise ParseError(f"expected '(' after function {text!r}", pos2)
            tz.next()
            arg = _parse_expr(tz)
            kind2, text2, pos2 = tz.peek()
            if kind2 != ")":
                raise ParseError(f"expected ')', found {text2 or 'end of input'!r}", pos2)
            tz.next()
            return Call(text, arg)
        raise ParseError(f"unknown identifier {text!r}", pos)
    raise ParseError(f"expected number, variable, function or '(', found {text or 'end of input'!r}", pos)


# ---------------------------------------------------------------------------
# Unparsing (used for derivative expressions and error messages)
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "pow": 4, "atom": 5}


def _unparse(node: Node) -> tuple[str, int]:
    match node:
        case Const(v):
            if v < 0:
                return f"-{_fmt_const(-v)}", _PREC["neg"]
            return _fmt_const(v), _PREC["atom"]
        case Var(name):
            return name, _PREC["atom"]
        case Neg(a):
            s, p = _unparse(a)
            if p < _PREC["neg"]:
                s = f"({s})"
            return f"-{s}", _PREC["neg"]
        case Bin(op, a, b):
            sa, pa = _unparse(a)
            sb, pb = _unparse(b)
            prec = _PREC[op]
            if pa < prec:
                sa = f"({sa})"
            # right operand needs parens at equal precedence for '-', '/'
            if pb < prec or (pb == prec and op in ("-", "/")):
                sb = f"({sb})"
            return f"{sa} {op} {sb}", prec
        case Pow(a, n):
            sa, pa = _unparse(a)
            if pa < _PREC["atom"]:
                sa = f"({sa})"
            if n < 0:
                return f"{sa} ^ -{-n}", _PREC["pow"]
            return f"{sa} ^ {n}", _PREC["pow"]
        case Call(fn, a):
            sa, _ = _unparse(a)
            return f"{fn}({sa})", _PREC["atom"]
    raise TypeError(f"unknown node {node!r}")


def _fmt_const(v: float) -> str:
    if v == math.pi:
        return "pi"
    return format(v, ".17g")


def unparse(node: Node) -> str:
    return _unparse(node)[0]


# ---------------------------------------------------------------------------
# Point evaluation and forward-mode partials
# ---------------------------------------------------------------------------


def _eval(node: Node, x, y):
    match node:
        case Const(v):
            return v
        case Var(name):
            return x if name == "x" else y
        case Neg(a):
            return -_eval(a, x, y)
        case Bin("+", a, b):
            return _eval(a, x, y) + _eval(b, x, y)
        case Bin("-", a, b):
            return _eval(a, x, y) - _eval(b, x, y)
        case Bin("*", a, b):
            return _eval(a, x, y) * _eval(b, x, y)
        case Bin("/", a, b):
            vb = _eval(b, x, y)
            if np.any(vb == 0.0):
                raise EvalDomainError("division by zero")
            return _eval(a, x, y) / vb
        case Pow(a, n):
            va = _eval(a, x, y)
            if n < 0 and np.any(va == 0.0):
                raise EvalDomainError("zero raised to a negative power")
            return va ** n
        case Call(fn, a):
            va = _eval(a, x, y)
            if fn == "sin":
                return np.sin(va)
            if fn == "cos":
                return np.cos(va)
            if fn == "exp":
                return np.exp(va)
            if fn == "tanh":
                return np.tanh(va)
            if fn == "sqrt":
                if np.any(va < 0.0):
                    raise EvalDomainError("sqrt of a negative value")
                return np.sqrt(va)
            if fn == "log":
                if np.any(va <= 0.0):
                    raise EvalDomainError("log of a non-positive value")
                return np.log(va)
    raise TypeError(f"unknown node {node!r}")


def _ad(node: Node, x, y):
    """Forward-mode value and partials: returns (v, dv/dx, dv/dy)."""
    match node:
        case Const(v):
            return v, 0.0, 0.0
        case Var(name):
            if name == "x":
                return x, 1.0, 0.0
            return y, 0.0, 1.0
        case Neg(a):
            v, dx, dy = _ad(a, x, y)
            return -v, -dx, -dy
        case Bin(op, a, b):
            va, dax, day = _ad(a, x, y)
            vb, dbx, dby = _ad(b, x, y)
            if op == "+":
                return va + vb, dax + dbx, day + dby
            if op == "-":
                return va - vb, dax - dbx, day - dby
            if op == "*":
                return va * vb, dax * vb + va * dbx, day * vb + va * dby
            if np.any(vb == 0.0):
                raise EvalDomainError("division by zero")
            inv = 1.0 / vb
            v = va * inv
            return v, (dax - v * dbx) * inv, (day - v * dby) * inv
        case Pow(a, n):
            va, dax, day = _ad(a, x, y)
            if n == 0:
                return np.ones_like(va) if np.ndim(va) else 1.0, 0.0, 0.0
            if n < 0 and np.any(va == 0.0):
                raise EvalDomainError("zero raised to a negative power")
            v = va ** n
            if n == 1:
                return v, dax, day
            dbase = n * va ** (n - 1)
            return v, dbase * dax, dbase * day
        case Call(fn, a):
            va, dax, day = _ad(a, x, y)
            if fn == "sin":
                d = np.cos(va)
                return np.sin(va), d * dax, d * day
            if fn == "cos":
                d = -np.sin(va)
                return np.cos(va), d * dax, d * day
            if fn == "exp":
                v = np.exp(va)
                return v, v * dax, v * day
            if fn == "tanh":
                v = np.tanh(va)
                d = 1.0 - v * v
                return v, d * dax, d * day
            if fn == "sqrt":
                if np.any(va < 0.0):
                    raise EvalDomainError("sqrt of a negative value")
                v = np.sqrt(va)
                with np.errstate(divide="ignore", invalid="ignore"):
                    d = 0.5 / v
                return v, d * dax, d * day
            if fn == "log":
                if np.any(va <= 0.0):
                    raise EvalDomainError("log of a non-positive value")
                return np.log(va), dax / va, day / va
    raise TypeError(f"unknown node {node!r}")


def evaluate(e: Expression, x, y):
    """Evaluate e at (x, y).  Accepts scalars or numpy arrays (broadcast)."""
    with np.errstate(all="ignore"):
        v = _eval(e.root, x, y)
    if not np.all(np.isfinite(v)):
        raise EvalDomainError(f"non-finite value of {e.source!r}")
    return v


def eval_with_partials(e: Expression, x, y):
    """Return (value, d/dx, d/dy) of e at (x, y) by forward-mode differentiation."""
    with np.errstate(all="ignore"):
        v, dx, dy = _ad(e.root, x, y)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
        raise EvalDomainError(f"non-finite value or partial of {e.source!r}")
    return v, dx, dy


# ---------------------------------------------------------------------------
# Symbolic differentiation (feeds partial_range; point partials use _ad)
# ---------------------------------------------------------------------------


def _is_const(node: Node, value=None) -> bool:
    return isinstance(node, Const) and (value is None or node.value == value)


def _c(v: float) -> Node:
    return Const(float(v))


def _add_n(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return _c(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Bin("+", a, b)


def _sub_n(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return _c(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return Neg(b)
    return Bin("-", a, b)


def _mul_n(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return _c(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _c(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Bin("*", a, b)


def _div_n(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return _c(0.0)
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return _c(a.value / b.value)
    return Bin("/", a, b)


def _pow_n(a: Node, n: int) -> Node:
    if n == 0:
        return _c(1.0)
    if n == 1:
        return a
    if _is_const(a):
        return _c(a.value ** n)
    return Pow(a, n)


def _diff(node: Node, var: str) -> Node:
    match node:
        case Const(_):
            return _c(0.0)
        case Var(name):
            return _c(1.0) if name == var else _c(0.0)
        case Neg(a):
            d = _diff(a, var)
            return _c(-d.value) if _is_const(d) else Neg(d)
        case Bin("+", a, b):
            return _add_n(_diff(a, var), _diff(b, var))
        case Bin("-", a, b):
            return _sub_n(_diff(a, var), _diff(b, var))
        case Bin("*", a, b):
            return _add_n(_mul_n(_diff(a, var), b), _mul_n(a, _diff(b, var)))
        case Bin("/", a, b):
            num = _sub_n(_mul_n(_diff(a, var), b), _mul_n(a, _diff(b, var)))
            return _div_n(num, _pow_n(b, 2))
        case Pow(a, n):
            return _mul_n(_mul_n(_c(n), _pow_n(a, n - 1)), _diff(a, var))
        case Call(fn, a):
            da = _diff(a, var)
            if fn == "sin":
                return _mul_n(Call("cos", a), da)
            if fn == "cos":
                return _mul_n(Neg(Call("sin", a)), da)
            if fn == "exp":
                return _mul_n(Call("exp", a), da)
            if fn == "tanh":
                return _mul_n(_sub_n(_c(1.0), _pow_n(Call("tanh", a), 2)), da)
            if fn == "sqrt":
                return _div_n(da, _mul_n(_c(2.0), Call("sqrt", a)))
            if fn == "log":
                return _div_n(da, a)
    raise TypeError(f"unknown node {node!r}")


def differentiate(e: Expression, var: str) -> Expression:
    """Symbolic partial derivative of e with respect to 'x' or 'y'."""
    if var not in ("x", "y"):
        raise ValueError(f"var must be 'x' or 'y', got {var!r}")
    root = _diff(e.root, var)
    return Expression(root=root, source=unparse(root))


# ---------------------------------------------------------------------------
# Interval arithmetic and range enclosure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; enclosure operations never shrink the true range."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def contains_interval(self, other: "Interval", slack: float = 0.0) -> bool:
        return self.lo - slack <= other.lo and other.hi <= self.hi + slack

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def distance(self, other: "Interval") -> float:
        """Gap between the two intervals (0 if they touch or overlap)."""
        return max(0.0, other.lo - self.hi, self.lo - other.hi)

    def abs_bounds(self) -> tuple[float, float]:
        """(inf |v|, sup |v|) over v in the interval."""
        if self.lo <= 0.0 <= self.hi:
            return 0.0, max(abs(self.lo), abs(self.hi))
        return min(abs(self.lo), abs(self.hi)), max(abs(self.lo), abs(self.hi))

    def halves(self) -> tuple["Interval", "Interval"]:
        m = self.mid
        return Interval(self.lo, m), Interval(m, self.hi)


UNIT = Interval(0.0, 1.0)


def _out(lo: float, hi: float) -> tuple[float, float]:
    """Outward inflation; applied once per interval operation."""
    if math.isnan(lo) or math.isnan(hi):
        raise EvalDomainError("interval operation produced NaN")
    if math.isinf(lo) or math.isinf(hi):
        raise EvalDomainError("interval operation overflowed")
    d = INFLATE * max(abs(lo), abs(hi))
    return lo - d, hi + d


def _imul(a, b):
    p = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return _out(min(p), max(p))


def _ipow(a, n: int):
    lo, hi = a
    if n == 0:
        return (1.0, 1.0)
    if n < 0:
        if lo <= 0.0 <= hi:
            raise EvalDomainError("interval raised to a negative power contains zero")
        plo, phi = _ipow(a, -n)
        return _out(min(1.0 / plo, 1.0 / phi), max(1.0 / plo, 1.0 / phi))
    if n % 2 == 1 or lo >= 0.0:
        return _out(lo ** n, hi ** n)
    if hi <= 0.0:
        return _out(hi ** n, lo ** n)
    return _out(0.0, max(lo ** n, hi ** n))


def _contains_angle(lo: float, hi: float, angle: float) -> bool:
    k = math.ceil((lo - angle) / _TWO_PI)
    return angle + k * _TWO_PI <= hi


def _isin(a):
    lo, hi = a
    if hi - lo >= _TWO_PI:
        return (-1.0, 1.0)
    vlo, vhi = math.sin(lo), math.sin(hi)
    smax = 1.0 if _contains_angle(lo, hi, 0.5 * math.pi) else max(vlo, vhi)
    smin = -1.0 if _contains_angle(lo, hi, -0.5 * math.pi) else min(vlo, vhi)
    return _out(smin, smax)


def _irange(node: Node, bx, by):
    """(lo, hi) enclosing the range of `node` over the box bx × by."""
    match node:
        case Const(v):
            return (v, v)
        case Var(name):
            return bx if name == "x" else by
        case Neg(a):
            lo, hi = _irange(a, bx, by)
            return (-hi, -lo)
        case Bin("+", a, b):
            ra, rb = _irange(a, bx, by), _irange(b, bx, by)
            return _out(ra[0] + rb[0], ra[1] + rb[1])
        case Bin("-", a, b):
            ra, rb = _irange(a, bx, by), _irange(b, bx, by)
            return _out(ra[0] - rb[1], ra[1] - rb[0])
        case Bin("*", a, b):
            return _imul(_irange(a, bx, by), _irange(b, bx, by))
        case Bin("/", a, b):
            rb = _irange(b, bx, by)
            if rb[0] <= 0.0 <= rb[1]:
                raise EvalDomainError("interval division by an interval containing zero")
            return _imul(_irange(a, bx, by), (1.0 / rb[1], 1.0 / rb[0]))
        case Pow(a, n):
            return _ipow(_irange(a, bx, by), n)
        case Call(fn, a):
            ra = _irange(a, bx, by)
            if fn == "sin":
                return _isin(ra)
            if fn == "cos":
                return _isin((ra[0] + 0.5 * math.pi, ra[1] + 0.5 * math.pi))
            if fn == "exp":
                return _out(math.exp(ra[0]), math.exp(ra[1]))
            if fn == "tanh":
                return _out(math.tanh(ra[0]), math.tanh(ra[1]))
            if fn == "sqrt":
                lo, hi = ra
                if lo < 0.0:
                    # tolerate inflation-scale negative slop, reject real sign changes
                    if lo >= -1e-9 * max(1.0, abs(hi)):
                        lo = 0.0
                    else:
                        raise EvalDomainError("interval sqrt of a negative interval")
                return _out(math.sqrt(lo), math.sqrt(hi))
            if fn == "log":
                if ra[0] <= 0.0:
                    raise EvalDomainError("interval log touches a non-positive value")
                return _out(math.log(ra[0]), math.log(ra[1]))
    raise TypeError(f"unknown node {node!r}")


def range_bound(e: Expression, box: tuple[Interval, Interval], subdivision_depth: int = 0) -> Interval:
    """Interval enclosing {e(x, y) : (x, y) in box}.

    Each subdivision level bisects every axis the expression depends on and
    takes the hull of the sub-enclosures, so the width is non-increasing in
    `subdivision_depth`.
    """
    if subdivision_depth < 0:
        raise ValueError("subdivision_depth must be >= 0")
    bx, by = box
    split_x = True
    split_y = e.uses_y
    stack = [((bx.lo, bx.hi), (by.lo, by.hi), subdivision_depth)]
    lo = math.inf
    hi = -math.inf
    while stack:
        cbx, cby, d = stack.pop()
        if d <= 0:
            rlo, rhi = _irange(e.root, cbx, cby)
            lo = min(lo, rlo)
            hi = max(hi, rhi)
            continue
        mx = 0.5 * (cbx[0] + cbx[1])
        my = 0.5 * (cby[0] + cby[1])
        xs = [(cbx[0], mx), (mx, cbx[1])] if split_x else [cbx]
        ys = [(cby[0], my), (my, cby[1])] if split_y else [cby]
        for sx in xs:
            for sy in ys:
                stack.append((sx, sy, d - 1))
    return Interval(lo, hi)


def partial_range(e: Expression, var: str, box: tuple[Interval, Interval], subdivision_depth: int = 0) -> Interval:
    """range_bound applied to the symbolic derivative of e with respect to var."""
    return range_bound(differentiate(e, var), box, subdivision_depth)
