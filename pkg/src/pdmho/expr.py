"""Scalar expressions in one variable ``x`` with exact first derivatives.

Grammar (lowest to highest precedence)::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | NAME | NAME '(' sum ')' | '(' sum ')'

``x`` is the variable; any other bare name is a parameter that must be bound
at evaluation time. Derivatives come from forward-mode dual arithmetic. Duals
nest, so ``Dual(Dual(x, 1), Dual(1, 0))`` yields second derivatives too.

>>> e = parse("1/(1+lambda*x^2)")
>>> evaluate(e, 2.0, {"lambda": 1.0})
0.2
>>> eval_dual(parse("x^2"), 3.0, {})
DualValue(value=9.0, derivative=6.0)
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Union

import numpy as np

FUNCTIONS = ("exp", "ln", "sqrt", "sin", "cos", "sinh", "cosh", "asinh", "abs")


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprDomainError(ExprError):
    def __init__(self, message, x=None):
        if x is not None:
            message = f"{message} (at x={x!r})"
        super().__init__(message)
        self.x = x


class UnboundParameterError(ExprError):
    def __init__(self, name):
        super().__init__(f"parameter {name!r} is not bound")
        self.name = name


# --------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Num, Var, Param, Neg, BinOp, Call]

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def parameters(e: Expression) -> set[str]:
    if isinstance(e, Param):
        return {e.name}
    if isinstance(e, (Neg, Call)):
        return parameters(e.arg)
    if isinstance(e, BinOp):
        return parameters(e.left) | parameters(e.right)
    return set()


def serialize(e: Expression) -> str:
    """Text that parses back to an equivalent tree."""
    return _ser(e, 0)


def _ser(e, outer):
    if isinstance(e, Num):
        v = float(e.value)
        text = str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
        return f"({text})" if e.value < 0 else text
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({_ser(e.arg, 0)})"
    if isinstance(e, Neg):
        text = "-" + _ser(e.arg, 3)
        return f"({text})" if outer >= 3 else text
    prec = _PREC[e.op]
    if e.op == "^":
        text = f"{_ser(e.left, prec + 1)}^{_ser(e.right, 3)}"
    else:
        # left-associative: the right operand needs strictly higher binding
        text = f"{_ser(e.left, prec)}{e.op}{_ser(e.right, prec + 1)}"
    return f"({text})" if prec < outer else text


# ------------------------------------------------------------------ parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.take()
        if val != value:
            if value == ")":
                raise ExprSyntaxError("unbalanced parentheses: expected ')'", off)
            raise ExprSyntaxError(f"expected {value!r}", off)

    def parse(self):
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0)
        node = self.sum()
        kind, val, off = self.peek()
        if kind != "end":
            if val == ")":
                raise ExprSyntaxError("unbalanced parentheses: unmatched ')'", off)
            raise ExprSyntaxError(f"unexpected token {val!r}", off)
        return node

    def sum(self):
        node = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.product())
        return node

    def product(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {val!r}", off)
                self.take()
                arg = self.sum()
                self.expect(")")
                return Call(val, arg)
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val!r} needs an argument", off)
            return Var() if val == "x" else Param(val)
        if val == "(":
            node = self.sum()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of expression", off)
        raise ExprSyntaxError(f"unexpected token {val!r}", off)


def parse(text: str) -> Expression:
    return _Parser(text).parse()


# -------------------------------------------------------------- dual numbers


class Dual:
    """Forward-mode dual number; components may be floats, arrays or Duals."""

    __slots__ = ("v", "d")

    def __init__(self, v, d):
        self.v = v
        self.d = d

    def __repr__(self):
        return f"Dual({self.v!r}, {self.d!r})"

    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.v + o.v, self.d + o.d)
        return Dual(self.v + o, self.d)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.v - o.v, self.d - o.d)
        return Dual(self.v - o, self.d)

    def __rsub__(self, o):
        return Dual(o - self.v, -self.d)

    def __neg__(self):
        return Dual(-self.v, -self.d)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.v * o.v, self.d * o.v + self.v * o.d)
        return Dual(self.v * o, self.d * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            return Dual(self.v / o.v, (self.d * o.v - self.v * o.d) / (o.v * o.v))
        return Dual(self.v / o, self.d / o)

    def __rtruediv__(self, o):
        return Dual(o / self.v, -o * self.d / (self.v * self.v))


class DualValue(NamedTuple):
    value: float
    derivative: float


def primal(a):
    while isinstance(a, Dual):
        a = a.v
    return a


def _exp(a):
    if isinstance(a, Dual):
        ea = _exp(a.v)
        return Dual(ea, ea * a.d)
    return np.exp(a)


def _ln(a):
    if isinstance(a, Dual):
        return Dual(_ln(a.v), a.d / a.v)
    return np.log(a)


def _sqrt(a):
    if isinstance(a, Dual):
        s = _sqrt(a.v)
        return Dual(s, a.d / (2.0 * s))
    return np.sqrt(a)


def _sin(a):
    if isinstance(a, Dual):
        return Dual(_sin(a.v), _cos(a.v) * a.d)
    return np.sin(a)


def _cos(a):
    if isinstance(a, Dual):
        return Dual(_cos(a.v), -_sin(a.v) * a.d)
    return np.cos(a)


def _sinh(a):
    if isinstance(a, Dual):
        return Dual(_sinh(a.v), _cosh(a.v) * a.d)
    return np.sinh(a)


def _cosh(a):
    if isinstance(a, Dual):
        return Dual(_cosh(a.v), _sinh(a.v) * a.d)
    return np.cosh(a)


def _asinh(a):
    if isinstance(a, Dual):
        return Dual(_asinh(a.v), a.d / _sqrt(a.v * a.v + 1.0))
    return np.arcsinh(a)


def _abs(a):
    if isinstance(a, Dual):
        return Dual(_abs(a.v), np.sign(primal(a.v)) * a.d)
    return np.abs(a)


def _ipow(a, k):
    """a**k for integer k, by repeated squaring so it works on Duals."""
    if k < 0:
        return 1.0 / _ipow(a, -k)
    result = 1.0
    base = a
    while k:
        if k & 1:
            result = base * result
        k >>= 1
        if k:
            base = base * base
    return result


def _rpow(a, c):
    """a**c for a constant real exponent c."""
    if isinstance(a, Dual):
        return Dual(_rpow(a.v, c), c * _rpow(a.v, c - 1.0) * a.d)
    return np.power(a, c)


_FUNCS = {
    "exp": _exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "sin": _sin,
    "cos": _cos,
    "sinh": _sinh,
    "cosh": _cosh,
    "asinh": _asinh,
    "abs": _abs,
}


def _first_bad(x, mask):
    xs = np.broadcast_to(np.asarray(primal(x), dtype=float), np.shape(mask))
    idx = np.flatnonzero(np.ravel(mask))
    if idx.size == 0:
        return None
    return float(np.ravel(xs)[idx[0]])


def _check(cond_bad, message, x):
    bad = np.asarray(cond_bad)
    if bad.any():
        raise ExprDomainError(message, _first_bad(x, bad))


def _is_const(v):
    return not isinstance(v, Dual)


def _eval(e, x, params):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x
    if isinstance(e, Param):
        try:
            return float(params[e.name])
        except KeyError:
            raise UnboundParameterError(e.name) from None
    if isinstance(e, Neg):
        return -_eval(e.arg, x, params)
    if isinstance(e, Call):
        a = _eval(e.arg, x, params)
        pa = np.asarray(primal(a))
        if e.func == "ln":
            _check(pa <= 0.0, "ln of a non-positive value", x)
        elif e.func == "sqrt":
            _check(pa < 0.0, "sqrt of a negative value", x)
            if isinstance(a, Dual):
                _check(pa == 0.0, "sqrt derivative is infinite at 0", x)
        elif e.func == "abs" and isinstance(a, Dual):
            _check(pa == 0.0, "abs is not differentiable at 0", x)
        return _FUNCS[e.func](a)
    left = _eval(e.left, x, params)
    right = _eval(e.right, x, params)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if e.op == "/":
        _check(np.asarray(primal(right)) == 0.0, "division by zero", x)
        return left / right
    return _power(left, right, x)


def _power(base, expo, x):
    pb = np.asarray(primal(base), dtype=float)
    if _is_const(expo):
        c = np.asarray(expo, dtype=float)
        if c.ndim == 0 and float(c).is_integer():
            k = int(c)
            if k < 0:
                _check(pb == 0.0, "zero raised to a negative power", x)
            return _ipow(base, k)
        _check(pb < 0.0, "negative base with non-integer exponent", x)
        if isinstance(base, Dual):
            # derivative carries base**(c-1)
            _check((pb == 0.0) & (c < 1.0), "zero base: derivative is infinite", x)
        else:
            _check((pb == 0.0) & (c < 0.0), "zero raised to a negative power", x)
        return _rpow(base, float(c) if c.ndim == 0 else c)
    _check(pb <= 0.0, "variable exponent needs a positive base", x)
    return _exp(expo * _ln(base))


def _finite(value, x):
    parts = [value]
    while parts:
        p = parts.pop()
        if isinstance(p, Dual):
            parts.extend((p.v, p.d))
            continue
        arr = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ExprDomainError("non-finite result (overflow)", _first_bad(x, ~np.isfinite(arr)))


def evaluate(e: Expression, x, params: Mapping[str, float] | None = None):
    """Value of ``e`` at ``x`` (float or array)."""
    params = params or {}
    with np.errstate(all="ignore"):
        out = _eval(e, x, params)
    out = np.broadcast_to(np.asarray(out, dtype=float), np.shape(primal(x))).copy()
    _finite(out, x)
    return float(out) if out.ndim == 0 else out


def eval_dual(e: Expression, x: float, params: Mapping[str, float] | None = None) -> DualValue:
    v, d = derivatives(e, x, params, order=1)
    return DualValue(float(v), float(d))


def derivatives(e: Expression, x, params: Mapping[str, float] | None = None, order: int = 1):
    """Tuple (f, f', ..., f^(order)) at ``x``; order is 1 or 2."""
    params = params or {}
    xs = np.asarray(x, dtype=float)
    ones, zeros = np.ones_like(xs), np.zeros_like(xs)
    if order == 1:
        seed = Dual(xs, ones)
    elif order == 2:
        seed = Dual(Dual(xs, ones), Dual(ones, zeros))
    else:
        raise ValueError("order must be 1 or 2")
    with np.errstate(all="ignore"):
        out = _eval(e, seed, params)
    _finite(out, xs)

    def full(a):
        return np.broadcast_to(np.asarray(a, dtype=float), xs.shape).copy()

    if not isinstance(out, Dual):
        out = Dual(full(out), zeros) if order == 1 else Dual(Dual(full(out), zeros), Dual(zeros, zeros))
    if order == 1:
        parts = (out.v, out.d)
    else:
        v = out.v if isinstance(out.v, Dual) else Dual(out.v, zeros)
        d = out.d if isinstance(out.d, Dual) else Dual(out.d, zeros)
        parts = (v.v, v.d, d.d)
    parts = tuple(full(p) for p in parts)
    if xs.ndim == 0:
        return tuple(float(p) for p in parts)
    return parts


# ------------------------------------------------------- scalar fast path
#
# Repeated scalar calls (the classical integrator) are dominated by numpy
# overhead in the generic evaluator, so Compiled also builds a tree of
# closures returning (value, derivative) pairs in plain float arithmetic.


def _scalar_fail(message, x):
    raise ExprDomainError(message, float(x))


def _scalar_node(e, params):
    if isinstance(e, Num):
        c = e.value
        return lambda x: (c, 0.0)
    if isinstance(e, Var):
        return lambda x: (x, 1.0)
    if isinstance(e, Param):
        c = float(params[e.name])
        return lambda x: (c, 0.0)
    if isinstance(e, Neg):
        f = _scalar_node(e.arg, params)

        def neg(x):
            v, d = f(x)
            return -v, -d

        return neg
    if isinstance(e, Call):
        return _scalar_call(e.func, _scalar_node(e.arg, params))
    fl, fr = _scalar_node(e.left, params), _scalar_node(e.right, params)
    if e.op == "+":
        def add(x):
            a, da = fl(x)
            b, db = fr(x)
            return a + b, da + db
        return add
    if e.op == "-":
        def sub(x):
            a, da = fl(x)
            b, db = fr(x)
            return a - b, da - db
        return sub
    if e.op == "*":
        def mul(x):
            a, da = fl(x)
            b, db = fr(x)
            return a * b, da * b + a * db
        return mul
    if e.op == "/":
        def div(x):
            a, da = fl(x)
            b, db = fr(x)
            if b == 0.0:
                _scalar_fail("division by zero", x)
            return a / b, (da * b - a * db) / (b * b)
        return div
    if "x" not in _names(e.right):
        return _scalar_const_power(fl, fr)

    def vpow(x):
        a, da = fl(x)
        b, db = fr(x)
        if a <= 0.0:
            _scalar_fail("variable exponent needs a positive base", x)
        la = math.log(a)
        v = math.exp(b * la)
        return v, v * (db * la + b * da / a)

    return vpow


def _names(e):
    if isinstance(e, Var):
        return {"x"}
    if isinstance(e, (Num, Param)):
        return set()
    if isinstance(e, Neg):
        return _names(e.arg)
    if isinstance(e, Call):
        return _names(e.arg)
    return _names(e.left) | _names(e.right)


def _scalar_const_power(fl, fr):
    def cpow(x):
        a, da = fl(x)
        c, _ = fr(x)
        if c.is_integer():
            k = int(c)
            if k == 0:
                return 1.0, 0.0
            if a == 0.0 and k < 0:
                _scalar_fail("zero raised to a negative power", x)
            if k == 1:
                return a, da
            am1 = a ** (k - 1)
            return am1 * a, k * am1 * da
        if a < 0.0:
            _scalar_fail("negative base with non-integer exponent", x)
        if a == 0.0 and c < 1.0:
            _scalar_fail("zero base: derivative is infinite", x)
        v = a ** c
        return v, (c * v / a * da) if a != 0.0 else 0.0
    return cpow


def _scalar_call(name, f):
    if name == "exp":
        def g(x):
            a, da = f(x)
            v = math.exp(a)
            return v, v * da
    elif name == "ln":
        def g(x):
            a, da = f(x)
            if a <= 0.0:
                _scalar_fail("ln of a non-positive value", x)
            return math.log(a), da / a
    elif name == "sqrt":
        def g(x):
            a, da = f(x)
            if a < 0.0:
                _scalar_fail("sqrt of a negative value", x)
            if a == 0.0:
                _scalar_fail("sqrt derivative is infinite at 0", x)
            s = math.sqrt(a)
            return s, da / (2.0 * s)
    elif name == "sin":
        def g(x):
            a, da = f(x)
            return math.sin(a), math.cos(a) * da
    elif name == "cos":
        def g(x):
            a, da = f(x)
            return math.cos(a), -math.sin(a) * da
    elif name == "sinh":
        def g(x):
            a, da = f(x)
            return math.sinh(a), math.cosh(a) * da
    elif name == "cosh":
        def g(x):
            a, da = f(x)
            return math.cosh(a), math.sinh(a) * da
    elif name == "asinh":
        def g(x):
            a, da = f(x)
            return math.asinh(a), da / math.sqrt(a * a + 1.0)
    else:
        def g(x):
            a, da = f(x)
            if a == 0.0:
                _scalar_fail("abs is not differentiable at 0", x)
            return abs(a), math.copysign(1.0, a) * da

    def guarded(x):
        try:
            v, d = g(x)
        except OverflowError:
            _scalar_fail("non-finite result (overflow)", x)
        return v, d

    return guarded


def _scalar_pair(fn, x):
    try:
        v, d = fn(x)
    except OverflowError:
        _scalar_fail("non-finite result (overflow)", x)
    except ZeroDivisionError:
        _scalar_fail("division by zero", x)
    if not (math.isfinite(v) and math.isfinite(d)):
        _scalar_fail("non-finite result (overflow)", x)
    return v, d


class Compiled:
    """An expression with bound parameters, callable on floats or arrays."""

    def __init__(self, e: Expression | str, params: Mapping[str, float] | None = None):
        self.expr = parse(e) if isinstance(e, str) else e
        self.params = dict(params or {})
        missing = parameters(self.expr) - set(self.params)
        if missing:
            raise UnboundParameterError(sorted(missing)[0])
        self._scalar = _scalar_node(self.expr, self.params)

    def __call__(self, x):
        if isinstance(x, float):
            return self._scalar_value(x)
        return evaluate(self.expr, x, self.params)

    def _scalar_value(self, x):
        # the generic path tolerates singular derivatives, so fall back to it
        try:
            return _scalar_pair(self._scalar, x)[0]
        except ExprDomainError:
            return evaluate(self.expr, x, self.params)

    def prime(self, x):
        if isinstance(x, float):
            return _scalar_pair(self._scalar, x)[1]
        return derivatives(self.expr, x, self.params, order=1)[1]

    def second(self, x):
        return derivatives(self.expr, x, self.params, order=2)[2]

    def __repr__(self):
        return f"Compiled({serialize(self.expr)!r}, {self.params!r})"


__all__ = [
    "BinOp",
    "Call",
    "Compiled",
    "Dual",
    "DualValue",
    "ExprDomainError",
    "ExprError",
    "ExprSyntaxError",
    "Expression",
    "Neg",
    "Num",
    "Param",
    "UnboundParameterError",
    "Var",
    "derivatives",
    "eval_dual",
    "evaluate",
    "parameters",
    "parse",
    "serialize",
]

