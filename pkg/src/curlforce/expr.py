"""Analytic expression trees, their text grammar, and jet evaluation.

Grammar (whitespace-insensitive)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('+' | '-') unary | power
    power := atom (('^' | '**') unary)?
    atom  := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Variables are ``x1..xn``, ``p1..pn`` and ``t``; univariate family inputs use
``s``. ``pi`` and ``e`` are constants.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, DomainError, ParseError
from .jet import Jet, compose_taylor
from .quadrature import adaptive_simpson

_VAR_RE = re.compile(r"^(x|p)([1-9][0-9]*)$")


def variable_names(n: int, time: bool = False) -> list[str]:
    """Canonical phase-space ordering ``x1..xn, p1..pn[, t]``."""
    names = [f"x{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)]
    if time:
        names.append("t")
    return names


class Expr:
    """Base node. Subclasses are immutable."""

    def evaluate(self, env: dict):
        raise NotImplementedError

    def diff(self, var: str) -> "Expr":
        raise NotImplementedError

    def substitute(self, mapping: dict) -> "Expr":
        raise NotImplementedError

    def free_vars(self) -> frozenset:
        raise NotImplementedError

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0.0

    # operator sugar so builders read like formulas
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __neg__(self):
        return neg(self)

    def __pow__(self, other):
        return Pow(self, as_expr(other))


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: float

    def evaluate(self, env):
        return self.value

    def diff(self, var):
        return ZERO

    def substitute(self, mapping):
        return self

    def free_vars(self):
        return frozenset()

    def __str__(self):
        v = self.value
        text = repr(v) if not v.is_integer() else str(int(v))
        return f"({text})" if v < 0 else text


ZERO = Const(0.0)
ONE = Const(1.0)


@dataclass(frozen=True, eq=False)
class Var(Expr):
    name: str

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise DimensionMismatch(f"no value supplied for variable {self.name!r}") from None

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def substitute(self, mapping):
        return as_expr(mapping[self.name]) if self.name in mapping else self

    def free_vars(self):
        return frozenset([self.name])

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=False)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, env):
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if not isinstance(b, Jet) and b == 0.0:
            raise DomainError("division by zero")
        return a / b

    def diff(self, var):
        a, b = self.left, self.right
        da, db = a.diff(var), b.diff(var)
        if self.op == "+":
            return add(da, db)
        if self.op == "-":
            return sub(da, db)
        if self.op == "*":
            return add(mul(da, b), mul(a, db))
        return div(sub(mul(da, b), mul(a, db)), mul(b, b))

    def substitute(self, mapping):
        return Binary(self.op, self.left.substitute(mapping), self.right.substitute(mapping))

    def free_vars(self):
        return self.left.free_vars() | self.right.free_vars()

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True, eq=False)
class Neg(Expr):
    arg: Expr

    def evaluate(self, env):
        return -self.arg.evaluate(env)

    def diff(self, var):
        return neg(self.arg.diff(var))

    def substitute(self, mapping):
        return Neg(self.arg.substitute(mapping))

    def free_vars(self):
        return self.arg.free_vars()

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True, eq=False)
class Pow(Expr):
    base: Expr
    exponent: Expr

    def evaluate(self, env):
        a = self.base.evaluate(env)
        if isinstance(self.exponent, Const):
            c = self.exponent.value
            if isinstance(a, Jet):
                return a.power(c)
            if a < 0 and not float(c).is_integer():
                raise DomainError(f"non-integer power {c} of negative value {a}")
            if a == 0 and c < 0:
                raise DomainError("negative power of zero")
            return float(a) ** c
        b = self.exponent.evaluate(env)
        if isinstance(a, Jet) or isinstance(b, Jet):
            if not isinstance(a, Jet):
                if a <= 0:
                    raise DomainError("variable exponent needs a positive base")
                return (b * math.log(a)).exp()
            return a**b
        if a <= 0:
            raise DomainError("variable exponent needs a positive base")
        return a**b

    def diff(self, var):
        if isinstance(self.exponent, Const):
            c = self.exponent.value
            if c == 0.0:
                return ZERO
            return mul(mul(Const(c), Pow(self.base, Const(c - 1))), self.base.diff(var))
        # d(a^b) = a^b (b' log a + b a'/a)
        return mul(
            self,
            add(
                mul(self.exponent.diff(var), Func("log", self.base)),
                div(mul(self.exponent, self.base.diff(var)), self.base),
            ),
        )

    def substitute(self, mapping):
        return Pow(self.base.substitute(mapping), self.exponent.substitute(mapping))

    def free_vars(self):
        return self.base.free_vars() | self.exponent.free_vars()

    def __str__(self):
        return f"({self.base} ^ {self.exponent})"


def _float_fn(name):
    def fn(a):
        try:
            if name == "log" and a <= 0:
                raise DomainError(f"log of non-positive value {a}")
            if name == "sqrt" and a < 0:
                raise DomainError(f"sqrt of negative value {a}")
            return getattr(math, name)(a)
        except OverflowError as exc:
            raise DomainError(f"{name} overflowed at {a}") from exc

    return fn


FUNCTIONS = {
    name: _float_fn(name)
    for name in ("exp", "log", "sqrt", "sinh", "cosh", "tanh", "asinh", "sin", "cos")
}


@dataclass(frozen=True, eq=False)
class Func(Expr):
    name: str
    arg: Expr

    def evaluate(self, env):
        a = self.arg.evaluate(env)
        if isinstance(a, Jet):
            return getattr(a, self.name)()
        return FUNCTIONS[self.name](a)

    def diff(self, var):
        u = self.arg
        du = u.diff(var)
        if du.is_zero():
            return ZERO
        name = self.name
        if name == "exp":
            outer = self
        elif name == "log":
            outer = div(ONE, u)
        elif name == "sqrt":
            outer = div(Const(0.5), self)
        elif name == "sinh":
            outer = Func("cosh", u)
        elif name == "cosh":
            outer = Func("sinh", u)
        elif name == "tanh":
            outer = sub(ONE, mul(self, self))
        elif name == "asinh":
            outer = div(ONE, Func("sqrt", add(ONE, mul(u, u))))
        elif name == "sin":
            outer = Func("cos", u)
        else:
            outer = neg(Func("sin", u))
        return mul(outer, du)

    def substitute(self, mapping):
        return Func(self.name, self.arg.substitute(mapping))

    def free_vars(self):
        return self.arg.free_vars()

    def __str__(self):
        return f"{self.name}({self.arg})"


@dataclass(frozen=True, eq=False)
class Special(Expr):
    """A univariate analytic function given numerically.

    ``derivs(a, k)`` returns ``[f(a), f'(a), ..., f^(k)(a)]``. Used for
    functions defined by integrals that have no closed form in the grammar.
    """

    name: str
    arg: Expr
    derivs: Callable = field(repr=False)

    def evaluate(self, env):
        a = self.arg.evaluate(env)
        if isinstance(a, Jet):
            return a.compose(self.derivs(a.value, a.order))
        return self.derivs(float(a), 0)[0]

    def diff(self, var):
        raise TypeError(f"{self.name} has no symbolic derivative")

    def substitute(self, mapping):
        return Special(self.name, self.arg.substitute(mapping), self.derivs)

    def free_vars(self):
        return self.arg.free_vars()

    def __str__(self):
        return f"{self.name}({self.arg})"


@dataclass(frozen=True, eq=False)
class Integral(Expr):
    """``int_0^{var} body(var := s) ds``; ``body`` is written in terms of ``var``."""

    body: Expr
    var: str
    tol: float = 1e-10

    def free_vars(self):
        return self.body.free_vars() | {self.var}

    def substitute(self, mapping):
        if self.var in mapping:
            target = mapping[self.var]
            if not isinstance(target, Var):
                raise TypeError("the integration variable can only be renamed")
        return Integral(self.body.substitute(mapping), (
            mapping[self.var].name if self.var in mapping else self.var), self.tol)

    def diff(self, var):
        if var == self.var:
            return self.body
        inner = self.body.diff(var)
        return ZERO if inner.is_zero() else Integral(inner, self.var, self.tol)

    def __str__(self):
        return f"integral0({self.body}, {self.var})"

    def evaluate(self, env):
        names = sorted(self.free_vars())
        base = {}
        jets = []
        for name in names:
            v = env[name] if name in env else Var(name).evaluate(env)
            if isinstance(v, Jet):
                base[name] = v.value
                jets.append(v)
            else:
                base[name] = float(v)
                jets.append(v)
        upper = base[self.var]
        if not any(isinstance(j, Jet) for j in jets):
            def integrand(s):
                local = dict(base)
                local[self.var] = s
                return self.body.evaluate(local)

            return float(adaptive_simpson(integrand, 0.0, upper, self.tol))

        template = next(j for j in jets if isinstance(j, Jet))
        order = template.order
        q = names.index(self.var)
        point = np.array([base[nm] for nm in names])
        seeds = Jet.seeds(point, order)
        phi = Jet(len(names), order)
        idx = phi.indices
        free_slots = [k for k, a in enumerate(idx) if a[q] == 0]

        def integrand(s):
            local = dict(zip(names, seeds))
            local[self.var] = Jet.constant(s, len(names), order)
            val = self.body.evaluate(local)
            if not isinstance(val, Jet):
                out = np.zeros(len(free_slots))
                out[0] = val
                return out
            return val.coeffs[free_slots]

        phi.coeffs[free_slots] = adaptive_simpson(integrand, 0.0, upper, self.tol)
        at_top = self.body.evaluate(dict(zip(names, seeds)))
        if not isinstance(at_top, Jet):
            at_top = Jet.constant(at_top, len(names), order)
        for k, a in enumerate(idx):
            if a[q] >= 1:
                lowered = list(a)
                lowered[q] -= 1
                phi.coeffs[k] = at_top.coeff(lowered) / a[q]
        inputs = [
            j if isinstance(j, Jet) else Jet.constant(j, template.num_vars, order)
            for j in jets
        ]
        return compose_taylor(phi, inputs)


# smart constructors fold trivial constants only ---------------------------------


def add(a: Expr, b: Expr) -> Expr:
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if b.is_zero():
        return a
    if a.is_zero():
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if a.is_zero() or b.is_zero():
        return ZERO
    if isinstance(a, Const) and a.value == 1.0:
        return b
    if isinstance(b, Const) and b.value == 1.0:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if a.is_zero() and not (isinstance(b, Const) and b.value == 0.0):
        return ZERO
    if isinstance(b, Const) and b.value == 1.0:
        return a
    return Binary("/", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


# parsing ------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)
_CONSTANTS = {"pi": math.pi, "e": math.e}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        while True:
            m = _TOKEN_RE.match(text, pos)
            if not m or m.end() == pos:
                rest = text[pos:]
                if rest.strip() == "":
                    break
                bad = pos + (len(rest) - len(rest.lstrip()))
                self._fail(f"unexpected character {text[bad]!r}", bad)
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.k = 0

    def _location(self, offset):
        line = self.text.count("\n", 0, offset) + 1
        col = offset - (self.text.rfind("\n", 0, offset) + 1) + 1
        return line, col

    def _fail(self, message, offset):
        line, col = self._location(offset)
        raise ParseError(message, line, col)

    def peek(self):
        return self.tokens[self.k]

    def take(self, value=None):
        tok = self.tokens[self.k]
        if value is not None and tok[1] != value:
            found = tok[1] or "end of input"
            self._fail(f"expected {value!r}, found {found!r}", tok[2])
        self.k += 1
        return tok

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self._fail(f"unexpected {tok[1]!r}", tok[2])
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            e = Binary(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            e = Binary(op, e, self.unary())
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self):
        kind, value, offset = self.peek()
        if kind == "num":
            self.take()
            return Const(float(value))
        if kind == "name":
            self.take()
            if self.peek()[1] == "(":
                if value not in FUNCTIONS:
                    self._fail(f"unknown function {value!r}", offset)
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Func(value, arg)
            if value in _CONSTANTS:
                return Const(_CONSTANTS[value])
            if _VAR_RE.match(value) or value in ("t", "s"):
                return Var(value)
            self._fail(f"unknown name {value!r}", offset)
        if value == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        self._fail(f"unexpected {value or 'end of input'!r}", offset)


def parse(text: str, dimension: int | None = None, allowed=None) -> Expr:
    """Parse expression text.

    ``dimension`` bounds the ``x``/``p`` indices; ``allowed`` (a set of names)
    restricts the variables outright.
    """
    if not isinstance(text, str):
        return as_expr(text)
    e = _Parser(text).parse()
    for name in sorted(e.free_vars()):
        m = _VAR_RE.match(name)
        if dimension is not None and m and int(m.group(2)) > dimension:
            raise DimensionMismatch(f"variable {name!r} exceeds dimension {dimension}")
        if allowed is not None and name not in allowed:
            raise ParseError(f"variable {name!r} is not allowed here (allowed: {sorted(allowed)})")
    return e


def lift(e: Expr, point, order: int, variables=None) -> Jet:
    """Jet of ``e`` at ``point``; ``variables`` names the coordinates of ``point``.

    Defaults to the sorted free variables of ``e``.
    """
    if variables is None:
        variables = sorted(e.free_vars()) or ["s"]
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if point.size != len(variables):
        raise DimensionMismatch(f"point has {point.size} entries for {len(variables)} variables")
    missing = e.free_vars() - set(variables)
    if missing:
        raise DimensionMismatch(f"expression uses undeclared variables {sorted(missing)}")
    env = dict(zip(variables, Jet.seeds(point, order)))
    out = e.evaluate(env)
    if not isinstance(out, Jet):
        out = Jet.constant(out, len(variables), order)
    return out


def evaluate(e: Expr, point, variables) -> float:
    env = dict(zip(variables, (float(v) for v in np.atleast_1d(point))))
    return float(e.evaluate(env))
