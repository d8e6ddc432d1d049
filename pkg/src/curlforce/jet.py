"""Truncated multivariate Taylor jets.

A :class:`Jet` stores the Taylor coefficients ``d^a f(z0) / a!`` of a scalar
function for every multi-index ``a`` of total degree at most ``order``.
Arithmetic on jets propagates these coefficients exactly, so evaluating an
expression on seeded jets yields its partial derivatives without finite
differencing.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, DomainError, OrderExceeded

MAX_ORDER = 3


class _Table:
    """Index bookkeeping for one (num_vars, order) pair."""

    def __init__(self, num_vars: int, order: int):
        self.num_vars = num_vars
        self.order = order
        indices = []
        for degree in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(num_vars), degree):
                alpha = [0] * num_vars
                for v in combo:
                    alpha[v] += 1
                indices.append(tuple(alpha))
        self.indices = indices
        self.position = {a: k for k, a in enumerate(indices)}
        self.size = len(indices)
        self.degree = np.array([sum(a) for a in indices])
        self.factorial = np.array(
            [math.prod(math.factorial(ai) for ai in a) for a in indices], dtype=float
        )

        left, right, target = [], [], []
        for i, a in enumerate(indices):
            for j, b in enumerate(indices):
                if self.degree[i] + self.degree[j] <= order:
                    left.append(i)
                    right.append(j)
                    target.append(self.position[tuple(x + y for x, y in zip(a, b))])
        self.mul_left = np.array(left, dtype=np.intp)
        self.mul_right = np.array(right, dtype=np.intp)
        self.mul_target = np.array(target, dtype=np.intp)


@lru_cache(maxsize=None)
def table(num_vars: int, order: int) -> _Table:
    if num_vars < 1:
        raise DimensionMismatch("a jet needs at least one variable")
    if not 0 <= order <= MAX_ORDER:
        raise OrderExceeded(f"jet order must lie in 0..{MAX_ORDER}, got {order}")
    return _Table(num_vars, order)


def num_coefficients(num_vars: int, order: int) -> int:
    return math.comb(num_vars + order, order)


class Jet:
    """Truncated Taylor expansion of a scalar at a point.

    Jets combine with plain numbers freely; combining two jets requires the
    same ``num_vars`` and ``order`` (use :meth:`truncate` to align orders).
    """

    __slots__ = ("num_vars", "order", "coeffs", "_t")
    __array_priority__ = 1000

    def __init__(self, num_vars: int, order: int, coeffs=None):
        t = table(num_vars, order)
        self.num_vars = num_vars
        self.order = order
        self._t = t
        if coeffs is None:
            self.coeffs = np.zeros(t.size)
        else:
            c = np.asarray(coeffs, dtype=float)
            if c.shape != (t.size,):
                raise DimensionMismatch(
                    f"expected {t.size} coefficients for ({num_vars}, {order}), got {c.shape}"
                )
            self.coeffs = c

    # construction -----------------------------------------------------------

    @classmethod
    def constant(cls, value: float, num_vars: int, order: int) -> "Jet":
        j = cls(num_vars, order)
        j.coeffs[0] = value
        return j

    @classmethod
    def variable(cls, value: float, index: int, num_vars: int, order: int) -> "Jet":
        """The seed jet of coordinate ``index`` at ``value``."""
        if not 0 <= index < num_vars:
            raise DimensionMismatch(f"variable index {index} outside 0..{num_vars - 1}")
        j = cls.constant(value, num_vars, order)
        if order >= 1:
            alpha = [0] * num_vars
            alpha[index] = 1
            j.coeffs[j._t.position[tuple(alpha)]] = 1.0
        return j

    @classmethod
    def seeds(cls, point, order: int) -> list["Jet"]:
        point = np.asarray(point, dtype=float)
        n = point.size
        return [cls.variable(v, i, n, order) for i, v in enumerate(point)]

    # access -------------------------------------------------------------------

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return self._t.indices

    def coeff(self, multi_index) -> float:
        multi_index = tuple(int(a) for a in multi_index)
        if len(multi_index) != self.num_vars:
            raise DimensionMismatch("multi-index length does not match num_vars")
        if sum(multi_index) > self.order:
            raise OrderExceeded(f"|{multi_index}| exceeds jet order {self.order}")
        return float(self.coeffs[self._t.position[multi_index]])

    def partial(self, multi_index) -> float:
        """The raw partial derivative ``a! * coeff(a)``."""
        multi_index = tuple(int(a) for a in multi_index)
        c = self.coeff(multi_index)
        return c * math.prod(math.factorial(a) for a in multi_index)

    def gradient(self) -> np.ndarray:
        if self.order < 1:
            raise OrderExceeded("gradient needs order >= 1")
        return self.coeffs[1 : 1 + self.num_vars].copy()

    def hessian(self) -> np.ndarray:
        if self.order < 2:
            raise OrderExceeded("hessian needs order >= 2")
        n = self.num_vars
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                alpha = [0] * n
                alpha[i] += 1
                alpha[j] += 1
                out[i, j] = out[j, i] = self.partial(alpha)
        return out

    def third(self) -> np.ndarray:
        if self.order < 3:
            raise OrderExceeded("third derivatives need order >= 3")
        n = self.num_vars
        out = np.empty((n, n, n))
        for i, j, k in itertools.combinations_with_replacement(range(n), 3):
            alpha = [0] * n
            for v in (i, j, k):
                alpha[v] += 1
            val = self.partial(alpha)
            for perm in set(itertools.permutations((i, j, k))):
                out[perm] = val
        return out

    # structural ops -------------------------------------------------------------

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise OrderExceeded(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.num_vars, order, self.coeffs[: num_coefficients(self.num_vars, order)])

    def diff(self, var: int) -> "Jet":
        """Jet of the partial derivative in ``var``; the order drops by one."""
        if self.order < 1:
            raise OrderExceeded("cannot differentiate an order-0 jet")
        lower = table(self.num_vars, self.order - 1)
        out = np.empty(lower.size)
        for k, alpha in enumerate(lower.indices):
            raised = list(alpha)
            raised[var] += 1
            out[k] = raised[var] * self.coeffs[self._t.position[tuple(raised)]]
        return Jet(self.num_vars, self.order - 1, out)

    def _check(self, other: "Jet"):
        if other.num_vars != self.num_vars:
            raise DimensionMismatch(
                f"jets over {self.num_vars} and {other.num_vars} variables cannot be combined"
            )
        if other.order != self.order:
            raise DimensionMismatch(
                f"jets of order {self.order} and {other.order} cannot be combined"
            )

    def _new(self, coeffs) -> "Jet":
        j = Jet.__new__(Jet)
        j.num_vars = self.num_vars
        j.order = self.order
        j._t = self._t
        j.coeffs = coeffs
        return j

    # arithmetic -------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return self._new(self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[0] += other
        return self._new(c)

    __radd__ = __add__

    def __neg__(self):
        return self._new(-self.coeffs)

    def __sub__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return self._new(self.coeffs - other.coeffs)
        c = self.coeffs.copy()
        c[0] -= other
        return self._new(c)

    def __rsub__(self, other):
        c = -self.coeffs
        c[0] += other
        return self._new(c)

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            t = self._t
            prod = self.coeffs[t.mul_left] * other.coeffs[t.mul_right]
            return self._new(np.bincount(t.mul_target, weights=prod, minlength=t.size))
        return self._new(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self._new(self.coeffs / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return (self.log() * exponent).exp()
        return self.power(exponent)

    def __repr__(self):
        return f"Jet(num_vars={self.num_vars}, order={self.order}, value={self.value:.6g})"

    # univariate composition ---------------------------------------------------

    def compose(self, derivs) -> "Jet":
        """Compose an analytic univariate f with this jet.

        ``derivs[m]`` is the m-th derivative of f at ``self.value``; entries
        beyond ``self.order`` are ignored.
        """
        delta = self.coeffs.copy()
        delta[0] = 0.0
        delta = self._new(delta)
        out = np.zeros_like(self.coeffs)
        out[0] = derivs[0]
        power = None
        for m in range(1, self.order + 1):
            power = delta if power is None else power * delta
            out += (derivs[m] / math.factorial(m)) * power.coeffs
        return self._new(out)

    def reciprocal(self) -> "Jet":
        a = self.value
        if a == 0.0:
            raise DomainError("division by a jet with zero value")
        return self.compose([1 / a, -1 / a**2, 2 / a**3, -6 / a**4])

    def power(self, c: float) -> "Jet":
        c = float(c)
        if c.is_integer() and c >= 0:
            k = int(c)
            result = Jet.constant(1.0, self.num_vars, self.order)
            base = self
            while k:
                if k & 1:
                    result = result * base
                k >>= 1
                if k:
                    base = base * base
            return result
        a = self.value
        if c.is_integer():
            return self.power(-c).reciprocal()
        if a <= 0.0:
            raise DomainError(f"non-integer power {c} of non-positive value {a}")
        derivs = [a**c]
        coef = 1.0
        for m in range(1, 4):
            coef *= c - (m - 1)
            derivs.append(coef * a ** (c - m))
        return self.compose(derivs)

    def exp(self) -> "Jet":
        e = math.exp(self.value)
        return self.compose([e, e, e, e])

    def log(self) -> "Jet":
        a = self.value
        if a <= 0.0:
            raise DomainError(f"log of non-positive value {a}")
        return self.compose([math.log(a), 1 / a, -1 / a**2, 2 / a**3])

    def sqrt(self) -> "Jet":
        a = self.value
        if a <= 0.0:
            raise DomainError(f"sqrt is not analytic at {a}")
        s = math.sqrt(a)
        return self.compose([s, 0.5 / s, -0.25 / (a * s), 0.375 / (a * a * s)])

    def sinh(self) -> "Jet":
        s, c = math.sinh(self.value), math.cosh(self.value)
        return self.compose([s, c, s, c])

    def cosh(self) -> "Jet":
        s, c = math.sinh(self.value), math.cosh(self.value)
        return self.compose([c, s, c, s])

    def tanh(self) -> "Jet":
        t = math.tanh(self.value)
        d1 = 1 - t * t
        return self.compose([t, d1, -2 * t * d1, d1 * (6 * t * t - 2)])

    def asinh(self) -> "Jet":
        a = self.value
        q = 1 + a * a
        return self.compose(
            [math.asinh(a), q**-0.5, -a * q**-1.5, (2 * a * a - 1) * q**-2.5]
        )

    def sin(self) -> "Jet":
        s, c = math.sin(self.value), math.cos(self.value)
        return self.compose([s, c, -s, -c])

    def cos(self) -> "Jet":
        s, c = math.sin(self.value), math.cos(self.value)
        return self.compose([c, -s, -c, s])


def compose_taylor(poly: Jet, inputs: list[Jet]) -> Jet:
    """Substitute jets into the Taylor polynomial of ``poly``.

    ``poly`` is the jet of g at the point ``(inputs[i].value)``; the result is
    the jet of ``g(inputs)`` in the variables of ``inputs``.
    """
    if len(inputs) != poly.num_vars:
        raise DimensionMismatch(f"expected {poly.num_vars} inputs, got {len(inputs)}")
    first = inputs[0]
    order = first.order
    if poly.order < order:
        raise OrderExceeded(f"outer jet order {poly.order} below requested {order}")
    deltas = []
    for j in inputs:
        d = j.coeffs.copy()
        d[0] = 0.0
        deltas.append(Jet(first.num_vars, order, d))
    powers = []
    for d in deltas:
        pw = [None, d]
        for _ in range(2, order + 1):
            pw.append(pw[-1] * d)
        powers.append(pw)
    out = np.zeros(table(first.num_vars, order).size)
    for k, alpha in enumerate(poly.indices):
        if sum(alpha) > order:
            break
        c = poly.coeffs[k]
        if c == 0.0:
            continue
        term = None
        for v, a in enumerate(alpha):
            if a:
                term = powers[v][a] if term is None else term * powers[v][a]
        if term is None:
            out[0] += c
        else:
            out += c * term.coeffs
    return Jet(first.num_vars, order, out)


def embed(j: Jet, mapping, num_vars: int) -> Jet:
    """Re-index a jet into a larger variable set; ``mapping[i]`` is the new slot of var i."""
    out = Jet(num_vars, j.order)
    for k, alpha in enumerate(j.indices):
        beta = [0] * num_vars
        for i, a in enumerate(alpha):
            beta[mapping[i]] += a
        out.coeffs[out._t.position[tuple(beta)]] += j.coeffs[k]
    return out
