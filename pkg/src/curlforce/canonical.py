"""The two permissible canonical transformations.

Type 1 is an affine change of position with the contragredient momentum map;
type 2 shifts momentum by a curl-free field of position. Both act on any
:class:`~curlforce.hamiltonian.Body` by composing Taylor jets, so they apply
equally to closed-form and ODE-defined Hamiltonians.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotCurlFree, OrderExceeded, SingularN
from .expr import Expr, parse, variable_names
from .hamiltonian import (
    SINGULAR_CUTOFF,
    Body,
    HamiltonianSpec,
    momentum_of_velocity,
    relative_det,
)
from .jet import Jet, compose_taylor, embed


@dataclass(frozen=True)
class Type1Transform:
    """x -> N x + b, p -> N^{-T} p."""

    N: np.ndarray
    b: np.ndarray = None

    def __post_init__(self):
        N = np.atleast_2d(np.asarray(self.N, dtype=float))
        if N.shape[0] != N.shape[1]:
            raise SingularN(f"N must be square, got {N.shape}")
        if relative_det(N) < SINGULAR_CUTOFF:
            raise SingularN("N is singular")
        b = np.zeros(N.shape[0]) if self.b is None else np.atleast_1d(np.asarray(self.b, float))
        if b.shape != (N.shape[0],):
            raise DimensionMismatch("b must match N's dimension")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.N.shape[0]

    def forward(self, x, p):
        return self.N @ x + self.b, np.linalg.solve(self.N.T, p)

    def inverse(self, x_new, p_new):
        return np.linalg.solve(self.N, x_new - self.b), self.N.T @ p_new


class ExprField:
    """A vector field V(x) given by one expression per component."""

    def __init__(self, components, n: int):
        allowed = set(variable_names(n)[:n])
        self.exprs = [
            c if isinstance(c, Expr) else parse(str(c), allowed=allowed) for c in components
        ]
        if len(self.exprs) != n:
            raise DimensionMismatch(f"need {n} components, got {len(self.exprs)}")
        self.n = n
        self.names = variable_names(n)[:n]

    def jets(self, x, order: int) -> list[Jet]:
        env = dict(zip(self.names, Jet.seeds(x, order)))
        out = []
        for e in self.exprs:
            v = e.evaluate(env)
            out.append(v if isinstance(v, Jet) else Jet.constant(v, self.n, order))
        return out


class MomentumField:
    """``sign * u(x)`` where u(x) is the momentum giving velocity ``v0`` at x.

    Jets beyond the value come from chord iterations on the implicit equation
    d_p H(x, u(x)) = v0; each sweep fixes one more Taylor order. H's jets stop
    at order 3, so u is available to order 2.
    """

    def __init__(self, H: HamiltonianSpec, v0, sign: float = -1.0, anchor=None):
        self.H = H
        self.n = H.n
        self.v0 = np.atleast_1d(np.asarray(v0, dtype=float))
        self.sign = sign
        self.anchor = anchor

    def momentum(self, x) -> np.ndarray:
        guess = None if self.anchor is None else np.asarray(self.anchor[1], float)
        return momentum_of_velocity(self.H, np.asarray(x, float), self.v0, guess=guess)

    def jets(self, x, order: int) -> list[Jet]:
        if order > 2:
            raise OrderExceeded("a Newton-defined momentum field has jets up to order 2")
        n = self.n
        x = np.asarray(x, dtype=float)
        u0 = self.momentum(x)
        hj = self.H.body.jet(np.concatenate([x, u0]), order + 1)
        dp = [hj.diff(n + i) for i in range(n)]
        g_inv = np.linalg.inv(hj.hessian()[n:, n:])
        xs = Jet.seeds(x, order)
        u = [Jet.constant(c, n, order) for c in u0]
        for _ in range(order):
            residual = [compose_taylor(d, xs + u) - self.v0[i] for i, d in enumerate(dp)]
            u = [
                u[a] - sum((g_inv[a, b] * residual[b] for b in range(n)), Jet(n, order))
                for a in range(n)
            ]
        return [self.sign * c for c in u]


@dataclass(frozen=True)
class Type2Transform:
    """x -> x, p -> p + V(x) with d_i V_j symmetric."""

    field: object

    @classmethod
    def from_exprs(cls, components, n: int) -> "Type2Transform":
        return cls(ExprField(components, n))

    @property
    def n(self):
        return self.field.n

    def values(self, x) -> np.ndarray:
        return np.array([j.value for j in self.field.jets(np.asarray(x, float), 1)])

    def jacobian(self, x) -> np.ndarray:
        """J[i, j] = d_i V_j."""
        jets = self.field.jets(np.asarray(x, float), 1)
        return np.array([j.gradient() for j in jets]).T


class Type1Body(Body):
    def __init__(self, inner: Body, T: Type1Transform):
        self.inner = inner
        self.T = T
        self.n = T.n

    def jet(self, z, order):
        n = self.n
        x, p = self.T.inverse(z[:n], z[n:])
        outer = self.inner.jet(np.concatenate([x, p]), order)
        seeds = Jet.seeds(z, order)
        Ninv = np.linalg.inv(self.T.N)
        inputs = []
        for i in range(n):
            acc = Jet.constant(-(Ninv[i] @ self.T.b), 2 * n, order)
            for j in range(n):
                if Ninv[i, j]:
                    acc = acc + Ninv[i, j] * seeds[j]
            inputs.append(acc)
        for i in range(n):
            acc = Jet(2 * n, order)
            for j in range(n):
                if self.T.N[j, i]:
                    acc = acc + self.T.N[j, i] * seeds[n + j]
            inputs.append(acc)
        return compose_taylor(outer, inputs)

    def value(self, z):
        n = self.n
        x, p = self.T.inverse(z[:n], z[n:])
        return self.inner.value(np.concatenate([x, p]))


class Type2Body(Body):
    def __init__(self, inner: Body, T: Type2Transform):
        self.inner = inner
        self.T = T
        self.n = T.n

    def jet(self, z, order):
        n = self.n
        x = np.asarray(z[:n], float)
        V = self.T.field.jets(x, order)
        seeds = Jet.seeds(z, order)
        V_full = [embed(v, list(range(n)), 2 * n) for v in V]
        p = np.asarray(z[n:], float) - np.array([v.value for v in V])
        outer = self.inner.jet(np.concatenate([x, p]), order)
        inputs = seeds[:n] + [seeds[n + i] - V_full[i] for i in range(n)]
        return compose_taylor(outer, inputs)

    def value(self, z):
        n = self.n
        x = np.asarray(z[:n], float)
        V = np.array([j.value for j in self.T.field.jets(x, 1)])
        return self.inner.value(np.concatenate([x, z[n:] - V]))


def _image_box(box, T: Type1Transform):
    box = np.array(box)
    out = []
    for i in range(T.n):
        lo = hi = T.b[i]
        for j in range(T.n):
            a = T.N[i, j]
            if a == 0.0:
                continue
            ends = (a * box[j, 0], a * box[j, 1])
            lo += min(ends)
            hi += max(ends)
        out.append((lo, hi))
    return out


def apply_type1(H: HamiltonianSpec, T: Type1Transform) -> HamiltonianSpec:
    """H~(x~, p~) = H(N^{-1}(x~ - b), N^T p~); the domain becomes the bounding box of its image."""
    if T.n != H.n:
        raise DimensionMismatch("transform and Hamiltonian dimensions differ")
    domain = [_image_box(box, T) for box in H.domain]
    return HamiltonianSpec(H.n, Type1Body(H.body, T), domain, H.label, dict(H.meta))


def _sample_points(H: HamiltonianSpec, per_axis: int = 3):
    box = H.bounding_box
    lo = np.maximum(box[:, 0], -10.0)
    hi = np.minimum(box[:, 1], 10.0)
    span = hi - lo
    axes = [np.linspace(l + 0.1 * s, h - 0.1 * s, per_axis) for l, h, s in zip(lo, hi, span)]
    return [np.array(x) for x in itertools.product(*axes) if H.contains(np.array(x))]


def check_curl_free(T: Type2Transform, points, tol: float = 1e-10) -> float:
    worst = 0.0
    for x in points:
        J = T.jacobian(x)
        scale = max(1.0, float(np.max(np.abs(J))))
        worst = max(worst, float(np.max(np.abs(J - J.T))) / scale)
    if worst > tol:
        raise NotCurlFree(f"d_i V_j is not symmetric (asymmetry {worst:.3g})")
    return worst


def apply_type2(H: HamiltonianSpec, T: Type2Transform, check: bool = True) -> HamiltonianSpec:
    """H~(x, p~) = H(x, p~ - V(x)); the force is unchanged pointwise."""
    if T.n != H.n:
        raise DimensionMismatch("transform and Hamiltonian dimensions differ")
    if check:
        check_curl_free(T, _sample_points(H))
    return HamiltonianSpec(H.n, Type2Body(H.body, T), H.domain, H.label, dict(H.meta))


def shift_to_zero_momentum(H: HamiltonianSpec, v0, anchor=None, check: bool = True):
    """Type 2 shift after which velocity ``v0`` corresponds to zero momentum.

    Returns ``(H~, T)`` with ``T.field`` equal to ``-u(x)``, u(x) being the
    original momentum with velocity v0. Curl-freeness of u is verified on a
    sample grid; a violation means H is not velocity-independent.
    """
    T = Type2Transform(MomentumField(H, v0, sign=-1.0, anchor=anchor))
    if check:
        check_curl_free(T, _sample_points(H), tol=1e-7)
    return HamiltonianSpec(H.n, Type2Body(H.body, T), H.domain, H.label, dict(H.meta)), T
