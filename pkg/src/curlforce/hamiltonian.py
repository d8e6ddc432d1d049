"""Hamiltonians on D x R^n and the objects derived from them.

Phase-space jets are taken in the canonical variable order ``(x1..xn, p1..pn)``.
Everything here is a pure function of immutable inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DomainError, NoConvergence, SingularMetric
from .expr import Expr, evaluate, lift, parse, variable_names
from .jet import Jet

SINGULAR_CUTOFF = 1e-12


class Body:
    """Anything that can produce phase-space jets of a scalar H."""

    n: int

    def jet(self, z: np.ndarray, order: int) -> Jet:
        raise NotImplementedError

    def value(self, z: np.ndarray) -> float:
        return self.jet(z, 0).value


class ExprBody(Body):
    def __init__(self, expr: Expr, n: int, time: bool = False):
        self.expr = expr
        self.n = n
        self.variables = variable_names(n, time)
        extra = expr.free_vars() - set(self.variables)
        if extra:
            raise DimensionMismatch(f"expression uses {sorted(extra)} outside dimension {n}")

    def jet(self, z, order):
        return lift(self.expr, z, order, self.variables)

    def value(self, z):
        return evaluate(self.expr, z, self.variables)

    def __str__(self):
        return str(self.expr)


def _normalise_domain(domain, n):
    if domain is None:
        return ((tuple((-np.inf, np.inf) for _ in range(n))),)
    boxes = np.asarray(domain, dtype=float)
    if boxes.ndim == 2:
        boxes = boxes[None]
    if boxes.shape[1:] != (n, 2):
        raise DimensionMismatch(f"domain boxes must have shape (k, {n}, 2), got {boxes.shape}")
    if np.any(boxes[..., 0] >= boxes[..., 1]):
        raise ValueError("each domain interval needs low < high")
    return tuple(tuple((float(lo), float(hi)) for lo, hi in box) for box in boxes)


@dataclass(frozen=True)
class HamiltonianSpec:
    """A regular Hamiltonian on a finite union of open boxes D times R^n.

    ``domain`` is a tuple of boxes, each a tuple of ``(low, high)`` per
    coordinate. Regularity is not enforced here; :func:`curlforce.verify.check_regular`
    samples it.
    """

    n: int
    body: Body
    domain: tuple = None
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise DimensionMismatch("dimension must be at least 1")
        object.__setattr__(self, "domain", _normalise_domain(self.domain, self.n))

    @classmethod
    def from_expr(cls, text, n: int, domain=None, label: str = "") -> "HamiltonianSpec":
        e = parse(text, dimension=n) if isinstance(text, str) else text
        return cls(n, ExprBody(e, n), domain, label)

    @property
    def expr(self) -> Expr | None:
        return getattr(self.body, "expr", None)

    @property
    def bounding_box(self) -> np.ndarray:
        boxes = np.array(self.domain)
        return np.stack([boxes[..., 0].min(axis=0), boxes[..., 1].max(axis=0)], axis=1)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        for box in self.domain:
            b = np.array(box)
            if np.all(x > b[:, 0]) and np.all(x < b[:, 1]):
                return True
        return False

    def with_domain(self, domain) -> "HamiltonianSpec":
        return HamiltonianSpec(self.n, self.body, domain, self.label, self.meta)


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if x.shape != p.shape or x.ndim != 1:
            raise DimensionMismatch(f"x and p must be equal-length vectors, got {x.shape}, {p.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])


@dataclass(frozen=True)
class StatePoint:
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if x.shape != v.shape or x.ndim != 1:
            raise DimensionMismatch("x and v must be equal-length vectors")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class MetricSample:
    upper: np.ndarray
    lower: np.ndarray
    condition_number: float


def as_point(pt) -> PhasePoint:
    if isinstance(pt, PhasePoint):
        return pt
    x, p = pt
    return PhasePoint(x, p)


def phase_jet(H: HamiltonianSpec, pt, order: int) -> Jet:
    """Jet of H in ``(x, p)`` at ``pt`` after checking the point lies in D."""
    pt = as_point(pt)
    if pt.x.size != H.n:
        raise DimensionMismatch(f"point has dimension {pt.x.size}, Hamiltonian has {H.n}")
    if not H.contains(pt.x):
        raise DomainError(f"x = {pt.x} lies outside the domain")
    return H.body.jet(pt.z, order)


def split_derivatives(j: Jet, n: int):
    """Gradient and Hessian blocks: (H_x, H_p, H_xp, H_pp) with H_xp[k, i] = d_xk d_pi H."""
    grad = j.gradient()
    hess = j.hessian()
    return grad[:n], grad[n:], hess[:n, n:], hess[n:, n:]


def force_from_jet(j: Jet, n: int) -> np.ndarray:
    hx, hp, hxp, hpp = split_derivatives(j, n)
    return hxp.T @ hp - hpp @ hx


def relative_det(upper: np.ndarray) -> float:
    norms = np.prod(np.linalg.norm(upper, axis=1))
    if norms == 0.0 or not np.isfinite(norms):
        return 0.0
    return abs(float(np.linalg.det(upper))) / norms


def metric_from_upper(upper: np.ndarray) -> MetricSample:
    if relative_det(upper) < SINGULAR_CUTOFF:
        raise SingularMetric(f"momentum Hessian is singular: det = {np.linalg.det(upper):.3g}")
    lower = np.linalg.inv(upper)
    return MetricSample(upper, lower, float(np.linalg.cond(upper)))


def poisson_bracket(f: Jet, g: Jet, n: int) -> Jet:
    """{f, g} = d_x f . d_p g - d_x g . d_p f on jets over ``(x, p[, t])``.

    The result has order ``min(f.order, g.order) - 1``.
    """
    order = min(f.order, g.order)
    f, g = f.truncate(order), g.truncate(order)
    out = None
    for k in range(n):
        term = f.diff(k) * g.diff(n + k) - g.diff(k) * f.diff(n + k)
        out = term if out is None else out + term
    return out


# public operations ---------------------------------------------------------------


def energy(H: HamiltonianSpec, pt) -> float:
    pt = as_point(pt)
    if not H.contains(pt.x):
        raise DomainError(f"x = {pt.x} lies outside the domain")
    return float(H.body.value(pt.z))


def velocity(H: HamiltonianSpec, pt) -> np.ndarray:
    """v = dH/dp."""
    return phase_jet(H, pt, 1).gradient()[H.n :]


def force(H: HamiltonianSpec, pt) -> np.ndarray:
    """F^i = {d^i H, H}, the acceleration at ``pt``."""
    return force_from_jet(phase_jet(H, pt, 2), H.n)


def metric(H: HamiltonianSpec, pt) -> MetricSample:
    """g^ij = d^ij H and its inverse g_ij."""
    j = phase_jet(H, pt, 2)
    return metric_from_upper(j.hessian()[H.n :, H.n :])


def momentum_of_velocity(H: HamiltonianSpec, x, v, guess=None, max_iter: int = 100) -> np.ndarray:
    """Invert the p -> v map at fixed x by damped Newton iteration."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if x.size != H.n or v.size != H.n:
        raise DimensionMismatch("x and v must have the Hamiltonian's dimension")
    p = np.zeros(H.n) if guess is None else np.array(guess, dtype=float)
    target = 1e-10 * (1.0 + np.linalg.norm(v))

    def residual_and_jacobian(p):
        j = phase_jet(H, (x, p), 2)
        return j.gradient()[H.n :] - v, j.hessian()[H.n :, H.n :]

    r, J = residual_and_jacobian(p)
    norm = np.linalg.norm(r)
    for _ in range(max_iter):
        if norm <= target:
            return p
        if relative_det(J) < SINGULAR_CUTOFF:
            raise SingularMetric(f"singular momentum Hessian at p = {p}")
        step = np.linalg.solve(J, -r)
        lam = 1.0
        for _ in range(40):
            trial = p + lam * step
            try:
                r_t = phase_jet(H, (x, trial), 1).gradient()[H.n :] - v
            except (DomainError, OverflowError, FloatingPointError):
                r_t = None
            if r_t is not None and np.all(np.isfinite(r_t)) and np.linalg.norm(r_t) < norm:
                break
            lam *= 0.5
        else:
            raise NoConvergence(f"line search stalled at p = {p}, residual {norm:.3g}")
        p = trial
        r, J = residual_and_jacobian(p)
        norm = np.linalg.norm(r)
    if norm <= target:
        return p
    raise NoConvergence(f"no convergence after {max_iter} iterations, residual {norm:.3g}")
