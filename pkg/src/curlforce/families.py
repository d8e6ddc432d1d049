"""Constructive builders for the Hamiltonian families.

Each builder returns a :class:`~curlforce.hamiltonian.HamiltonianSpec`. Closed
forms are assembled as expression trees; the 1D family is defined only through
its ODE in p and is evaluated by integrating jet-valued states.
"""
from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .errors import (
    DomainError,
    EtaNotRegular,
    NotDiffeomorphism,
    OdeFailure,
    PrincipalValueFailure,
    SignViolation,
    SingularM,
    VerificationFailure,
)
from .expr import Const, Expr, Integral, Special, Var, evaluate, lift, parse
from .hamiltonian import Body, HamiltonianSpec, force
from .jet import Jet, embed

log = logging.getLogger(__name__)

X1, X2, P1, P2 = Var("x1"), Var("x2"), Var("p1"), Var("p2")


def _expr(value, allowed) -> Expr:
    if isinstance(value, Expr):
        return value
    return parse(str(value), allowed=set(allowed))


def _finite_range(lo, hi, pad=10.0):
    return (max(lo, -pad), min(hi, pad))


# anisotropic quadratic ----------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticFamily:
    """H = 1/2 M^ij p_i p_j + U(x)."""

    M: np.ndarray
    U: Expr | str = "0"
    domain: object = None


def build_quadratic(fam: QuadraticFamily) -> HamiltonianSpec:
    M = np.atleast_2d(np.asarray(fam.M, dtype=float))
    n = M.shape[0]
    if M.shape != (n, n):
        raise SingularM(f"M must be square, got {M.shape}")
    if not np.allclose(M, M.T, atol=1e-12):
        raise SingularM("M must be symmetric")
    if abs(np.linalg.det(M)) <= 1e-12 * max(1.0, np.max(np.abs(M))) ** n:
        raise SingularM("M is singular")
    allowed = [f"x{i}" for i in range(1, n + 1)]
    U = _expr(fam.U, allowed)
    p = [Var(f"p{i}") for i in range(1, n + 1)]
    kinetic = Const(0.0)
    for i in range(n):
        for j in range(i, n):
            w = M[i, j] if i == j else 2 * M[i, j]
            if w != 0.0:
                kinetic = kinetic + Const(0.5 * w) * p[i] * p[j]
    spec = HamiltonianSpec(n, _body(kinetic + U, n), fam.domain, label="quadratic")
    spec.meta.update(family="quadratic", M=M)
    return spec


def _body(e, n):
    from .hamiltonian import ExprBody

    return ExprBody(e, n)


# the 1D family d_pp H = f(H) ---------------------------------------------------------------


@dataclass(frozen=True)
class OneDFamily:
    """``f`` is written in ``s`` (standing for H); ``H0`` in ``x1`` is H(x, 0)."""

    f: Expr | str
    H0: Expr | str
    domain: object = ((-5.0, 5.0),)


class OneDBody(Body):
    """H(x, p) from integrating d_pp H = f(H), H(x,0) = H0(x), d_p H(x,0) = 0.

    The state carries order-3 jets in x, so x-derivatives come out exactly
    (up to ODE tolerance) rather than by differencing. Solutions are cached
    per x with dense output over [0, +-p_max].
    """

    n = 1
    _ORDER = 3

    def __init__(self, f: Expr, H0: Expr, p_max: float, ode_tol: float, cache_size: int = 4096):
        self.f = f
        self.fprime = f.diff("s")
        self.H0 = H0
        self.p_max = float(p_max)
        self.ode_tol = float(ode_tol)
        self._cache = OrderedDict()
        self._cache_size = cache_size
        self._lock = threading.Lock()

    def _f_jet(self, coeffs):
        h = Jet(1, self._ORDER, coeffs)
        out = self.f.evaluate({"s": h})
        return out.coeffs if isinstance(out, Jet) else np.array([out, 0, 0, 0.0])

    def _solve(self, x: float, sign: int):
        key = (x, sign)
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        h0 = lift(self.H0, [x], self._ORDER, ["x1"]).coeffs
        f0 = self.f.evaluate({"s": h0[0]})
        if f0 == 0.0:
            raise SignViolation(f"f(H0(x)) vanishes at x = {x}")
        k = self._ORDER + 1

        def rhs(_p, y):
            return np.concatenate([y[k:], self._f_jet(y[:k])])

        def sign_change(_p, y):
            return self.f.evaluate({"s": y[0]})

        sign_change.terminal = True
        y0 = np.concatenate([h0, np.zeros(k)])
        try:
            sol = solve_ivp(
                rhs, (0.0, sign * self.p_max), y0, method="DOP853", dense_output=True,
                rtol=self.ode_tol, atol=self.ode_tol, events=sign_change,
            )
        except (DomainError, OverflowError, ValueError) as exc:
            raise OdeFailure(f"ODE in p failed at x = {x}: {exc}") from exc
        if sol.status == 1:
            raise SignViolation(f"f(H) changes sign at x = {x}, p = {sol.t_events[0][0]:.6g}")
        if sol.status != 0:
            raise OdeFailure(f"ODE in p failed at x = {x}: {sol.message}")
        with self._lock:
            self._cache[key] = sol.sol
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return sol.sol

    def jet(self, z, order):
        x, p = float(z[0]), float(z[1])
        if abs(p) > self.p_max:
            raise DomainError(f"|p| = {abs(p)} exceeds the tabulated range {self.p_max}")
        if p == 0.0:
            k = self._ORDER + 1
            y = np.concatenate([lift(self.H0, [x], self._ORDER, ["x1"]).coeffs, np.zeros(k)])
        else:
            y = self._solve(x, 1 if p > 0 else -1)(p)
        k = self._ORDER + 1
        h = Jet(1, self._ORDER, y[:k])
        hp = y[k:]
        fh = self.f.evaluate({"s": h})
        fh = fh.coeffs if isinstance(fh, Jet) else np.array([fh, 0, 0, 0.0])
        fph = self.fprime.evaluate({"s": h})
        fph = fph if isinstance(fph, Jet) else Jet.constant(fph, 1, self._ORDER)
        third = (fph * Jet(1, self._ORDER, hp)).coeffs
        out = Jet(2, order)
        for idx, (a, b) in enumerate(out.indices):
            if b == 0:
                c = y[a]
            elif b == 1:
                c = hp[a]
            elif b == 2:
                c = fh[a] / 2.0
            else:
                c = third[a] / 6.0
            out.coeffs[idx] = c
        return out

    def value(self, z):
        return self.jet(z, 0).value


def build_1d(fam: OneDFamily, p_max: float = 5.0, ode_tol: float = 1e-10) -> HamiltonianSpec:
    f = _expr(fam.f, ["s"])
    H0 = _expr(fam.H0, ["x1"])
    spec = HamiltonianSpec(1, OneDBody(f, H0, p_max, ode_tol), fam.domain, label="one_d")
    lo, hi = _finite_range(*spec.bounding_box[0])
    xs = np.linspace(lo, hi, 203)[1:-1]
    signs = set()
    for x in xs:
        if not spec.contains([x]):
            continue
        val = evaluate(f, [evaluate(H0, [x], ["x1"])], ["s"])
        if val == 0.0:
            raise SignViolation(f"f(H0(x)) vanishes at x = {x:g}")
        signs.add(val > 0)
    if len(signs) > 1:
        raise SignViolation("f(H0(x)) changes sign over the domain; H cannot be regular")
    spec.meta.update(family="one_d", f=f, H0=H0)
    return spec


# separable ------------------------------------------------------------------------------


class SeparableBody(Body):
    n = 2

    def __init__(self, H1: HamiltonianSpec, H2: HamiltonianSpec):
        self.H1, self.H2 = H1, H2

    def jet(self, z, order):
        j1 = self.H1.body.jet(np.array([z[0], z[2]]), order)
        j2 = self.H2.body.jet(np.array([z[1], z[3]]), order)
        return embed(j1, [0, 2], 4) + embed(j2, [1, 3], 4)

    def value(self, z):
        return self.H1.body.value(np.array([z[0], z[2]])) + self.H2.body.value(np.array([z[1], z[3]]))


def build_separable(H1: HamiltonianSpec, H2: HamiltonianSpec) -> HamiltonianSpec:
    """H(x, y, p_x, p_y) = H1(x, p_x) + H2(y, p_y)."""
    if H1.n != 1 or H2.n != 1:
        raise ValueError("separable components must be one-dimensional")
    domain = [
        [b1[0], b2[0]] for b1 in H1.domain for b2 in H2.domain
    ]
    if H1.expr is not None and H2.expr is not None:
        e = H1.expr + H2.expr.substitute({"x1": X2, "p1": P2})
        body = _body(e, 2)
    else:
        body = SeparableBody(H1, H2)
    spec = HamiltonianSpec(2, body, domain, label="separable")
    spec.meta.update(family="separable", parts=(H1, H2))
    return spec


# seesaw (a) ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class SeesawA:
    """Type (a) seesaw data.

    ``eta`` is an expression-backed 1D Hamiltonian in ``(x1, p1)``; ``G`` is
    written in ``s``; ``u`` in ``x1``. When u alone is singular, pass the
    analytic product ``u * d_x eta`` as ``coupling`` (an expression in
    ``x1, p1``) instead.
    """

    eta: HamiltonianSpec
    G: Expr | str = "0"
    u: Expr | str = "0"
    coupling: Expr | str | None = None
    y_range: tuple = (-5.0, 5.0)


def _check_eta(eta: HamiltonianSpec):
    from . import verify

    if eta.n != 1 or eta.expr is None:
        raise EtaNotRegular("eta must be a one-dimensional expression Hamiltonian")
    grid = verify.SampleGrid.regular(eta, per_axis=7, p_range=(-2.0, 2.0))
    reg = verify.check_regular(eta, grid)
    if not reg.passed:
        raise EtaNotRegular(f"eta is not regular on the sample grid: {reg.summary()}")
    vi = verify.check_velocity_independence(eta, grid)
    if not vi.passed:
        raise EtaNotRegular(f"eta does not generate a velocity-independent force: {vi.summary()}")
    forces = [abs(force(eta, ([x], [0.0]))[0]) for x in grid.x_points[:, 0]]
    if max(forces) <= 1e-12:
        raise EtaNotRegular("eta generates a vanishing force; use the type (b) form")


def build_seesaw_a(fam: SeesawA, quad_tol: float = 1e-10, verify_build: bool = True) -> HamiltonianSpec:
    """H = y d_x eta + u d_x eta + p_x d_py eta + G(eta) - d_py eta int_0^py G'(eta(x, p)) dp."""
    eta_spec = fam.eta
    _check_eta(eta_spec)
    eta = eta_spec.expr.substitute({"p1": P2})
    G = _expr(fam.G, ["s"])
    eta_x = eta.diff("x1")
    eta_p = eta.diff("p2")
    if fam.coupling is not None:
        coupling = _expr(fam.coupling, ["x1", "p1"]).substitute({"p1": P2})
    else:
        coupling = _expr(fam.u, ["x1"]) * eta_x
    H = X2 * eta_x + coupling + P1 * eta_p
    if not G.is_zero():
        Gp = G.diff("s").substitute({"s": eta})
        H = H + G.substitute({"s": eta}) - eta_p * Integral(Gp, "p2", quad_tol)
    x_box = eta_spec.domain
    domain = [[b[0], tuple(fam.y_range)] for b in x_box]
    spec = HamiltonianSpec(2, _body(H, 2), domain, label="seesaw_a")
    spec.meta.update(family="seesaw_a", G=G)
    if verify_build and not G.is_zero():
        plain = build_seesaw_a(SeesawA(eta_spec, "0", fam.u, fam.coupling, fam.y_range), verify_build=False)
        diff = seesaw_g_invariance(spec, plain)
        spec.meta["g_term_force_diff"] = diff
        if diff > 1e-8:
            raise VerificationFailure(f"G-terms changed the force by {diff:.3g}")
    return spec


def seesaw_g_invariance(spec: HamiltonianSpec, reference: HamiltonianSpec, samples: int = 20, seed: int = 0) -> float:
    """Max force difference between two specs at seeded random phase points."""
    rng = np.random.default_rng(seed)
    box = spec.bounding_box
    lo = np.array([_finite_range(*b)[0] for b in box])
    hi = np.array([_finite_range(*b)[1] for b in box])
    worst = 0.0
    taken = 0
    while taken < samples:
        x = lo + (hi - lo) * (0.05 + 0.9 * rng.random(spec.n))
        if not spec.contains(x):
            continue
        p = rng.uniform(-2.0, 2.0, spec.n)
        worst = max(worst, float(np.max(np.abs(force(spec, (x, p)) - force(reference, (x, p))))))
        taken += 1
    return worst


# seesaw (b) --------------------------------------------------------------------------------


class ReducedOrderKernel:
    """K(s) = r(s) * FP int_{q_ref}^{s} dq / r(q)^2 and its derivatives.

    Where r vanishes inside the integration range the integral is taken by
    symmetric excision of half-width eps around the zero; the excised value
    behaves like ``2a/eps + C + O(eps)`` and the finite part C is extrapolated
    from four widths. Within ``near`` of the zero K is reconstructed from a
    polynomial fit through regular samples on both sides.
    """

    near = 0.1

    def __init__(self, r: Expr, p_range, pv_epsilon: float = 1e-2, tol: float = 1e-12):
        self.r = r
        self.pv_epsilon = float(pv_epsilon)
        self.tol = tol
        self._cache = {}
        lo, hi = p_range
        r_lo, r_hi = self._r(lo), self._r(hi)
        self.zero = None
        if r_lo == 0.0:
            self.zero = lo
        elif r_hi == 0.0:
            self.zero = hi
        elif r_lo * r_hi < 0:
            self.zero = brentq(self._r, lo, hi, xtol=1e-15)
        self.q_ref = 0.0
        if self.zero is not None and abs(self.zero) < 0.5:
            self.q_ref = self.zero + 1.0
        if self.zero is not None:
            rj = lift(r, [self.zero], 3, ["s"])
            if abs(rj.partial((2,))) > 1e-8:
                log.warning(
                    "r''(p0) = %.3g != 0: r * FP int dr/r^2 carries a log term and is not analytic at p0",
                    rj.partial((2,)),
                )

    def _r(self, q):
        return evaluate(self.r, [q], ["s"])

    def _inv_sq(self, q):
        return 1.0 / self._r(q) ** 2

    def _plain(self, a, b):
        value, _ = quad(self._inv_sq, a, b, epsabs=0.0, epsrel=self.tol, limit=200)
        return float(value)

    def _excised(self, a, b, eps):
        p0 = self.zero
        lo, hi = min(a, b), max(a, b)
        total = self._plain(lo, p0 - eps) + self._plain(p0 + eps, hi)
        return total if b >= a else -total

    def antiderivative(self, s: float) -> float:
        s = float(s)
        if s not in self._cache:
            self._cache[s] = self._antiderivative(s)
        return self._cache[s]

    def _antiderivative(self, s: float) -> float:
        a, p0 = self.q_ref, self.zero
        if p0 is None or not (min(a, s) < p0 < max(a, s)):
            return self._plain(a, s)
        eps0 = min(self.pv_epsilon, 0.5 * abs(s - p0), 0.5 * abs(a - p0))
        estimates = []
        for start in (eps0, eps0 / 2):
            eps = start / 2.0 ** np.arange(4)
            vals = np.array([self._excised(a, s, e) for e in eps])
            design = np.stack([1 / eps, np.ones_like(eps), eps, eps**3], axis=1)
            estimates.append(np.linalg.solve(design, vals)[1])
        if abs(estimates[0] - estimates[1]) > 1e-7 * (1 + abs(estimates[1])):
            raise PrincipalValueFailure(
                f"finite-part extrapolation unstable at s = {s}: {estimates[0]!r} vs {estimates[1]!r}"
            )
        return float(estimates[1])

    def _regular_derivs(self, s):
        rj = lift(self.r, [s], 3, ["s"])
        r0, r1, r2, r3 = (rj.partial((k,)) for k in range(4))
        A = self.antiderivative(s)
        return [r0 * A, r1 * A + 1 / r0, r2 * A, r3 * A + r2 / r0**2]

    def __call__(self, s: float, k: int):
        if self.zero is not None and abs(s - self.zero) < self.near:
            derivs = self._fit_derivs(s)
        else:
            derivs = self._regular_derivs(s)
        return derivs

    def _fit_derivs(self, s):
        p0, h = self.zero, self.near
        offsets = h * np.array([1.0, 1.5, 2.0, 2.5, 3.0])
        nodes = np.concatenate([p0 - offsets[::-1], p0 + offsets])
        values = np.array([self._regular_derivs(q)[0] for q in nodes])
        poly = np.polynomial.Polynomial.fit(nodes, values, deg=len(nodes) - 1)
        return [float(poly.deriv(m)(s)) if m else float(poly(s)) for m in range(4)]


@dataclass(frozen=True)
class SeesawB:
    """Type (b) seesaw data. ``r`` and ``u`` are written in ``s`` (p_y); ``c`` and ``d`` in ``x1``."""

    r: Expr | str = "s"
    c: Expr | str = "0"
    d: Expr | str = "0"
    u: Expr | str = "0"
    x_range: tuple = (-5.0, 5.0)
    y_range: tuple = (-5.0, 5.0)
    p_range: tuple = (-5.0, 5.0)


def build_seesaw_b(fam: SeesawB, pv_epsilon: float = 1e-2) -> HamiltonianSpec:
    """H = (p_x + c(x) + d(x) FP int^{p_y} dp / r(p)^2) r(p_y) + u(p_y)."""
    r = _expr(fam.r, ["s"])
    c = _expr(fam.c, ["x1"])
    d = _expr(fam.d, ["x1"])
    u = _expr(fam.u, ["s"])
    lo, hi = fam.p_range
    grid = np.linspace(lo, hi, 1001)
    values = np.array([evaluate(r, [q], ["s"]) for q in grid])
    steps = np.diff(values)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise NotDiffeomorphism("r is not strictly monotone on the sampled p_y range")
    slopes = np.array([lift(r, [q], 1, ["s"]).partial((1,)) for q in grid])
    if np.any(slopes == 0.0) or len(set(np.sign(slopes))) > 1:
        raise NotDiffeomorphism("r' vanishes or changes sign on the sampled p_y range")
    r_py = r.substitute({"s": P2})
    H = (P1 + c) * r_py + u.substitute({"s": P2})
    if not d.is_zero():
        kernel = ReducedOrderKernel(r, fam.p_range, pv_epsilon)
        H = H + d * Special("K", P2, kernel)
    domain = [[tuple(fam.x_range), tuple(fam.y_range)]]
    spec = HamiltonianSpec(2, _body(H, 2), domain, label="seesaw_b")
    spec.meta.update(family="seesaw_b", r=r)
    return spec
