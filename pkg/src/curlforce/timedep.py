"""Velocity-independence conditions for explicitly time-dependent Hamiltonians.

Jets are taken in ``(x1..xn, p1..pn, t)``. The conditions checked are

    {d^i H, d^j H} = 0   and   d_t(d^ij H) + {d^ij H, H} = 0,

the second saying that the momentum Hessian is a constant of the motion.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CurlForceError, DimensionMismatch, DomainError, NonBlowup
from .expr import Expr, lift, parse, variable_names
from .hamiltonian import HamiltonianSpec
from .verify import SampleGrid, VerificationReport, _fund_from_jet, _Tracker, _tol


@dataclass(frozen=True)
class TimeDepSpec:
    """H(x, p, t) on a box of positions and a time interval."""

    n: int
    expr: Expr
    domain: tuple = None
    time_interval: tuple = (0.0, 1.0)
    label: str = ""

    def __post_init__(self):
        extra = self.expr.free_vars() - set(variable_names(self.n, time=True))
        if extra:
            raise DimensionMismatch(f"expression uses {sorted(extra)} outside dimension {self.n}")
        spatial = HamiltonianSpec(self.n, _NullBody(self.n), self.domain)
        object.__setattr__(self, "domain", spatial.domain)
        lo, hi = self.time_interval
        if not lo < hi:
            raise ValueError("time interval needs low < high")

    @classmethod
    def from_expr(cls, text: str, n: int, domain=None, time_interval=(0.0, 1.0), label="") -> "TimeDepSpec":
        return cls(n, parse(text, dimension=n, allowed=set(variable_names(n, time=True))),
                   domain, tuple(time_interval), label)

    def contains(self, x, t) -> bool:
        lo, hi = self.time_interval
        if not lo <= t <= hi:
            return False
        x = np.asarray(x, float)
        return any(np.all(x > np.array(b)[:, 0]) and np.all(x < np.array(b)[:, 1]) for b in self.domain)

    def jet(self, x, p, t, order: int):
        if not self.contains(x, t):
            raise DomainError(f"(x, t) = ({x}, {t}) lies outside the domain")
        z = np.concatenate([np.asarray(x, float), np.asarray(p, float), [float(t)]])
        return lift(self.expr, z, order, variable_names(self.n, time=True))


class _NullBody:
    def __init__(self, n):
        self.n = n


def _static_jet(H: HamiltonianSpec, x, p, order):
    """Jet of a time-independent H in (x, p, t) with zero t-dependence."""
    from .hamiltonian import phase_jet
    from .jet import embed

    j = phase_jet(H, (x, p), order)
    return embed(j, list(range(2 * H.n)), 2 * H.n + 1)


def check_timedep_conditions(H, grid: SampleGrid, times=None, tolerances=None) -> VerificationReport:
    """Residuals of the two time-dependent conditions over ``grid`` x ``times``.

    A static :class:`HamiltonianSpec` is accepted and checked with zero time dependence.
    """
    static = isinstance(H, HamiltonianSpec)
    n = H.n
    if times is None:
        times = [0.0] if static else np.linspace(*H.time_interval, 5)[1:-1]
    t1 = _Tracker("fund1", _tol(tolerances, "fund1"))
    t2 = _Tracker("fund2", _tol(tolerances, "fund2"))
    for (x, p), t in itertools.product(grid.pairs(), times):
        try:
            j = _static_jet(H, x, p, 3) if static else H.jet(x, p, t, 3)
            f1, f2 = _fund_from_jet(j, n, time_index=2 * n)
        except (CurlForceError, ArithmeticError, ValueError):
            t1.skip(), t2.skip()
            continue
        t1.update(f1, x, p)
        t2.update(f2, x, p)
    report = VerificationReport()
    report.add(t1.result)
    report.add(t2.result)
    return report


def separable_blowup(S0: float, k: float, threshold: float = 1e8) -> tuple[float, float]:
    """Blow-up time of S' = k S^2 from S(0) = S0.

    Returns ``(t_star, t_numeric)``: the closed form 1/(k S0) and the time at which
    a numerical solution first exceeds ``threshold`` in magnitude. Raises
    :class:`NonBlowup` (carrying the signed t*) when divergence lies in the past.
    """
    if S0 == 0 or k == 0:
        raise NonBlowup("S stays finite for all time when S0 = 0 or k = 0", t_star=np.inf)
    t_star = 1.0 / (k * S0)
    if k * S0 < 0:
        raise NonBlowup(f"S diverges only at negative time t* = {t_star:.6g}", t_star=t_star)

    # integrate in log|S| so the solver does not chase the singularity in S itself
    def rhs(t, y):
        # capped: trial stages past the crossing may overshoot far beyond the threshold
        return [k * np.sign(S0) * np.exp(min(y[0], 700.0))]

    def crossed(t, y):
        return y[0] - np.log(threshold)

    crossed.terminal = True
    sol = solve_ivp(rhs, (0.0, 2.0 * t_star), [np.log(abs(S0))], method="DOP853",
                    rtol=1e-13, atol=1e-13, events=crossed)
    if not sol.t_events[0].size:
        raise NonBlowup("numerical solution never crossed the threshold", t_star=t_star)
    return t_star, float(sol.t_events[0][0])
