"""Trajectories under Hamilton's equations, with conservation and Newtonian diagnostics."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, InsufficientSamples, StepFailure
from .hamiltonian import HamiltonianSpec, PhasePoint, as_point, force, phase_jet

COMPLETED, LEFT_DOMAIN, STEP_FAILURE = "completed", "left_domain", "step_failure"


@dataclass
class Trajectory:
    times: np.ndarray
    states: list  # PhasePoint per sample
    energies: np.ndarray
    metric_upper_samples: list
    termination: str = COMPLETED
    dense: object = None  # callable t -> z when available

    def __len__(self):
        return len(self.times)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.x for s in self.states])

    @property
    def momenta(self) -> np.ndarray:
        return np.array([s.p for s in self.states])


def _sample(H: HamiltonianSpec, z):
    n = H.n
    j = phase_jet(H, (z[:n], z[n:]), 2)
    return PhasePoint(z[:n], z[n:]), j.value, j.hessian()[n:, n:]


def _box_distance(H: HamiltonianSpec, x) -> float:
    """Signed distance to the boundary of the union of boxes; positive inside."""
    best = -np.inf
    for box in H.domain:
        b = np.array(box)
        best = max(best, float(np.min(np.minimum(x - b[:, 0], b[:, 1] - x))))
    return best


def integrate(H: HamiltonianSpec, start, t_end: float, tol: float = 1e-10,
              samples: int | None = None) -> Trajectory:
    """Dormand-Prince 5(4) on x' = dH/dp, p' = -dH/dx, stopping where x leaves the domain.

    ``tol`` is used as both relative and absolute local tolerance. A negative
    ``t_end`` integrates backwards. ``samples`` resamples the dense output on a
    uniform grid; otherwise the solver's accepted steps are returned.
    """
    start = as_point(start)
    n = H.n
    if start.x.size != n:
        from .errors import DimensionMismatch

        raise DimensionMismatch("start point dimension differs from the Hamiltonian's")
    if not H.contains(start.x):
        raise DomainError(f"start x = {start.x} lies outside the domain")

    def rhs(t, z):
        try:
            g = H.body.jet(z, 1).gradient()
        except (ArithmeticError, ValueError):
            # stage points past the boundary; the exit event cuts the step anyway
            return np.zeros(2 * n)
        return np.concatenate([g[n:], -g[:n]])

    def exit_event(t, z):
        return _box_distance(H, z[:n])

    exit_event.terminal = True
    exit_event.direction = -1

    events = [exit_event] if np.any(np.isfinite(np.array(H.domain))) else None
    if t_end == 0:
        pt, e, g = _sample(H, start.z)
        return Trajectory(np.array([0.0]), [pt], np.array([e]), [g])
    sol = solve_ivp(rhs, (0.0, float(t_end)), start.z, method="RK45", rtol=tol, atol=tol,
                    dense_output=True, events=events)
    if sol.status == -1:
        raise StepFailure(f"integration failed: {sol.message}")
    termination = LEFT_DOMAIN if sol.status == 1 else COMPLETED
    if samples:
        t_stop = sol.t[-1]
        times = np.linspace(0.0, t_stop, samples)
        zs = sol.sol(times).T
    else:
        times, zs = sol.t, sol.y.T
    if termination == LEFT_DOMAIN:
        # drop the boundary sample itself: x lies outside the open domain there
        keep = [i for i, z in enumerate(zs) if H.contains(z[:n])]
        times, zs = times[keep], zs[keep]
    pts, energies, metrics = [], [], []
    for z in zs:
        pt, e, g = _sample(H, z)
        pts.append(pt)
        energies.append(e)
        metrics.append(g)
    return Trajectory(np.asarray(times), pts, np.array(energies), metrics, termination, sol.sol)


def conservation_report(traj: Trajectory) -> dict:
    """Relative drift of the energy and of the momentum Hessian along ``traj``."""
    e0 = traj.energies[0]
    energy_drift = float(np.max(np.abs(traj.energies - e0))) / (1.0 + abs(e0))
    g0 = traj.metric_upper_samples[0]
    scale = 1.0 + float(np.linalg.norm(g0))
    metric_drift = max(float(np.max(np.abs(g - g0))) for g in traj.metric_upper_samples) / scale
    return {"energy_drift": energy_drift, "metric_drift": metric_drift}


def newtonian_check(H: HamiltonianSpec, traj: Trajectory, step: float = 1e-3, p_ref=None) -> float:
    """Max relative residual of the second difference of x(t) against F at the trajectory points.

    x(t) is resampled from the dense output at spacing ``step``. With ``p_ref``
    the force is sampled at that fixed momentum instead of the trajectory's, so
    the check compares against F as a function of x alone.
    """
    if traj.dense is None:
        raise InsufficientSamples("trajectory has no dense output to resample")
    t0, t1 = traj.times[0], traj.times[-1]
    count = int(np.floor(abs(t1 - t0) / step)) + 1
    if count < 5:
        raise InsufficientSamples("need at least 5 samples on the uniform resample")
    ts = t0 + np.sign(t1 - t0) * step * np.arange(count)
    zs = traj.dense(ts).T
    n = H.n
    worst = 0.0
    for k in range(1, count - 1):
        acc = (zs[k + 1, :n] - 2 * zs[k, :n] + zs[k - 1, :n]) / step**2
        F = force(H, (zs[k, :n], zs[k, n:] if p_ref is None else np.asarray(p_ref, float)))
        worst = max(worst, float(np.max(np.abs(acc - F))) / (1.0 + float(np.max(np.abs(F)))))
    return worst


def export_csv(traj: Trajectory, path) -> None:
    """Columns t, x1..xn, p1..pn, H, then the upper triangle of g^ij row by row."""
    n = traj.states[0].x.size
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)] + ["H"]
    header += [f"g{i + 1}{j + 1}" for i in range(n) for j in range(i, n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, s, e, g in zip(traj.times, traj.states, traj.energies, traj.metric_upper_samples):
            row = [t, *s.x, *s.p, e] + [g[i, j] for i in range(n) for j in range(i, n)]
            w.writerow([f"{v:.17g}" for v in row])
