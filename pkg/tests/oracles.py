"""Reference values computed independently of the package's jet machinery.

Derivatives come from Richardson-extrapolated central differences of plain
float functions, trajectories from integrating x'' = F(x) directly, and the
worked-example forces from their hand-derived closed forms.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp

# worked examples: expression, dimension, closed-form force F(x)
EXAMPLES = {
    "cosh_shm": ("cosh(p1)*sqrt(x1^2 + 1)", 1, lambda x: np.array([-x[0]])),
    "separable": (
        "0.5*p1^2 + 0.5*x1^2 + cosh(p2)*(x2^2 + 1)",
        2,
        lambda x: np.array([-x[0], -2 * x[1] ** 3 - 2 * x[1]]),
    ),
    "seesaw_a": (
        "(x2 + x1)*cosh(p2)*x1/sqrt(x1^2 + 1) + p1*sinh(p2)*sqrt(x1^2 + 1)",
        2,
        lambda x: np.array([-x[0], -x[1] - 2 * x[0]]),
    ),
    "seesaw_b": ("p1*p2 - exp(p2) + x1^2", 2, lambda x: np.array([0.0, -2 * x[0]])),
}

# plain-float versions of the same Hamiltonians
FLOAT_H = {
    "cosh_shm": lambda z: math.cosh(z[1]) * math.sqrt(z[0] ** 2 + 1),
    "separable": lambda z: 0.5 * z[2] ** 2 + 0.5 * z[0] ** 2 + math.cosh(z[3]) * (z[1] ** 2 + 1),
    "seesaw_a": lambda z: (z[1] + z[0]) * math.cosh(z[3]) * z[0] / math.sqrt(z[0] ** 2 + 1)
    + z[2] * math.sinh(z[3]) * math.sqrt(z[0] ** 2 + 1),
    "seesaw_b": lambda z: z[2] * z[3] - math.exp(z[3]) + z[0] ** 2,
}

# a velocity-dependent fixture: F = x (1 + x^2) p^2 - x depends on p
VELOCITY_DEPENDENT = "0.5*(1 + x1^2)*p1^2 + 0.5*x1^2"


def fd_gradient(f, z, h=1e-4):
    z = np.asarray(z, float)
    out = np.empty(z.size)
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = 1.0

        def c(step):
            return (f(z + step * e) - f(z - step * e)) / (2 * step)

        out[i] = (4 * c(h / 2) - c(h)) / 3
    return out


def fd_hessian(f, z, h=1e-3):
    """Mixed second partials from differences of the gradient oracle."""
    z = np.asarray(z, float)
    n = z.size
    out = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0

        def c(step):
            return (fd_gradient(f, z + step * e, 1e-4) - fd_gradient(f, z - step * e, 1e-4)) / (2 * step)

        out[i] = (4 * c(h / 2) - c(h)) / 3
    return 0.5 * (out + out.T)


def bracket_force(Hf, x, p):
    """F^i = {d^i H, H} from finite differences of a float Hamiltonian."""
    n = len(x)
    z = np.concatenate([x, p])
    grad = fd_gradient(Hf, z)
    hess = fd_hessian(Hf, z)
    hx, hp = grad[:n], grad[n:]
    return hess[:n, n:].T @ hp - hess[n:, n:] @ hx


def newtonian_trajectory(F, x0, v0, times):
    """Solve x'' = F(x) directly; returns positions at ``times``."""
    n = len(x0)

    def rhs(t, y):
        return np.concatenate([y[n:], F(y[:n])])

    sol = solve_ivp(rhs, (times[0], times[-1]), np.concatenate([x0, v0]), method="DOP853",
                    rtol=1e-12, atol=1e-12, t_eval=times)
    return sol.y[:n].T
