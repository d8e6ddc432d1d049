"""Numerical verification of velocity-independence and its consequences.

All checks sample a :class:`SampleGrid` and reduce per-point residuals to a
:class:`VerificationReport`. Per-point work is pure; the reducers are the only
place results meet.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .canonical import shift_to_zero_momentum
from .errors import (
    CurlForceError,
    InsufficientSamples,
    NoInvertibleSolution,
    NotTwoDimensional,
    StencilOutsideDomain,
)
from .hamiltonian import (
    SINGULAR_CUTOFF,
    HamiltonianSpec,
    PhasePoint,
    force,
    force_from_jet,
    momentum_of_velocity,
    phase_jet,
    poisson_bracket,
    relative_det,
)

DEFAULT_TOLERANCES = {
    "fund1": 1e-8,
    "fund2": 1e-8,
    "force_spread": 1e-8,
    "g_properties": 1e-8,
    "round_trip": 1e-8,
    "affine_span": 1e-6,
    "pseudo_metric": 1e-7,
}


# grids and reports ---------------------------------------------------------------------


@dataclass
class SampleGrid:
    """Positions and momenta; ``product`` pairs every x with every p, else zips them."""

    x_points: np.ndarray
    p_points: np.ndarray
    product: bool = True

    def __post_init__(self):
        self.x_points = np.atleast_2d(np.asarray(self.x_points, dtype=float))
        self.p_points = np.atleast_2d(np.asarray(self.p_points, dtype=float))
        if len(self.x_points) == 0 or len(self.p_points) == 0:
            raise InsufficientSamples("a sample grid needs at least one x and one p")
        if not self.product and len(self.x_points) != len(self.p_points):
            raise ValueError("zipped grids need equally many x and p points")

    @classmethod
    def regular(cls, H: HamiltonianSpec, per_axis: int = 5, p_range=(-2.0, 2.0),
                shrink: float = 0.1, jitter: float = 0.0, seed: int = 0) -> "SampleGrid":
        """``per_axis`` points per coordinate over the domain's bounding box, pulled in by ``shrink``.

        Infinite sides are clipped to +-10. ``jitter`` (a fraction of the spacing)
        perturbs x points with a seeded generator.
        """
        rng = np.random.default_rng(seed)
        box = H.bounding_box
        lo = np.maximum(box[:, 0], -10.0)
        hi = np.minimum(box[:, 1], 10.0)
        span = hi - lo
        axes = [np.linspace(l + shrink * s, h - shrink * s, per_axis) for l, h, s in zip(lo, hi, span)]
        xs = np.array(list(itertools.product(*axes)))
        if jitter:
            step = span * (1 - 2 * shrink) / max(per_axis - 1, 1)
            xs = xs + jitter * step * rng.uniform(-0.5, 0.5, xs.shape)
        xs = np.array([x for x in xs if H.contains(x)])
        p_axis = np.linspace(p_range[0], p_range[1], per_axis)
        ps = np.array(list(itertools.product(*[p_axis] * H.n)))
        return cls(xs, ps)

    def pairs(self):
        if self.product:
            for x in self.x_points:
                for p in self.p_points:
                    yield x, p
        else:
            yield from zip(self.x_points, self.p_points)


@dataclass
class CheckResult:
    name: str
    max_residual: float
    tolerance: float
    worst_point: PhasePoint | None = None
    evaluated: int = 0
    skipped: int = 0
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.evaluated > 0 and bool(self.max_residual <= self.tolerance)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "residual": float(self.max_residual),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
            "evaluated": self.evaluated,
            "skipped": self.skipped,
        }
        if self.worst_point is not None:
            out["worst_point"] = {"x": self.worst_point.x.tolist(), "p": self.worst_point.p.tolist()}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class VerificationReport:
    checks: dict = field(default_factory=dict)

    def add(self, result: CheckResult):
        self.checks[result.name] = result

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        merged = VerificationReport(dict(self.checks))
        merged.checks.update(other.checks)
        return merged

    def __getitem__(self, name) -> CheckResult:
        return self.checks[name]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    @property
    def tolerances(self) -> dict:
        return {k: c.tolerance for k, c in self.checks.items()}

    def summary(self) -> str:
        return ", ".join(
            f"{k}: {c.max_residual:.3g} <= {c.tolerance:g} {'ok' if c.passed else 'FAIL'}"
            for k, c in self.checks.items()
        )

    def to_dict(self) -> dict:
        return {"pass": self.passed, "checks": [c.to_dict() for c in self.checks.values()]}


class _Tracker:
    """Running max of a residual with the point where it occurred."""

    def __init__(self, name, tol):
        self.result = CheckResult(name, 0.0, tol)

    def update(self, value, x, p):
        r = self.result
        r.evaluated += 1
        value = float(value) if np.isfinite(value) else np.inf
        if r.worst_point is None or value > r.max_residual:
            r.max_residual = value
            r.worst_point = PhasePoint(x, p)

    def skip(self):
        self.result.skipped += 1


def _tol(tolerances, key):
    merged = dict(DEFAULT_TOLERANCES)
    if tolerances:
        merged.update(tolerances)
    return merged[key]


# velocity independence ------------------------------------------------------------------


def fundamental_residuals(H: HamiltonianSpec, x, p):
    """Max |{d^i H, d^j H}| over i<j and max |{d^ij H, H}| over i<=j at one point."""
    n = H.n
    j = phase_jet(H, (x, p), 3)
    return _fund_from_jet(j, n)


def _fund_from_jet(j, n, time_index=None):
    gp = [j.diff(n + i) for i in range(n)]
    fund1 = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            fund1 = max(fund1, abs(poisson_bracket(gp[a], gp[b], n).value))
    fund2 = 0.0
    for a in range(n):
        for b in range(a, n):
            gab = gp[a].diff(n + b)
            val = poisson_bracket(gab, j, n).value
            if time_index is not None:
                val += gab.diff(time_index).value
            fund2 = max(fund2, abs(val))
    return fund1, fund2


def check_velocity_independence(H: HamiltonianSpec, grid: SampleGrid, tolerances=None) -> VerificationReport:
    """The two bracket conditions plus a direct check that F does not vary with p at fixed x."""
    n = H.n
    t1 = _Tracker("fund1", _tol(tolerances, "fund1"))
    t2 = _Tracker("fund2", _tol(tolerances, "fund2"))
    ts = _Tracker("force_spread", _tol(tolerances, "force_spread"))
    forces = {}
    for x, p in grid.pairs():
        try:
            j = phase_jet(H, (x, p), 3)
            f1, f2 = _fund_from_jet(j, n)
            F = force_from_jet(j.truncate(2), n)
        except (CurlForceError, ArithmeticError, ValueError):
            t1.skip(), t2.skip(), ts.skip()
            continue
        t1.update(f1, x, p)
        t2.update(f2, x, p)
        forces.setdefault(tuple(x), []).append((p, F))
    for x, items in forces.items():
        Fs = np.array([F for _, F in items])
        spread = float(np.max(Fs.max(axis=0) - Fs.min(axis=0)))
        worst_p = items[int(np.argmax(np.abs(Fs - Fs.mean(axis=0)).max(axis=1)))][0]
        ts.update(spread, np.array(x), worst_p)
    report = VerificationReport()
    for t in (t1, t2, ts):
        report.add(t.result)
    return report


# the g tensor ----------------------------------------------------------------------------


def g_property_residuals(H: HamiltonianSpec, x, p) -> dict:
    """Residuals of the five g_ij properties at one phase point.

    Derivatives "at fixed v" use d_i|_v = d'_i - H_{x_i p_a} g_{ab} d^b.
    P3b is evaluated after a type 2 shift that sends the local velocity to
    zero momentum, where d_i coincides with the plain x-derivative.
    """
    n = H.n
    j = phase_jet(H, (x, p), 3)
    grad, hess, third = j.gradient(), j.hessian(), j.third()
    hx, hp = grad[:n], grad[n:]
    A = hess[:n, n:]
    G = hess[n:, n:]
    if relative_det(G) < SINGULAR_CUTOFF:
        from .errors import SingularMetric

        raise SingularMetric("singular momentum Hessian")
    g = np.linalg.inv(G)
    dGp = third[n:, n:, n:]  # dGp[a] = d^a g^{..}
    dGx = third[:n, n:, n:]  # dGx[i] = d'_i g^{..}
    v = hp

    # P1: d_{v^i} g_jk = -g_ia g_jb g_kc H^{abc}
    D = -np.einsum("ia,jb,kc,abc->ijk", g, g, g, dGp)
    p1 = max(float(np.max(np.abs(D - D.transpose(perm))))
             for perm in itertools.permutations(range(3)))

    # d_i|_v g^{bc} and then d_i|_v g_jk
    dup_v = dGx - np.einsum("ia,ad,dbc->ibc", A, g, dGp)
    Dx = -np.einsum("jb,ibc,ck->ijk", g, dup_v, g)

    # force and its x-derivatives at fixed v, all from the jet
    F = A.T @ hp - G @ hx
    Fj = []
    for i in range(n):
        acc = None
        for k in range(n):
            term = (j.diff(k).diff(n + i) * j.diff(n + k).truncate(1)
                    - j.diff(k).truncate(1) * j.diff(n + k).diff(n + i))
            acc = term if acc is None else acc + term
        Fj.append(acc)
    dFx = np.array([[Fj[k].diff(i).value for k in range(n)] for i in range(n)])
    dFp = np.array([[Fj[k].diff(n + b).value for k in range(n)] for b in range(n)])
    T = dFx - A @ g @ dFp  # T[j, k] = d_j|_v F^k

    p2 = float(np.max(np.abs(np.einsum("ijk,i->jk", Dx, v) + np.einsum("ijk,i->jk", D, F))))
    p3a = float(np.max(np.abs(g @ hp - g @ v)))
    shifted, _ = shift_to_zero_momentum(H, v, anchor=(x, p), check=False)
    hx_shift = shifted.body.jet(np.concatenate([x, np.zeros(n)]), 1).gradient()[:n]
    p3b = float(np.max(np.abs(hx_shift + g @ F)))
    p4 = float(np.max(np.abs(Dx - Dx.transpose(1, 0, 2))))
    S = g @ T.T  # S[i, j] = g_ik T_j^k
    p5 = float(np.max(np.abs(S - S.T)))
    return {"P1": p1, "P2": p2, "P3a": p3a, "P3b": p3b, "P4": p4, "P5": p5}


def check_g_properties(H: HamiltonianSpec, grid: SampleGrid, tolerances=None) -> VerificationReport:
    tol = _tol(tolerances, "g_properties")
    names = ("P1", "P2", "P3a", "P3b", "P4", "P5")
    trackers = {k: _Tracker(f"g.{k}", tol) for k in names}
    for x, p in grid.pairs():
        try:
            res = g_property_residuals(H, x, p)
        except (CurlForceError, ArithmeticError, ValueError):
            for t in trackers.values():
                t.skip()
            continue
        for k, val in res.items():
            trackers[k].update(val, x, p)
    report = VerificationReport()
    for t in trackers.values():
        report.add(t.result)
    return report


# regularity --------------------------------------------------------------------------------


def check_regular(H: HamiltonianSpec, grid: SampleGrid, tolerances=None) -> VerificationReport:
    """Non-singular momentum Hessian, constant det sign, and Newton round trips p -> v -> p.

    Problems are reported, never raised.
    """
    n = H.n
    sing = _Tracker("regularity.singularity", 0.0)
    sign = _Tracker("regularity.det_sign", 0.0)
    trip = _Tracker("regularity.round_trip", _tol(tolerances, "round_trip"))
    min_rel, min_abs = np.inf, np.inf
    signs = set()
    failures = 0
    for x, p in grid.pairs():
        try:
            j = phase_jet(H, (x, p), 2)
        except (CurlForceError, ArithmeticError, ValueError):
            sing.skip(), sign.skip(), trip.skip()
            continue
        upper = j.hessian()[n:, n:]
        det = float(np.linalg.det(upper))
        rel = relative_det(upper)
        min_rel, min_abs = min(min_rel, rel), min(min_abs, abs(det))
        sing.update(max(0.0, SINGULAR_CUTOFF - rel), x, p)
        if det != 0.0:
            signs.add(det > 0)
        sign.update(float(len(signs) > 1), x, p)
        v = j.gradient()[n:]
        try:
            back = momentum_of_velocity(H, x, v)
            err = float(np.max(np.abs(back - p))) / (1.0 + float(np.max(np.abs(p))))
        except (CurlForceError, ArithmeticError, ValueError):
            err = np.inf
        if not err <= trip.result.tolerance:
            failures += 1
        trip.update(err, x, p)
    sing.result.detail = {"min_relative_det": float(min_rel), "min_abs_det": float(min_abs)}
    evaluated = max(trip.result.evaluated, 1)
    trip.result.detail = {"success_rate": 1.0 - failures / evaluated}
    report = VerificationReport()
    for t in (sing, sign, trip):
        report.add(t.result)
    return report


# affine span of g_ij(x, .) ---------------------------------------------------------------------


@dataclass
class AffineHull:
    offset: np.ndarray
    basis: np.ndarray  # rows span the direction space
    singular_values: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def distance(self, point) -> float:
        d = np.asarray(point, float) - self.offset
        if self.dimension:
            d = d - self.basis.T @ (self.basis @ d)
        return float(np.linalg.norm(d))

    def direction_distance(self, vector) -> float:
        vec = np.asarray(vector, float)
        if self.dimension:
            vec = vec - self.basis.T @ (self.basis @ vec)
        return float(np.linalg.norm(vec))


def _sym_vector(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    return np.array([m[i, j] for i in range(n) for j in range(i, n)])


def affine_hull(vectors, rank_tol: float = 1e-8) -> AffineHull:
    Y = np.asarray(vectors, float)
    c = Y.mean(axis=0)
    _, s, vt = np.linalg.svd(Y - c, full_matrices=False)
    floor = 1e-9 * max(1.0, float(np.linalg.norm(c))) * np.sqrt(len(Y))
    cut = max(rank_tol * (s[0] if len(s) else 0.0), floor)
    rank = int(np.sum(s > cut))
    return AffineHull(c, vt[:rank], s)


def hull_mismatch(a: AffineHull, b: AffineHull) -> float:
    """Symmetric containment residual; infinite when dimensions differ."""
    if a.dimension != b.dimension:
        return np.inf
    scale = max(1.0, float(np.linalg.norm(a.offset)), float(np.linalg.norm(b.offset)))
    worst = max(
        [b.direction_distance(v) for v in a.basis] + [a.direction_distance(v) for v in b.basis] + [0.0]
    )
    worst = max(worst, b.distance(a.offset) / scale, a.distance(b.offset) / scale)
    return worst


@dataclass
class AffineSpanResult:
    hulls: list
    dimensions: list
    constant: bool
    max_residual: float
    dimension_stable: bool


def affine_span(H: HamiltonianSpec, x_points, v_points, rank_tol: float = 1e-8,
                contain_tol: float = 1e-6) -> AffineSpanResult:
    """Affine hulls of {g_ij(x, v)} over ``v_points`` for each x, and whether they agree."""
    n = H.n
    d = n * (n + 1) // 2
    v_points = np.atleast_2d(np.asarray(v_points, float))
    if len(v_points) < d + 1:
        raise InsufficientSamples(f"need at least {d + 1} velocity samples, got {len(v_points)}")
    hulls, halves = [], []
    for x in np.atleast_2d(np.asarray(x_points, float)):
        vecs = []
        guess = None
        for v in v_points:
            p = momentum_of_velocity(H, x, v, guess=guess)
            guess = p
            upper = phase_jet(H, (x, p), 2).hessian()[n:, n:]
            vecs.append(_sym_vector(np.linalg.inv(upper)))
        hulls.append(affine_hull(vecs, rank_tol))
        half = vecs[::2] if len(vecs[::2]) >= d + 1 else vecs
        halves.append(affine_hull(half, rank_tol))
    residual = max([hull_mismatch(hulls[0], h) for h in hulls[1:]] + [0.0])
    dims = [h.dimension for h in hulls]
    stable = all(a.dimension == b.dimension for a, b in zip(hulls, halves))
    return AffineSpanResult(hulls, dims, bool(residual <= contain_tol), residual, stable)


def check_affine_span(H: HamiltonianSpec, grid: SampleGrid, tolerances=None, max_x: int = 5) -> VerificationReport:
    tol = _tol(tolerances, "affine_span")
    xs = grid.x_points
    if len(xs) > max_x:
        xs = xs[np.linspace(0, len(xs) - 1, max_x).round().astype(int)]
    v_points = grid.p_points
    res = affine_span(H, xs, v_points, contain_tol=tol)
    out = CheckResult("affine_span", res.max_residual, tol, evaluated=len(xs))
    out.detail = {"dimensions": res.dimensions, "dimension_stable": res.dimension_stable}
    report = VerificationReport()
    report.add(out)
    return report


# the force Jacobian T and the pseudo-metric -----------------------------------------------------


def force_field(H: HamiltonianSpec, p_ref=None):
    """F(x) as a plain callable, sampled at momentum ``p_ref`` (default 0)."""
    p_ref = np.zeros(H.n) if p_ref is None else np.asarray(p_ref, float)
    return lambda x: force(H, (np.asarray(x, float), p_ref))


def force_jacobian(F, x, step: float = 1e-5, inside=None) -> np.ndarray:
    """T[i, j] = d_i F^j by Richardson-extrapolated central differences."""
    x = np.asarray(x, float)
    n = x.size
    T = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        if inside is not None and not (inside(x + step * e) and inside(x - step * e)):
            raise StencilOutsideDomain(f"difference stencil at {x} leaves the domain")

        def central(h):
            return (np.asarray(F(x + h * e)) - np.asarray(F(x - h * e))) / (2 * h)

        T[i] = (4 * central(step / 2) - central(step)) / 3
    return T


@dataclass
class TClassification:
    x_points: np.ndarray
    T_samples: list
    tags: list
    case: int
    histogram: dict


TAGS = ("complex_pair", "distinct_real", "single_eigenvalue_nonisotropic", "isotropic")


def tag_T(T: np.ndarray) -> str:
    tr = T[0, 0] + T[1, 1]
    det = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
    disc = tr * tr - 4 * det
    norm2 = float(np.sum(T * T))
    tau = 1e-8 * norm2
    if disc < -tau:
        return "complex_pair"
    if disc > tau:
        return "distinct_real"
    shear = np.linalg.norm(T - 0.5 * tr * np.eye(2))
    if shear <= 1e-6 * max(1.0, np.sqrt(norm2)):
        return "isotropic"
    return "single_eigenvalue_nonisotropic"


def aggregate_case(tags) -> int:
    present = set(tags)
    for case, tag in enumerate(TAGS[:3], start=1):
        if tag in present:
            return case
    return 4


def classify_T(source, x_points, fd_step: float = 1e-5, p_ref=None) -> TClassification:
    """Eigen-structure tags of the force Jacobian and the aggregate four-way case.

    ``source`` is a 2D HamiltonianSpec or a callable F(x).
    """
    x_points = np.atleast_2d(np.asarray(x_points, float))
    if x_points.shape[1] != 2:
        raise NotTwoDimensional("the eigen-case split is defined for two dimensions only")
    if isinstance(source, HamiltonianSpec):
        if source.n != 2:
            raise NotTwoDimensional("the eigen-case split is defined for two dimensions only")
        F, inside = force_field(source, p_ref), source.contains
    else:
        F, inside = source, None
    Ts = [force_jacobian(F, x, fd_step, inside) for x in x_points]
    tags = [tag_T(T) for T in Ts]
    hist = {t: c for t, c in Counter(tags).items()}
    return TClassification(x_points, Ts, tags, aggregate_case(tags), hist)


@dataclass
class PseudoMetric:
    c: np.ndarray  # lower-index metric, c F is curl-free
    M: np.ndarray  # F = -M grad U
    null_basis: list


def _sym_basis(n):
    out = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            out.append(E)
    return out


def solve_pseudo_metric(T_samples, seed: int = 0, candidates: int = 256, null_tol: float = 1e-6) -> PseudoMetric:
    """Symmetric c with c_ik T_j^k symmetric at every sample, chosen invertible.

    The admissible c form a linear space; when it has more than one dimension
    seeded random combinations are scanned for the best-conditioned member.
    Singular values below ``null_tol`` times the largest count as zero; the
    slack absorbs finite-difference noise in T.
    """
    Ts = [np.atleast_2d(np.asarray(T, float)) for T in T_samples]
    if not Ts:
        raise InsufficientSamples("need at least one T sample")
    n = Ts[0].shape[0]
    basis = _sym_basis(n)
    rows = []
    for T in Ts:
        cols = []
        for E in basis:
            S = E @ T.T
            cols.append([S[i, j] - S[j, i] for i in range(n) for j in range(i + 1, n)])
        if n > 1:
            rows.extend(np.array(cols).T)
    if rows:
        system = np.array(rows)
        _, s, vt = np.linalg.svd(system)
        s_full = np.zeros(len(basis))
        s_full[: len(s)] = s
        scale = max(1.0, float(s_full[0]))
        null = [vt[k] for k in range(len(basis)) if s_full[k] <= null_tol * scale]
    else:
        null = [np.eye(len(basis))[k] for k in range(len(basis))]
    if not null:
        raise NoInvertibleSolution("no symmetric c makes c T^T symmetric at every sample")

    def to_matrix(w):
        return sum(wk * E for wk, E in zip(w, basis))

    null_mats = [to_matrix(w) for w in null]
    # small integer combinations first, then seeded random ones
    trial = [sum(a * m for a, m in zip(coef, null_mats))
             for coef in itertools.product((-1, 0, 1), repeat=min(len(null), 4)) if any(coef)]
    if len(null) > 4:
        trial += null_mats
    rng = np.random.default_rng(seed)
    for _ in range(candidates if len(null) > 1 else 0):
        coef = rng.normal(size=len(null))
        trial.append(sum(a * m for a, m in zip(coef, null_mats)))

    def quality(c):
        return abs(np.linalg.det(c)) / max(np.linalg.norm(c), 1e-300) ** n

    scores = np.array([quality(c) for c in trial])
    top = scores.max()
    if top < 1e-8:
        raise NoInvertibleSolution("every admissible c is singular; the force is not pseudo curl-free")
    near_top = [c for c, q in zip(trial, scores) if q >= top * (1 - 1e-9)]
    definite = [c for c in near_top if np.all(np.linalg.eigvalsh(0.5 * (c + c.T)) > 0)
                or np.all(np.linalg.eigvalsh(0.5 * (c + c.T)) < 0)]
    best = (definite or near_top)[0]
    k = np.unravel_index(np.argmax(np.abs(best)), best.shape)
    best = best / best[k]
    return PseudoMetric(best, np.linalg.inv(best), null_mats)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def recover_potential(F, c, origin, x) -> float:
    """U(x) = -int (c F) . dl along the straight segment from ``origin``."""
    origin = np.asarray(origin, float)
    d = np.asarray(x, float) - origin
    s = 0.5 * (_GL_NODES + 1.0)
    total = 0.0
    for si, wi in zip(s, _GL_WEIGHTS):
        total += 0.5 * wi * float(np.dot(c @ np.asarray(F(origin + si * d)), d))
    return -total


def pseudo_conservative_residual(F, metric: PseudoMetric, origin, x_points, step: float = 1e-3) -> float:
    """max |F + M grad U| with U from :func:`recover_potential` and grad U by differencing."""
    worst = 0.0
    for x in np.atleast_2d(np.asarray(x_points, float)):
        n = x.size
        grad = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0

            def central(h):
                return (recover_potential(F, metric.c, origin, x + h * e)
                        - recover_potential(F, metric.c, origin, x - h * e)) / (2 * h)

            grad[i] = (4 * central(step / 2) - central(step)) / 3
        worst = max(worst, float(np.max(np.abs(np.asarray(F(x)) + metric.M @ grad))))
    return worst


def check_pseudo_metric(H: HamiltonianSpec, grid: SampleGrid, tolerances=None, fd_step: float = 1e-5,
                        seed: int = 0, max_x: int = 9):
    """Recover M and U with F = -M grad U from samples of the force Jacobian."""
    tol = _tol(tolerances, "pseudo_metric")
    F = force_field(H)
    xs = grid.x_points
    Ts = [force_jacobian(F, x, fd_step, H.contains) for x in xs]
    metric = solve_pseudo_metric(Ts, seed=seed)
    if len(xs) > max_x:
        xs = xs[np.linspace(0, len(xs) - 1, max_x).round().astype(int)]
    origin = grid.x_points.min(axis=0)
    residual = pseudo_conservative_residual(F, metric, origin, xs)
    out = CheckResult("pseudo_metric", residual, tol, evaluated=len(xs))
    out.detail = {"M": metric.M.tolist(), "c": metric.c.tolist(), "origin": origin.tolist()}
    report = VerificationReport()
    report.add(out)
    return report, metric


# the full pipeline ------------------------------------------------------------------------------

GROUPS = ("fund1", "fund2", "force_spread", "regularity", "g_properties", "affine_span", "pseudo_metric")


def run_all(H: HamiltonianSpec, grid: SampleGrid, tolerances=None) -> VerificationReport:
    """Every check on one grid; sub-checks keep dotted names (``g.P1``, ``regularity.round_trip``)."""
    report = check_velocity_independence(H, grid, tolerances)
    report = report.merge(check_regular(H, grid, tolerances))
    report = report.merge(check_g_properties(H, grid, tolerances))
    try:
        report = report.merge(check_affine_span(H, grid, tolerances))
    except (CurlForceError, ArithmeticError) as exc:
        report.add(CheckResult("affine_span", np.inf, _tol(tolerances, "affine_span"),
                               evaluated=1, detail={"error": str(exc)}))
    try:
        pm, _ = check_pseudo_metric(H, grid, tolerances)
        report = report.merge(pm)
    except (CurlForceError, ArithmeticError) as exc:
        report.add(CheckResult("pseudo_metric", np.inf, _tol(tolerances, "pseudo_metric"),
                               evaluated=1, detail={"error": str(exc)}))
    return report


def group_of(name: str) -> str:
    if name.startswith("g."):
        return "g_properties"
    if name.startswith("regularity."):
        return "regularity"
    return name
