"""Rotationally symmetric model manifolds and Jacobi-field comparison.

A model is the metric ``dr^2 + phi(r)^2 g_{S^(n-1)}``.  Supported profiles:

``euclidean``
    ``phi(r) = r``.
``cone``
    ``phi(r) = alpha r`` with ``0 < alpha <= 1`` (singular tip).
``smoothed_cone``
    ``phi'(r) = alpha + (1 - alpha) exp(-(r/s)^2)``, so ``phi`` is concave,
    has slope 1 at the pole and slope ``alpha`` far out.

Along a radial geodesic the curvature operator is diagonal in a parallel
frame: ``-phi''/phi`` on the spherical directions and 0 on the radial one.
"""

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import erf

from . import kernels
from .geomconst import ball_volume, sphere_area

TIP_EXCISION = 1e-6
CERT_TOL = 1e-12
MONOTONE_SLACK = 1e-8
TRACE_SLACK = 1e-7
STEPS_PER_UNIT = 2000
MIN_STEPS = 100


class ModelError(ValueError):
    """A profile fails the nonnegative-curvature certificate or is unsupported."""


class PreconditionError(ValueError):
    """Initial data violate the hypothesis of a monotonicity statement."""


@dataclass(frozen=True)
class WarpedModel:
    """Validated warped-product model of dimension ``n``."""

    n: int
    kind: str
    alpha: float = 1.0
    s: float = 1.0
    r_max: float = 50.0

    @property
    def tip(self):
        """Radius of the excised tip ball (cones only)."""
        return TIP_EXCISION if self.kind == "cone" else 0.0

    @property
    def _beta(self):
        return (1.0 - self.alpha) * self.s * math.sqrt(math.pi) / 2.0

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "euclidean":
            return r * 1.0
        if self.kind == "cone":
            return self.alpha * r
        return self.alpha * r + self._beta * erf(r / self.s)

    def dphi(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "euclidean":
            return np.ones_like(r)
        if self.kind == "cone":
            return np.full_like(r, self.alpha)
        return self.alpha + (1.0 - self.alpha) * np.exp(-(r / self.s) ** 2)

    def ddphi(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind in ("euclidean", "cone"):
            return np.zeros_like(r)
        return -2.0 * (1.0 - self.alpha) * r / self.s ** 2 * np.exp(-(r / self.s) ** 2)

    def radial_curvature(self, r):
        """Sectional curvature ``-phi''/phi`` of radial planes (limit at the pole)."""
        r = np.asarray(r, dtype=float)
        if self.kind != "smoothed_cone":
            return np.zeros_like(r)
        small = r < 1e-8
        safe = np.where(small, 1.0, r)
        val = -self.ddphi(safe) / self.phi(safe)
        return np.where(small, 2.0 * (1.0 - self.alpha) / self.s ** 2, val)

    def tangential_curvature(self, r):
        """Sectional curvature ``(1 - phi'^2)/phi^2`` of spherical planes."""
        r = np.asarray(r, dtype=float)
        if self.kind == "euclidean":
            return np.zeros_like(r)
        if self.kind == "cone":
            return (1.0 - self.alpha ** 2) / (self.alpha * r) ** 2
        small = r < 1e-6
        safe = np.where(small, 1.0, r)
        val = (1.0 - self.dphi(safe) ** 2) / self.phi(safe) ** 2
        return np.where(small, 4.0 * (1.0 - self.alpha) / (3.0 * self.s ** 2), val)

    def volume_element(self, r):
        return sphere_area(self.n - 1) * self.phi(r) ** (self.n - 1)

    def _phi_power_integral(self, a, b):
        """``int_a^b phi^(n-1)`` with closed forms where available."""
        if b <= a:
            return 0.0
        n = self.n
        if self.kind in ("euclidean", "cone"):
            c = 1.0 if self.kind == "euclidean" else self.alpha ** (n - 1)
            return c * (b ** n - a ** n) / n
        # erf(r/s) == 1 in double precision beyond 6s, where phi is affine
        knee = 6.0 * self.s
        total = 0.0
        lo, hi = a, min(b, knee)
        if hi > lo:
            total += quad(lambda r: float(self.phi(r)) ** (n - 1), lo, hi,
                          epsabs=0.0, epsrel=1e-13, limit=200)[0]
        lo = max(a, knee)
        if b > lo:
            al, be = self.alpha, self._beta
            total += ((al * b + be) ** n - (al * lo + be) ** n) / (n * al)
        return total

    def ball_volume(self, r):
        """Volume of the geodesic ball of radius ``r`` about the pole or tip."""
        # the tip ball has finite volume in closed form; excision is only
        # needed where curvature is evaluated
        return sphere_area(self.n - 1) * self._phi_power_integral(0.0, float(r))

    def shell_volume(self, a, b):
        a = max(float(a), 0.0)
        return sphere_area(self.n - 1) * self._phi_power_integral(a, float(b))

    def sphere_area(self, r):
        """Area of the geodesic sphere of radius ``r``."""
        return sphere_area(self.n - 1) * float(self.phi(r)) ** (self.n - 1)

    def mean_curvature(self, r):
        """``|H| = (n-1) phi'/phi`` of the centred geodesic sphere of radius ``r``."""
        return (self.n - 1) * float(self.dphi(r)) / float(self.phi(r))

    def describe(self):
        return {"n": self.n, "kind": self.kind, "alpha": self.alpha, "s": self.s,
                "r_max": self.r_max}


def build_model(n, profile="euclidean", alpha=1.0, s=1.0, r_max=50.0, samples=4001):
    """Construct a model and verify its curvature certificate on a grid.

    ``profile`` may also be a tuple such as ``("cone", 0.5)`` or
    ``("smoothed_cone", 0.6, 1.0)``.

    Raises
    ------
    ModelError
        Unknown profile, bad parameters, or ``-phi''/phi`` or ``(1 -
        phi'^2)/phi^2`` below ``-1e-12`` somewhere on the grid.
    """
    if isinstance(profile, (tuple, list)):
        kind = profile[0]
        if len(profile) > 1:
            alpha = profile[1]
        if len(profile) > 2:
            s = profile[2]
    else:
        kind = profile
    if kind not in ("euclidean", "cone", "smoothed_cone"):
        raise ModelError(f"unknown profile {kind!r}")
    if int(n) != n or n < 2 or n > 16:
        raise ModelError(f"model dimension n={n} outside [2, 16]")
    if kind == "euclidean":
        alpha = 1.0
    if not alpha > 0:
        raise ModelError("alpha must be positive")
    if kind == "smoothed_cone" and not s > 0:
        raise ModelError("transition scale s must be positive")
    model = WarpedModel(int(n), kind, float(alpha), float(s), float(r_max))
    r = np.linspace(model.tip, r_max, samples)[1:]
    radial = model.radial_curvature(r)
    tangential = model.tangential_curvature(r)
    if np.any(radial < -CERT_TOL) or np.any(tangential < -CERT_TOL):
        worst = min(float(radial.min()), float(tangential.min()))
        raise ModelError(f"{kind} profile with alpha={alpha} has negative curvature "
                         f"({worst:.3e}); nonnegative Ricci certificate fails")
    return model


def _richardson_zero(fun, base, levels=4):
    """Extrapolate ``fun(r)`` to ``r = inf`` by polynomials in ``1/r``."""
    radii = base * 2.0 ** np.arange(levels)
    vals = np.array([fun(r) for r in radii])
    x = 1.0 / radii
    # Neville at x = 0
    table = list(vals)
    estimates = [vals[-1]]
    for order in range(1, levels):
        for i in range(levels - order):
            table[i] = (x[i + order] * table[i] - x[i] * table[i + 1]) / (x[i + order] - x[i])
        estimates.append(table[0])
    return float(estimates[-1]), float(abs(estimates[-1] - estimates[-2]))


def asymptotic_volume_ratio(model):
    """``theta = lim (phi(r)/r)^(n-1)``.

    Closed form ``alpha^(n-1)`` for cones (and 1 for Euclidean space);
    smoothed profiles use Richardson extrapolation of ``phi(r)/r``.
    """
    if model.kind == "euclidean":
        return 1.0
    if model.kind == "cone":
        return model.alpha ** (model.n - 1)
    slope, err = _richardson_zero(lambda r: float(model.phi(r)) / r, 64.0 * model.s)
    if err > 1e-8 * max(1.0, abs(slope)):
        raise ModelError(f"phi(r)/r does not settle (extrapolation spread {err:.2e})")
    return slope ** (model.n - 1)


@dataclass(frozen=True)
class BishopGromovVerdict:
    radii: np.ndarray
    ratios: np.ndarray
    max_increase: float
    monotone: bool
    limit: float
    expected_limit: float

    @property
    def limit_error(self):
        return abs(self.limit - self.expected_limit)

    @property
    def ok(self):
        return self.monotone and self.limit_error <= 1e-6 * max(1.0, self.expected_limit)


def bishop_gromov_check(model, r_grid=None, tol=1e-10):
    """Check that ``vol(B_r)/r^n`` is nonincreasing and tends to ``|B^n| theta``.

    ``tol`` is relative to the ratio at each step.
    """
    if r_grid is None:
        r_grid = np.geomspace(0.05, model.r_max, 60)
    r = np.asarray(r_grid, dtype=float)
    if np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise ValueError("radii must be positive and increasing")
    ratios = np.array([model.ball_volume(x) / x ** model.n for x in r])
    inc = np.diff(ratios) / ratios[:-1]
    max_inc = float(inc.max()) if len(inc) else 0.0
    limit, _ = _richardson_zero(lambda x: model.ball_volume(x) / x ** model.n,
                                max(64.0 * model.s, 100.0), levels=model.n + 3)
    expected = ball_volume(model.n) * asymptotic_volume_ratio(model)
    return BishopGromovVerdict(r, ratios, max_inc, max_inc <= tol, limit, expected)


# -- Jacobi fields ------------------------------------------------------------


def curvature_along_radial_geodesic(model, t, k=None, start=0.0, speed=1.0, direction=1):
    """Curvature matrices ``S(t)`` along the radial geodesic ``r = start + direction speed t``.

    With ``k = n`` the first slot is the radial (velocity) direction and
    carries 0; with ``k = n - 1`` only the spherical directions are kept.
    Entries scale with ``speed^2``.

    Raises
    ------
    ValueError
        If the geodesic leaves ``(tip, r_max]``.
    """
    n = model.n
    k = n if k is None else int(k)
    if k not in (n, n - 1):
        raise ValueError(f"frame size k must be n or n-1, got {k}")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r = start + direction * speed * t
    lo = model.tip if model.kind == "cone" else 0.0
    if np.any(r < lo) or np.any(r > model.r_max) or (model.kind == "cone" and np.any(r <= lo)):
        raise ValueError("geodesic leaves the model grid")
    kappa = speed ** 2 * model.radial_curvature(r)
    s = np.zeros((len(t), k, k))
    idx = np.arange(k - (n - 1), k)
    s[:, idx, idx] = kappa[:, None]
    return s


@dataclass(frozen=True)
class RiccatiTrajectory:
    """Sampled solution of ``P'' = -P S`` with ``P(0) = I``.

    Arrays stop at the last grid point before ``focal_time`` (if any).
    """

    t: np.ndarray
    P: np.ndarray
    dP: np.ndarray
    Q: np.ndarray
    det_p: np.ndarray
    tr_q: np.ndarray
    S: np.ndarray
    focal_time: float
    dt: float

    @property
    def k(self):
        return self.P.shape[1]

    @property
    def q_asymmetry(self):
        """Largest ``|Q - Q^T|`` entry, relative to ``max(1, |Q|)``."""
        a = np.abs(self.Q - np.swapaxes(self.Q, 1, 2)).max(axis=(1, 2))
        return float((a / np.maximum(1.0, np.abs(self.Q).max(axis=(1, 2)))).max())

    def to_rows(self):
        return [(float(t), float(d), float(q)) for t, d, q in zip(self.t, self.det_p, self.tr_q)]


def _symmetric(a, name, tol=1e-12):
    a = np.asarray(a, dtype=float)
    if np.abs(a - np.swapaxes(a, -1, -2)).max(initial=0.0) > tol * max(1.0, np.abs(a).max(initial=0.0)):
        raise ValueError(f"{name} must be symmetric")
    return a


def _first_focal(t, p, v, det, dt):
    """Locate the first zero of ``det P`` on the grid.

    A sign change of ``det P`` is the generic case.  Even-multiplicity zeros
    (``P = cos(t) I`` in two dimensions, say) keep the sign, so a jump of
    ``tr Q = (log det P)'`` from large negative to positive also counts.
    """
    n = len(t)
    with np.errstate(all="ignore"):
        trq = np.trace(np.linalg.solve(p, v), axis1=1, axis2=2)
    sign = (det[1:] <= 0) & (det[:-1] > 0)
    jump = (trq[:-1] < 0) & (trq[1:] > 0) & (trq[1:] - trq[:-1] > 1.0 / dt)
    hits = np.flatnonzero(sign | jump | ~np.isfinite(trq[1:]))
    if det[0] <= 0:
        return 0.0, 0
    if not len(hits):
        return math.inf, n
    j = int(hits[0])
    a, b = 1.0 / trq[j], 1.0 / trq[j + 1]
    if np.isfinite(a) and np.isfinite(b) and a < 0 < b:
        focal = float(t[j] + dt * a / (a - b))
    elif np.isfinite(a) and a < 0 and not np.isfinite(b):
        focal = float(t[j + 1])
    else:
        focal = float(t[j] + dt * det[j] / (det[j] - det[j + 1]))
    # grid points within round-off of the focal time carry no usable Q
    stop = j + 1
    while stop > 1 and focal - t[stop - 1] < 1e-6 * dt:
        stop -= 1
    return focal, stop


def integrate_jacobi(S, dp0, r, steps=None):
    """Fourth-order fixed-step integration of ``P'' = -P S(t)`` on ``[0, r]``.

    Parameters
    ----------
    S : callable, array or matrix
        ``S(t)`` returning a ``k x k`` symmetric matrix, or samples at every
        half step (shape ``(2 steps + 1, k, k)``), or one constant matrix.
    dp0 : (k, k) array
        Symmetric initial derivative ``P'(0)``.
    r : float
        End time.
    steps : int, optional
        Defaults to ``2000`` per unit time; at least 100.
    """
    dp0 = _symmetric(dp0, "P'(0)")
    k = dp0.shape[0]
    if steps is None:
        steps = max(MIN_STEPS, int(math.ceil(STEPS_PER_UNIT * r)))
    if steps < MIN_STEPS:
        raise ValueError(f"need at least {MIN_STEPS} steps, got {steps}")
    if not r > 0:
        raise ValueError("end time must be positive")
    dt = r / steps
    half = np.linspace(0.0, r, 2 * steps + 1)
    if callable(S):
        s = np.array([S(x) for x in half], dtype=float)
    else:
        s = np.asarray(S, dtype=float)
        if s.ndim == 2:
            s = np.broadcast_to(s, (2 * steps + 1, k, k))
    if s.shape != (2 * steps + 1, k, k):
        raise ValueError(f"S samples must have shape {(2 * steps + 1, k, k)}")
    s = _symmetric(np.ascontiguousarray(s), "S(t)", tol=1e-10)
    p, v = kernels.jacobi_rk4(s, np.eye(k), dp0, dt)
    t = np.linspace(0.0, r, steps + 1)
    det = np.linalg.det(p)
    focal, stop = _first_focal(t, p, v, det, dt)
    p, v, t, det = p[:stop], v[:stop], t[:stop], det[:stop]
    q = np.linalg.solve(p, v)
    return RiccatiTrajectory(t, p, v, q, det, np.trace(q, axis1=1, axis2=2),
                             s[: 2 * stop - 1: 2].copy(), focal, dt)


@dataclass(frozen=True)
class MonotonicityVerdict:
    """Outcome of a monotonicity check on a sampled quantity."""

    ok: bool
    min_margin: float
    worst_index: int
    values: np.ndarray
    detail: dict


def _monotone(values, slack):
    g = np.asarray(values, dtype=float)
    drop = g[:-1] - g[1:]
    allowed = -slack * np.maximum(np.abs(g[:-1]), 1e-300)
    ok = bool(np.all(drop >= allowed))
    i = int(np.argmin(drop)) if len(drop) else 0
    return ok, float(drop[i]) if len(drop) else 0.0, i


def sobolev_monotonicity_check(traj, f_val, n=None, slack=MONOTONE_SLACK):
    """Check ``g(t) = (1 + t f^(1/(n-1)))^(-n) det P(t)`` is nonincreasing.

    Raises
    ------
    PreconditionError
        If ``tr Q(0) > n f^(1/(n-1)) + 1e-9``.
    """
    n = traj.k if n is None else int(n)
    if n != traj.k:
        raise ValueError("trajectory size must equal n")
    a = f_val ** (1.0 / (n - 1))
    if traj.tr_q[0] > n * a + 1e-9:
        raise PreconditionError(
            f"tr Q(0) = {traj.tr_q[0]:.6g} exceeds n f^(1/(n-1)) = {n * a:.6g}")
    g = (1.0 + traj.t * a) ** (-n) * traj.det_p
    ok, margin, i = _monotone(g, slack)
    return MonotonicityVerdict(ok, margin, i, g, {"a": a})


def fwc_monotonicity_check(traj, H_dot_y, n, slack=MONOTONE_SLACK):
    """Check ``h(t) = (1 - t <H,y>/(n-1))^(-(n-1)) det P(t)`` is nonincreasing.

    Also requires ``1 - t <H,y>/(n-1) >= 0`` on the grid.  The trajectory
    must have size ``n - 1`` and start from ``tr Q(0) = -<H, y>``.
    """
    n = int(n)
    if traj.k != n - 1:
        raise ValueError("trajectory size must equal n - 1")
    if abs(traj.tr_q[0] + H_dot_y) > 1e-9 * max(1.0, abs(H_dot_y)):
        raise PreconditionError(
            f"tr P'(0) = {traj.tr_q[0]:.6g} does not match -<H, y> = {-H_dot_y:.6g}")
    base = 1.0 - traj.t * H_dot_y / (n - 1)
    positive = bool(np.all(base >= -1e-12))
    if not positive:
        return MonotonicityVerdict(False, float(base.min()), int(np.argmin(base)), base,
                                   {"positivity": False})
    # near a focal point both factors vanish; keep well-conditioned samples
    keep = base > 1e-8
    h = base[keep] ** (-(n - 1)) * traj.det_p[keep]
    ok, margin, i = _monotone(h, slack)
    return MonotonicityVerdict(ok, margin, i, h, {"positivity": True})


@dataclass(frozen=True)
class TraceComparisonVerdict:
    ok: bool
    riccati_margin: float
    bound_margin: float
    checked_points: int
    f_bound_margin: float


def riccati_trace_comparison(traj, f_val=None, n=None, slack=TRACE_SLACK):
    """Check ``(tr Q)' <= -(tr Q)^2/k`` and the comparison bound on ``tr Q``.

    The derivative uses fourth-order central differences, evaluated only
    where ``|tr Q| dt <= 0.01`` so that the stencil resolves the solution.
    The bound is ``q0 / (1 + t q0 / k)`` with ``q0 = tr Q(0)``; with
    ``f_val`` the weaker ``k a / (1 + t a)``, ``a = f^(1/(k-1))``, is also
    checked.
    """
    k = traj.k if n is None else int(n)
    y = traj.tr_q
    t = traj.t
    dt = traj.dt
    rmargin = math.inf
    count = 0
    if len(y) >= 5:
        d = (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * dt)
        mid = y[2:-2]
        ok_pts = np.abs(y[:-4]).clip(min=np.abs(y[4:])) * dt <= 0.01
        lim = -(mid ** 2) / k
        scale = np.maximum(1.0, mid ** 2 / k)
        m = (lim - d) / scale
        m = m[ok_pts]
        count = int(ok_pts.sum())
        if count:
            rmargin = float(m.min())
    q0 = y[0]
    den = 1.0 + t * q0 / k
    valid = den > 0
    bound = np.where(valid, q0 / np.where(valid, den, 1.0), np.inf)
    bmargin = float(((bound - y) / np.maximum(1.0, np.abs(y)))[valid].min())
    fmargin = math.inf
    if f_val is not None:
        a = f_val ** (1.0 / (k - 1))
        fb = k * a / (1.0 + t * a)
        fmargin = float(((fb - y) / np.maximum(1.0, np.abs(y))).min())
    ok = rmargin >= -slack and bmargin >= -slack and fmargin >= -slack
    return TraceComparisonVerdict(bool(ok), rmargin, bmargin, count, fmargin)


# -- tubes --------------------------------------------------------------------


@dataclass(frozen=True)
class TubeConfig:
    """Tube of radius ``r`` around the centred geodesic sphere of radius ``rho0``."""

    model: WarpedModel
    rho0: float
    r: float

    def __post_init__(self):
        if not self.rho0 > 0 or not self.r > 0:
            raise ValueError("tube needs rho0 > 0 and r > 0")
        if self.rho0 + self.r > self.model.r_max:
            raise ValueError("tube leaves the model grid")

    @property
    def mean_curvature(self):
        """Signed ``<H, nu>`` with ``nu`` the outward normal (negative)."""
        return -self.model.mean_curvature(self.rho0)


def tube_volume(config):
    """Volume of ``{dist(., Sigma) < r}`` for a centred geodesic sphere."""
    m = config.model
    lo = config.rho0 - config.r
    return m.shell_volume(max(lo, 0.0), config.rho0 + config.r)


# -- trajectory dumps and batteries --------------------------------------------


def trajectory_table(traj, f_val=None, H_dot_y=None, n=None):
    """Columns ``t, det_p, tr_q, g, h`` (``g``/``h`` blank when not applicable)."""
    k = traj.k
    rows = []
    g = h = None
    if f_val is not None:
        nn = k if n is None else n
        g = (1.0 + traj.t * f_val ** (1.0 / (nn - 1))) ** (-nn) * traj.det_p
    if H_dot_y is not None:
        nn = k + 1 if n is None else n
        base = 1.0 - traj.t * H_dot_y / (nn - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(base > 0, base ** (-(nn - 1)) * traj.det_p, np.nan)
    for i, t in enumerate(traj.t):
        rows.append((float(t), float(traj.det_p[i]), float(traj.tr_q[i]),
                     None if g is None else float(g[i]), None if h is None else float(h[i])))
    return rows


def write_trajectory_csv(path, traj, f_val=None, H_dot_y=None, n=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "det_p", "tr_q", "g", "h"])
        for row in trajectory_table(traj, f_val, H_dot_y, n):
            w.writerow(["" if v is None else repr(v) for v in row])


def _random_psd_path(rng, k, half_times, scale):
    """Smooth PSD ``S(t) = B(t) B(t)^T`` with ``B`` a trigonometric matrix path."""
    a0, a1, a2 = (rng.normal(size=(k, k)) * scale for _ in range(3))
    w = rng.uniform(0.5, 3.0)
    t = half_times[:, None, None]
    b = a0 + np.sin(w * t) * a1 + np.cos(2 * w * t) * a2
    return np.einsum("tij,tkj->tik", b, b)


def _initial_matrix(rng, k, trace):
    m = rng.normal(size=(k, k))
    m = 0.5 * (m + m.T)
    return m + (trace - np.trace(m)) / k * np.eye(k)


@dataclass(frozen=True)
class BatteryResult:
    count: int
    sobolev_ok: int
    fwc_ok: int
    trace_ok: int
    min_sobolev_margin: float
    min_fwc_margin: float
    min_trace_margin: float
    max_q_asymmetry: float

    @property
    def ok(self):
        return (self.sobolev_ok == self.fwc_ok == self.trace_ok == self.count
                and self.max_q_asymmetry <= 1e-9)

    def to_dict(self):
        d = asdict(self)
        d["ok"] = self.ok
        return d


def riccati_battery(n=3, count=50, seed=0, horizon=1.5, model=None, steps=None):
    """Randomised monotonicity battery over PSD curvature paths.

    Odd scenarios draw ``S(t)`` along radial geodesics of ``model`` (when
    given); the rest use random smooth PSD paths.  Initial data satisfy the
    hypotheses: ``tr P'(0) <= n f^(1/(n-1))`` for the Sobolev flow and
    ``tr P'(0) = -<H, y>`` for the tube flow.
    """
    rng = np.random.default_rng(seed)
    steps = steps or max(MIN_STEPS, int(math.ceil(STEPS_PER_UNIT * horizon)))
    half = np.linspace(0.0, horizon, 2 * steps + 1)
    s_ok = f_ok = t_ok = 0
    s_min = f_min = t_min = math.inf
    asym = 0.0
    for i in range(count):
        f_val = float(rng.uniform(0.2, 3.0))
        a = f_val ** (1.0 / (n - 1))
        paths = []
        for k in (n, n - 1):
            if model is not None and i % 2 == 1:
                speed = float(rng.uniform(0.3, 0.99))
                start = float(rng.uniform(0.05, 2.0))
                paths.append(curvature_along_radial_geodesic(model, half, k=k, start=start,
                                                             speed=speed))
            else:
                paths.append(_random_psd_path(rng, k, half, rng.uniform(0.1, 0.8) / math.sqrt(k)))
        dp = _initial_matrix(rng, n, n * a * rng.uniform(0.0, 1.0))
        tr = integrate_jacobi(paths[0], dp, horizon, steps)
        sv = sobolev_monotonicity_check(tr, f_val, n)
        tv = riccati_trace_comparison(tr, f_val, n)
        hy = float(rng.uniform(-2.0, 2.0))
        trf = integrate_jacobi(paths[1], _initial_matrix(rng, n - 1, -hy), horizon, steps)
        fv = fwc_monotonicity_check(trf, hy, n)
        s_ok += sv.ok
        f_ok += fv.ok
        t_ok += tv.ok
        s_min = min(s_min, sv.min_margin)
        f_min = min(f_min, fv.min_margin)
        t_min = min(t_min, tv.riccati_margin, tv.bound_margin, tv.f_bound_margin)
        asym = max(asym, tr.q_asymmetry, trf.q_asymmetry)
    return BatteryResult(count, s_ok, f_ok, t_ok, s_min, f_min, t_min, asym)


__all__ = [
    "BatteryResult", "BishopGromovVerdict", "CERT_TOL", "ModelError", "MonotonicityVerdict",
    "PreconditionError", "RiccatiTrajectory", "TIP_EXCISION", "TraceComparisonVerdict",
    "TubeConfig", "WarpedModel", "asymptotic_volume_ratio", "bishop_gromov_check",
    "build_model", "curvature_along_radial_geodesic", "fwc_monotonicity_check",
    "integrate_jacobi", "riccati_battery", "riccati_trace_comparison", "trajectory_table",
    "write_trajectory_csv", "sobolev_monotonicity_check",
    "tube_volume",
]
