"""Contact-set search, Jacobian bounds and coverage of the ABP transport map.

For a target vector ``xi`` the tilted potential ``w = u - <x, xi>`` is
minimised by an exhaustive vertex scan followed by one Newton step of the
local quadratic model.  At the contact point the transport map is
``Phi(x, y) = grad u(x) + y`` and its differential has determinant
``det(D^2 u - <II, y>)``.

Modes
-----
``sobolev``
    Planar domain, ``y = 0``; bound ``f^(n/(n-1))``.
``fwc``
    Closed submanifold with ``u = 0``; bound ``(-<H, y>/n)^n``.
``michael_simon``
    Surface with potential; bound ``f^(n/(n-1))`` on the unit ball.
``log_sobolev``
    Closed surface, targets from the Gaussian; the bound compares
    ``exp(-|Phi|^2/4) det`` with ``f exp(-|2H + y|^2/4 - n)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from . import kernels
from .geomconst import ball_volume, sphere_area
from .mesh import CurveMesh, TriangleMesh, curvature, dual_area, integrate
from .neumann import PotentialSolution

MODES = ("sobolev", "fwc", "michael_simon", "log_sobolev")

#: ``tol(h) = JACOBIAN_TOL_FACTOR * h * max(1, bound)`` separates genuine
#: violations of the Jacobian bound from discretisation noise.
JACOBIAN_TOL_FACTOR = 1.0
PSD_EPS_FACTOR = 10.0


class NotInContactSetError(ValueError):
    """The contact matrix is not positive semidefinite within tolerance."""


class IncompleteReportError(ValueError):
    """A coverage report cannot support the volume bound."""


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown ABP mode {mode!r}; expected one of {', '.join(MODES)}")


@dataclass(frozen=True)
class ContactField:
    """Per-vertex data needed to evaluate the transport map.

    Arrays are indexed by vertex.  Tangent quantities (``grad``, ``hess``,
    ``II``) are in the vertex tangent frame; ``H`` is ambient.
    """

    geometry: object
    mode: str
    u: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    II: np.ndarray
    H: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    f: np.ndarray
    excluded: np.ndarray
    boundary: np.ndarray
    radius: np.ndarray
    h: float

    @property
    def n(self):
        return self.tangent.shape[2]

    @property
    def ambient_dim(self):
        return self.tangent.shape[1]

    def shifted(self, constant):
        from dataclasses import replace
        return replace(self, u=self.u + constant)

    @property
    def c2_proxy(self):
        """Largest Hessian or second fundamental form norm over usable vertices."""
        ok = ~self.excluded
        vals = [1e-300]
        if self.hess.size:
            vals.append(float(np.abs(np.linalg.eigvalsh(self.hess[ok])).max()))
        if self.II.size:
            vals.append(float(np.abs(np.linalg.eigvalsh(self.II[ok])).max()))
        return max(vals)

    @property
    def eps_psd(self):
        return PSD_EPS_FACTOR * self.h * self.c2_proxy


def _patch_radius(geometry):
    """Distance from each vertex to its farthest 1-ring neighbour."""
    if isinstance(geometry, CurveMesh):
        lengths = geometry.edge_lengths
        r = np.zeros(geometry.n_vertices)
        for a, e in enumerate(geometry.edges):
            r[e[0]] = max(r[e[0]], lengths[a])
            r[e[1]] = max(r[e[1]], lengths[a])
        return r
    e = geometry.edges
    r = np.zeros(geometry.n_vertices)
    np.maximum.at(r, e[:, 0], geometry.edge_lengths)
    np.maximum.at(r, e[:, 1], geometry.edge_lengths)
    return r


def contact_field(source, mode, f=None, curv=None):
    """Assemble a :class:`ContactField` from a solved potential or a bare mesh.

    Parameters
    ----------
    source : PotentialSolution or mesh
        A mesh is accepted only in ``fwc`` mode, where ``u = 0``.
    mode : str
        One of ``MODES``.
    f : array, optional
        Density at the vertices; defaults to the solution's weight.
    curv : CurvatureData, optional
        Reused when given.
    """
    _check_mode(mode)
    if isinstance(source, PotentialSolution):
        geo = source.geometry
        u = source.u
        grad, hess, excluded = source.vertex_grad, source.hess_u, source.excluded
        f = source.problem.weight if f is None else f
    else:
        if mode != "fwc":
            raise ValueError(f"{mode} mode needs a solved potential")
        geo = source
        u = np.zeros(geo.n_vertices)
        k = geo.vertex_tangent_frame.shape[2]
        grad = np.zeros((geo.n_vertices, k))
        hess = np.zeros((geo.n_vertices, k, k))
        excluded = np.zeros(geo.n_vertices, dtype=bool)
    if mode == "sobolev" and geo.ambient_dim != 2:
        raise ValueError("sobolev mode needs a planar domain")
    if mode in ("fwc", "log_sobolev") and not (
            isinstance(geo, CurveMesh) and geo.closed or
            isinstance(geo, TriangleMesh) and geo.closed):
        raise ValueError(f"{mode} mode needs a closed submanifold")
    nf = geo.vertex_normal_frame
    m = nf.shape[2]
    if m:
        curv = curvature(geo) if curv is None else curv
        ii, H = curv.II, curv.H
        excluded = excluded | ~curv.valid
    else:
        k = grad.shape[1]
        ii = np.zeros((geo.n_vertices, 0, k, k))
        H = np.zeros((geo.n_vertices, geo.ambient_dim))
    f = np.ones(geo.n_vertices) if f is None else np.asarray(f, dtype=float)
    return ContactField(
        geometry=geo, mode=mode, u=np.asarray(u, dtype=float), grad=grad, hess=hess, II=ii,
        H=H, tangent=geo.vertex_tangent_frame, normal=nf, f=f, excluded=excluded,
        boundary=geo.boundary_mask.copy(), radius=_patch_radius(geo), h=float(geo.h))


@dataclass(frozen=True)
class ContactSample:
    """One target ``xi`` with its contact point and transport data."""

    target: np.ndarray
    vertex: int
    point: np.ndarray
    grad_u: np.ndarray
    y_bar: np.ndarray
    contact_matrix: np.ndarray
    psd_slack: float
    jacobian: float
    f_value: float
    H: np.ndarray
    interior: bool
    ball_flag: bool
    refined: bool
    excluded: bool
    defect: float
    eps_psd: float

    @property
    def n(self):
        return self.contact_matrix.shape[0]


@dataclass(frozen=True)
class ContactBatch:
    """Vectorised contact data for many targets; row ``s`` is one sample."""

    targets: np.ndarray
    vertex: np.ndarray
    point: np.ndarray
    grad_u: np.ndarray
    y_bar: np.ndarray
    contact_matrix: np.ndarray
    psd_slack: np.ndarray
    jacobian: np.ndarray
    f_value: np.ndarray
    H: np.ndarray
    interior: np.ndarray
    ball_flag: np.ndarray
    refined: np.ndarray
    excluded: np.ndarray
    defect: np.ndarray

    def sample(self, s, eps_psd=0.0):
        return ContactSample(
            target=self.targets[s], vertex=int(self.vertex[s]), point=self.point[s],
            grad_u=self.grad_u[s], y_bar=self.y_bar[s], contact_matrix=self.contact_matrix[s],
            psd_slack=float(self.psd_slack[s]), jacobian=float(self.jacobian[s]),
            f_value=float(self.f_value[s]), H=self.H[s], interior=bool(self.interior[s]),
            ball_flag=bool(self.ball_flag[s]), refined=bool(self.refined[s]),
            excluded=bool(self.excluded[s]), defect=float(self.defect[s]),
            eps_psd=float(eps_psd))


def _boundary_tables(geometry):
    """Up to two (edge start, outward conormal) pairs per boundary vertex."""
    n = geometry.n_vertices
    d = geometry.ambient_dim
    start = np.zeros((n, 2, d))
    eta = np.zeros((n, 2, d))
    count = np.zeros(n, dtype=np.int64)
    if isinstance(geometry, CurveMesh) or geometry.closed:
        return start, eta, count
    be = geometry.boundary_edges
    con = geometry.boundary_conormal
    for e in range(len(be)):
        for v in be[e, :2]:
            c = count[v]
            if c < 2:
                start[v, c] = geometry.vertices[be[e, 0]]
                eta[v, c] = con[e]
                count[v] = c + 1
    return start, eta, count


def contact_batch(cf, targets):
    """Contact search for every row of ``targets``.

    The global minimiser of ``u(x) - <x, xi>`` over the vertices is refined
    by one Newton step of the 2-ring quadratic model ``D^2 u - <II, xi_N>``
    when that model is positive definite and the step stays inside the
    vertex's 1-ring radius.  A boundary vertex counts as interior when the
    refined point lies strictly inside all its boundary edges.
    """
    xi = np.atleast_2d(np.asarray(targets, dtype=float))
    if xi.shape[1] != cf.ambient_dim:
        raise ValueError(f"targets must live in R^{cf.ambient_dim}")
    geo = cf.geometry
    idx = kernels.contact_argmin(geo.vertices, cf.u, xi)
    t = cf.tangent[idx]
    nf = cf.normal[idx]
    xt = np.einsum("sdk,sd->sk", t, xi)
    xn = np.einsum("sdm,sd->sm", nf, xi)
    g = cf.grad[idx]
    hu = cf.hess[idx]
    ii = cf.II[idx]
    model = hu - np.einsum("sm,smkl->skl", xn, ii)
    resid = xt - g
    ev = np.linalg.eigvalsh(model)
    pd = ev[:, 0] > 1e-12 * np.maximum(1.0, np.abs(ev[:, -1]))
    delta = np.zeros_like(resid)
    if pd.any():
        delta[pd] = np.linalg.solve(model[pd], resid[pd][..., None])[..., 0]
    step = np.linalg.norm(delta, axis=1)
    refined = pd & (step <= cf.radius[idx])
    delta[~refined] = 0.0
    grad_t = g + np.einsum("skl,sl->sk", hu, delta)
    grad_amb = np.einsum("sdk,sk->sd", t, grad_t)
    y_amb = np.einsum("sdm,sm->sd", nf, xn)
    defect = np.linalg.norm(xi - grad_amb - y_amb, axis=1)
    contact = hu - np.einsum("sm,smkl->skl", xn, ii)
    evc = np.linalg.eigvalsh(contact)
    jac = np.linalg.det(contact)
    point = geo.vertices[idx] + np.einsum("sdk,sk->sd", t, delta)
    start, eta, count = _boundary_tables(geo)
    on_bd = cf.boundary[idx]
    side = np.einsum("scd,scd->sc", point[:, None, :] - start[idx], eta[idx])
    mask = np.arange(2)[None, :] < count[idx][:, None]
    inside = np.all(np.where(mask, side < 0, True), axis=1)
    interior = ~on_bd | (refined & inside)
    if cf.mode == "log_sobolev":
        ball = np.ones(len(xi), dtype=bool)
    else:
        ball = np.einsum("sk,sk->s", grad_t, grad_t) + np.einsum("sm,sm->s", xn, xn) < 1.0
    return ContactBatch(
        targets=xi, vertex=idx, point=point, grad_u=grad_amb, y_bar=y_amb,
        contact_matrix=contact, psd_slack=evc[:, 0], jacobian=jac, f_value=cf.f[idx],
        H=cf.H[idx], interior=interior, ball_flag=ball, refined=refined,
        excluded=cf.excluded[idx], defect=defect)


def contact_search(cf, xi):
    """Contact sample for a single target vector.

    ``|xi| < 1`` is required except in ``log_sobolev`` mode.  A minimiser on
    the boundary is reported through ``interior`` rather than raised.
    """
    xi = np.asarray(xi, dtype=float)
    if cf.mode != "log_sobolev" and float(xi @ xi) >= 1.0:
        raise ValueError("target must lie in the open unit ball")
    return contact_batch(cf, xi[None, :]).sample(0, cf.eps_psd)


@dataclass(frozen=True)
class BoundCheck:
    """Determinant and trace margins (bound minus value) for one sample."""

    margin: float
    trace_margin: float
    bound: float
    value: float


def _bounds(mode, n, f, H, y, grad, jac, trace):
    """Vectorised (bound, value, trace margin) for the Jacobian inequality."""
    if mode in ("sobolev", "michael_simon"):
        bound = f ** (n / (n - 1))
        return bound, jac, n * f ** (1.0 / (n - 1)) - trace
    hy = np.einsum("sd,sd->s", H, y)
    if mode == "fwc":
        bound = np.maximum(-hy / n, 0.0) ** n
        return bound, jac, -hy - trace
    phi2 = np.einsum("sd,sd->s", grad, grad) + np.einsum("sd,sd->s", y, y)
    q = np.einsum("sd,sd->s", 2 * H + y, 2 * H + y)
    bound = f * np.exp(-0.25 * q - n)
    value = np.exp(-0.25 * phi2) * jac
    return bound, value, np.log(f) + 0.25 * phi2 - 0.25 * q - trace


def jacobian_bound_check(sample, f=None, mode="sobolev"):
    """Margins of the Jacobian bound at a contact sample.

    ``f`` may be a vertex field, a scalar, or ``None`` to use the density
    stored on the sample.

    Raises
    ------
    NotInContactSetError
        If ``psd_slack < -eps_psd``.
    """
    _check_mode(mode)
    if sample.psd_slack < -sample.eps_psd:
        raise NotInContactSetError(
            f"psd slack {sample.psd_slack:.3e} below -{sample.eps_psd:.3e}")
    if f is None:
        fv = sample.f_value
    elif np.ndim(f) == 0:
        fv = float(f)
    else:
        fv = float(np.asarray(f)[sample.vertex])
    n = sample.n
    trace = float(np.trace(sample.contact_matrix))
    b, v, tm = _bounds(mode, n, np.array([fv]), sample.H[None], sample.y_bar[None],
                       sample.grad_u[None], np.array([sample.jacobian]), np.array([trace]))
    return BoundCheck(float(b[0] - v[0]), float(tm[0]), float(b[0]), float(v[0]))


# -- coverage -----------------------------------------------------------------


def sample_targets(dim, count, mode, seed=0):
    """Deterministic quasi-random targets.

    Uniform in the open unit ball of ``R^dim`` (scrambled Halton with
    rejection) or, in ``log_sobolev`` mode, distributed with density
    proportional to ``exp(-|xi|^2/4)`` (Halton through the normal
    quantile with variance 2).
    """
    if count <= 0:
        raise ValueError("sample count must be positive")
    gen = qmc.Halton(d=dim, scramble=True, seed=seed)
    if mode == "log_sobolev":
        p = np.clip(gen.random(count), 1e-12, 1 - 1e-12)
        return math.sqrt(2.0) * norm.ppf(p)
    out = []
    have = 0
    while have < count:
        batch = 2.0 * gen.random(max(64, 2 * (count - have) * 2 ** dim // 2)) - 1.0
        batch = batch[np.einsum("ij,ij->i", batch, batch) < 1.0]
        out.append(batch)
        have += len(batch)
    return np.concatenate(out)[:count]


@dataclass
class CoverageReport:
    """Aggregated contact and Jacobian statistics for one mode."""

    mode: str
    sample_count: int
    covered_fraction: float
    boundary_contact_fraction: float
    excluded_fraction: float
    refined_fraction: float
    negative_margin_fraction: float
    violation_fraction: float
    trace_violation_fraction: float
    eps_psd: float
    margin_tol: float
    psd_slack_p01: float
    min_margin: float
    max_defect: float
    max_identity_defect: float
    psd_histogram: dict
    margin_histogram: dict
    worst_samples: list
    h: float
    geometry: object = field(default=None, repr=False)

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k != "geometry"}
        return d


def _histogram(values, bins=16):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {"edges": [], "counts": []}
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def coverage_report(cf, sample_count=10_000, eps_psd=None, seed=0, targets=None):
    """Run the contact search over quasi-random targets and aggregate.

    A sample is covered when its contact point is interior, usable (not
    excluded), inside the unit ball condition and ``psd_slack >= -eps``.
    Margins are aggregated over covered samples; ``violation_fraction``
    counts margins below ``-tol(h)`` and ``negative_margin_fraction`` counts
    any negative margin.
    """
    eps = cf.eps_psd if eps_psd is None else float(eps_psd)
    if targets is None:
        targets = sample_targets(cf.ambient_dim, int(sample_count), cf.mode, seed)
    b = contact_batch(cf, targets)
    s = len(b.targets)
    trace = np.trace(b.contact_matrix, axis1=1, axis2=2)
    bound, value, tmargin = _bounds(cf.mode, cf.n, b.f_value, b.H, b.y_bar, b.grad_u,
                                    b.jacobian, trace)
    margin = bound - value
    tol = JACOBIAN_TOL_FACTOR * cf.h * np.maximum(1.0, np.abs(bound))
    ttol = JACOBIAN_TOL_FACTOR * cf.h * np.maximum(1.0, np.abs(trace))
    covered = b.interior & b.ball_flag & ~b.excluded & (b.psd_slack >= -eps)
    acc = np.flatnonzero(covered)
    frac = (lambda m: float(np.mean(m)) if len(m) else 0.0)
    worst = []
    for i in acc[np.argsort(margin[acc], kind="stable")[:5]]:
        worst.append({
            "target": [float(v) for v in b.targets[i]], "vertex": int(b.vertex[i]),
            "psd_slack": float(b.psd_slack[i]), "jacobian": float(b.jacobian[i]),
            "bound": float(bound[i]), "margin": float(margin[i]),
        })
    return CoverageReport(
        mode=cf.mode,
        sample_count=s,
        covered_fraction=float(np.mean(covered)),
        boundary_contact_fraction=float(np.mean(cf.boundary[b.vertex])),
        excluded_fraction=float(np.mean(b.excluded)),
        refined_fraction=float(np.mean(b.refined)),
        negative_margin_fraction=frac(margin[acc] < 0),
        violation_fraction=frac(margin[acc] < -tol[acc]),
        trace_violation_fraction=frac(tmargin[acc] < -ttol[acc]),
        eps_psd=eps,
        margin_tol=float(JACOBIAN_TOL_FACTOR * cf.h),
        psd_slack_p01=float(np.percentile(b.psd_slack[acc], 1)) if len(acc) else float("nan"),
        min_margin=float(margin[acc].min()) if len(acc) else float("nan"),
        max_defect=float(b.defect.max()),
        max_identity_defect=float(np.linalg.norm(b.grad_u + b.y_bar - b.point, axis=1).max()),
        psd_histogram=_histogram(b.psd_slack[acc]),
        margin_histogram=_histogram(margin[acc]),
        worst_samples=worst,
        h=cf.h,
        geometry=cf.geometry,
    )


def abp_volume_lower_bound(report, f, mode=None, geometry=None):
    """Ratio of the integral bound to the covered volume it must dominate.

    ``sobolev``: ``int f^(n/(n-1)) / |B^n|``.  ``michael_simon``: ``m
    |B^m| int f^(n/(n-1)) / ((n+m) |B^(n+m)|)``.  ``log_sobolev``:
    ``(4 pi)^(-n/2) e^(-n) int f`` against the unit Gaussian mass.
    ``fwc``: ``int (|H|/n)^n / |S^n|``.  A complete argument gives a ratio
    of at least one.
    """
    mode = report.mode if mode is None else mode
    if mode != report.mode:
        raise IncompleteReportError(f"report is for mode {report.mode!r}, not {mode!r}")
    if report.sample_count <= 0 or report.covered_fraction <= 0:
        raise IncompleteReportError("coverage report has no covered samples")
    geo = report.geometry if geometry is None else geometry
    if geo is None:
        raise IncompleteReportError("coverage report carries no geometry")
    n = geo.vertex_tangent_frame.shape[2]
    m = geo.ambient_dim - n
    if mode == "fwc":
        h = np.linalg.norm(curvature(geo).H, axis=1)
        w = geo.vertex_mass if isinstance(geo, CurveMesh) else dual_area(geo)
        return math.fsum(w * (h / n) ** n) / sphere_area(n)
    fv = np.broadcast_to(np.asarray(f, dtype=float), (geo.n_vertices,))
    if mode == "log_sobolev":
        return (4 * math.pi) ** (-n / 2) * math.exp(-n) * integrate(geo, fv)
    mass = integrate(geo, fv ** (n / (n - 1)))
    if mode == "sobolev":
        return mass / ball_volume(n)
    return m * ball_volume(m) * mass / ((n + m) * ball_volume(n + m))


__all__ = [
    "BoundCheck", "ContactBatch", "ContactField", "ContactSample", "CoverageReport",
    "IncompleteReportError", "JACOBIAN_TOL_FACTOR", "MODES", "NotInContactSetError",
    "abp_volume_lower_bound", "contact_batch", "contact_field", "contact_search",
    "coverage_report", "jacobian_bound_check", "sample_targets",
]
