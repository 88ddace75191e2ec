"""Two-sided evaluation of the sharp inequalities on concrete geometries.

Every checker returns an :class:`InequalityReport`.  ``margin`` is the
signed slack in the direction of the inequality, so a nonnegative margin
means the inequality holds: ``lhs - rhs`` for lower bounds and ``rhs - lhs``
for upper bounds (log-Sobolev, tube volume).
"""

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad

from . import comparison
from .geomconst import ball_volume, michael_simon_constant, sphere_area
from .mesh import (CurveMesh, DomainMesh, MeshError, TriangleMesh, boundary_integrate,
                   curvature, dual_area, gradient, vertex_gradient)

# discretisation band per unit h^2 for the mesh-based checks
TOL_FACTOR = 4.0
RIEMANNIAN_TOL = 1e-8

THEOREMS = {
    "sobolev_euclidean": "sharp Sobolev inequality for Euclidean domains",
    "isoperimetric": "sharp isoperimetric inequality for Euclidean domains",
    "fwc": "Fenchel-Willmore-Chen total mean curvature bound",
    "michael_simon": "sharp Michael-Simon Sobolev inequality, codimension >= 2",
    "log_sobolev": "sharp log-Sobolev inequality for closed submanifolds",
    "riemannian_isoperimetric": "isoperimetric inequality under Ric >= 0 with volume ratio",
    "riemannian_fwc": "Willmore-type bound under Ric >= 0 with volume ratio",
    "heintze_karcher": "Heintze-Karcher tube volume bound under Ric >= 0",
}


@dataclass(frozen=True)
class InequalityReport:
    """Both sides of one inequality on one geometry.

    ``direction`` is ``"ge"`` when the claim is ``lhs >= rhs`` and ``"le"``
    for ``lhs <= rhs``.  ``ratio`` is ``None`` when ``rhs <= 0``.
    """

    theorem: str
    lhs: float
    rhs: float
    ratio: float
    margin: float
    tolerance: float
    direction: str = "ge"
    geometry: dict = field(default_factory=dict)
    mesh_stats: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def holds(self):
        """True when the inequality is satisfied up to ``tolerance``.

        The band is relative to ``max(|lhs|, |rhs|)``.
        """
        scale = max(abs(self.lhs), abs(self.rhs), 1e-300)
        return self.margin >= -self.tolerance * scale

    def to_dict(self):
        d = asdict(self)
        d["holds"] = self.holds
        return d

    CSV_FIELDS = ("theorem", "geometry", "lhs", "rhs", "ratio", "margin", "tolerance",
                  "direction", "holds")

    def csv_row(self):
        name = self.geometry.get("name") or self.geometry.get("kind", "")
        return {"theorem": self.theorem, "geometry": name, "lhs": repr(self.lhs),
                "rhs": repr(self.rhs), "ratio": "" if self.ratio is None else repr(self.ratio),
                "margin": repr(self.margin), "tolerance": repr(self.tolerance),
                "direction": self.direction, "holds": self.holds}


def reports_to_csv(reports):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=InequalityReport.CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def _report(theorem, lhs, rhs, tol, geometry, stats, direction="ge", **extra):
    lhs, rhs = float(lhs), float(rhs)
    ratio = lhs / rhs if rhs > 0 else None
    margin = lhs - rhs if direction == "ge" else rhs - lhs
    if not math.isfinite(lhs) or not math.isfinite(rhs):
        raise ValueError(f"{theorem}: non-finite side ({lhs}, {rhs})")
    return InequalityReport(theorem, lhs, rhs, ratio, margin, float(tol), direction,
                            geometry, stats, extra)


def _mesh_info(mesh):
    d = mesh.describe()
    stats = {"vertices": mesh.n_vertices, "h": float(mesh.h)}
    if isinstance(mesh, TriangleMesh):
        stats["faces"] = mesh.n_faces
    return d, stats


def _mesh_tol(mesh):
    return TOL_FACTOR * float(mesh.h) ** 2


def density_values(mesh, f):
    """Vertex values of a density given as scalar, array, or callable on points."""
    if callable(f):
        vals = np.asarray(f(mesh.vertices), dtype=float)
    else:
        vals = np.asarray(f, dtype=float)
    if vals.ndim == 0:
        vals = np.full(mesh.n_vertices, float(vals))
    if vals.shape != (mesh.n_vertices,):
        raise MeshError(f"density has shape {vals.shape}, expected ({mesh.n_vertices},)")
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise ValueError("density must be positive and finite")
    return vals


def _face_mean(mesh, values):
    return values[mesh.triangles].mean(axis=1)


def _face_integral(mesh, face_values):
    return math.fsum(mesh.face_areas * face_values)


def _power_integral(mesh, f, p):
    """``int f^p`` with the three-point vertex rule per face (exact for P1 f, p = 1)."""
    return _face_integral(mesh, _face_mean(mesh, f ** p))


# -- Euclidean domains ---------------------------------------------------------


def _domain(mesh):
    if not isinstance(mesh, DomainMesh):
        raise MeshError("expected a planar domain mesh")
    return mesh


def check_sobolev_euclidean(domain, f=1.0):
    """``int |grad f| + int_bd f >= n |B^n|^(1/n) (int f^(n/(n-1)))^((n-1)/n)``.

    The gradient term is integrated exactly for the piecewise-linear
    interpolant; the boundary term uses the trapezoid rule.
    """
    mesh = _domain(domain)
    f = density_values(mesh, f)
    n = mesh.intrinsic_dim
    g = np.linalg.norm(gradient(mesh, f), axis=1)
    lhs = _face_integral(mesh, g) + boundary_integrate(mesh, f)
    vol = _power_integral(mesh, f, n / (n - 1))
    rhs = n * ball_volume(n) ** (1 / n) * vol ** ((n - 1) / n)
    geo, stats = _mesh_info(mesh)
    return _report("sobolev_euclidean", lhs, rhs, _mesh_tol(mesh), geo, stats)


def check_isoperimetric(domain):
    """``|bd D| >= n |B^n|^(1/n) |D|^((n-1)/n)``."""
    r = check_sobolev_euclidean(domain, 1.0)
    return InequalityReport("isoperimetric", r.lhs, r.rhs, r.ratio, r.margin, r.tolerance,
                            "ge", r.geometry, r.mesh_stats, {})


# -- submanifolds ----------------------------------------------------------------


def check_fwc(submanifold):
    """``int (|H|/n)^n >= |S^n|`` for a closed curve or surface.

    Curves use exterior turning angles, so a convex planar polygon gives
    exactly ``2 pi``.  Surfaces integrate ``(|H|/2)^2`` with the
    circumcentric dual areas that define the discrete ``H``.
    """
    if isinstance(submanifold, CurveMesh):
        if not submanifold.closed:
            raise MeshError("check_fwc needs a closed curve")
        lhs = math.fsum(submanifold.turning_angles)
        geo, stats = _mesh_info(submanifold)
        # polygonal total curvature is exact for convex curves
        tol = 1e-9
        return _report("fwc", lhs, sphere_area(1), tol, geo, stats)
    if not isinstance(submanifold, TriangleMesh) or isinstance(submanifold, DomainMesh):
        raise MeshError("check_fwc needs a curve or a surface in R^d, d >= 3")
    if not submanifold.closed:
        raise MeshError("check_fwc needs a closed surface")
    n = submanifold.intrinsic_dim
    H = np.linalg.norm(curvature(submanifold).H, axis=1)
    lhs = math.fsum(dual_area(submanifold) * (H / n) ** n)
    geo, stats = _mesh_info(submanifold)
    return _report("fwc", lhs, sphere_area(n), _mesh_tol(submanifold), geo, stats)


def check_michael_simon(surface, f=1.0, m=None):
    """Michael-Simon inequality with the sharp constant for codimension ``m >= 2``.

    ``int sqrt(|grad f|^2 + f^2 |H|^2) + int_bd f >= c(n, m) (int f^(n/(n-1)))^((n-1)/n)``.
    A hypersurface can be checked by first embedding it one dimension up
    (:func:`abpverify.mesh.embed`).
    """
    if not isinstance(surface, TriangleMesh):
        raise MeshError("check_michael_simon needs a triangulated surface")
    codim = surface.codim
    m = codim if m is None else int(m)
    if m < 2:
        raise ValueError(f"codimension m={m}: the sharp constant needs m >= 2; "
                         "embed the surface in one more dimension")
    if m != codim:
        raise ValueError(f"surface has codimension {codim}, not {m}")
    f = density_values(surface, f)
    n = surface.intrinsic_dim
    H = curvature(surface).H
    hf = np.linalg.norm(H[surface.triangles].mean(axis=1), axis=1)
    g = gradient(surface, f)
    ff = _face_mean(surface, f)
    bulk = np.sqrt(np.einsum("ij,ij->i", g, g) + ff ** 2 * hf ** 2)
    lhs = _face_integral(surface, bulk)
    if not surface.closed:
        lhs += boundary_integrate(surface, f)
    vol = _power_integral(surface, f, n / (n - 1))
    rhs = michael_simon_constant(n, m) * vol ** ((n - 1) / n)
    geo, stats = _mesh_info(surface)
    return _report("michael_simon", lhs, rhs, _mesh_tol(surface), geo, stats, m=m)


def _log_sobolev_terms(surface, f, curv):
    """Vertex data shared by both formulations."""
    area = dual_area(surface)
    grad = vertex_gradient(surface, f)
    H = curv.H
    return area, grad, H


def log_sobolev_sides(surface, f, curv=None):
    """Both sides of the log-Sobolev inequality with dual-area quadrature.

    Returns ``(lhs, rhs)`` with ``lhs = int f (log f + n + n/2 log 4 pi)
    - int |grad f|^2 / f - int f |H|^2`` and ``rhs = (int f) log(int f)``.
    """
    curv = curvature(surface) if curv is None else curv
    n = surface.intrinsic_dim
    area, grad, H = _log_sobolev_terms(surface, f, curv)
    g2 = np.einsum("ij,ij->i", grad, grad)
    h2 = np.einsum("ij,ij->i", H, H)
    pointwise = f * (np.log(f) + n + 0.5 * n * math.log(4 * math.pi)) - g2 / f - f * h2
    lhs = math.fsum(area * pointwise)
    mass = math.fsum(area * f)
    return lhs, mass * math.log(mass)


def gaussian_log_sobolev_sides(surface, phi, curv=None):
    """Both sides of the Gaussian-measure form for a density ``phi``.

    ``int phi log phi dg - int |grad phi|^2/phi dg - int phi |H + x_perp/2|^2 dg``
    against ``(int phi dg) log(int phi dg)``, where
    ``dg = (4 pi)^(-n/2) exp(-|x|^2/4) dvol``.
    """
    curv = curvature(surface) if curv is None else curv
    n = surface.intrinsic_dim
    x = surface.vertices
    area = dual_area(surface)
    gauss = (4 * math.pi) ** (-0.5 * n) * np.exp(-0.25 * np.einsum("ij,ij->i", x, x))
    nf = surface.vertex_normal_frame
    x_perp = np.einsum("nda,na->nd", nf, np.einsum("nda,nd->na", nf, x))
    grad = vertex_gradient(surface, phi)
    g2 = np.einsum("ij,ij->i", grad, grad)
    w = curv.H + 0.5 * x_perp
    pointwise = phi * np.log(phi) - g2 / phi - phi * np.einsum("ij,ij->i", w, w)
    lhs = math.fsum(area * gauss * pointwise)
    mass = math.fsum(area * gauss * phi)
    return lhs, mass * math.log(mass)


def check_log_sobolev(surface, f=1.0):
    """``lhs <= (int f) log(int f)`` on a closed surface.

    The Gaussian-measure form is evaluated as well with
    ``phi = (4 pi)^(n/2) exp(|x|^2/4) f``; its margin and the relative
    disagreement between the two margins are reported in ``extra``.
    """
    if not isinstance(surface, TriangleMesh) or isinstance(surface, DomainMesh):
        raise MeshError("check_log_sobolev needs a surface mesh")
    if not surface.closed:
        raise MeshError("check_log_sobolev needs a closed surface")
    f = density_values(surface, f)
    n = surface.intrinsic_dim
    curv = curvature(surface)
    lhs, rhs = log_sobolev_sides(surface, f, curv)
    x2 = np.einsum("ij,ij->i", surface.vertices, surface.vertices)
    phi = (4 * math.pi) ** (0.5 * n) * np.exp(0.25 * x2) * f
    glhs, grhs = gaussian_log_sobolev_sides(surface, phi, curv)
    margin, gmargin = rhs - lhs, grhs - glhs
    agreement = abs(margin - gmargin) / max(abs(margin), abs(gmargin), 1e-300)
    geo, stats = _mesh_info(surface)
    scale = max(abs(lhs), abs(rhs))
    # the band is relative to the sides; express the h^2 term relative to int f
    mass = math.fsum(dual_area(surface) * f)
    tol = _mesh_tol(surface) * max(1.0, mass / max(scale, 1e-300))
    return _report("log_sobolev", lhs, rhs, tol, geo, stats, direction="le",
                   gaussian_lhs=glhs, gaussian_rhs=grhs, gaussian_margin=gmargin,
                   form_agreement=agreement)


# -- model manifolds ---------------------------------------------------------------


@dataclass(frozen=True)
class RevolutionDomain:
    """``{inner < r < outer}`` about the pole; ``inner = 0`` is a geodesic ball."""

    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValueError("revolution domain needs 0 <= inner < outer")


def _model_info(model, **kw):
    d = {"kind": "WarpedModel", "name": f"{model.kind}(n={model.n}, alpha={model.alpha})"}
    d.update(model.describe())
    d.update(kw)
    return d


def check_riemannian_isoperimetric(model, domain):
    """``|bd D| >= n |B^n|^(1/n) theta^(1/n) |D|^((n-1)/n)`` for domains of revolution."""
    if isinstance(domain, (tuple, list)):
        domain = RevolutionDomain(*domain)
    n = model.n
    if domain.outer > model.r_max:
        raise ValueError("domain leaves the model grid")
    lhs = model.sphere_area(domain.outer)
    if domain.inner > 0:
        lhs += model.sphere_area(domain.inner)
    vol = model.shell_volume(domain.inner, domain.outer)
    theta = comparison.asymptotic_volume_ratio(model)
    rhs = n * ball_volume(n) ** (1 / n) * theta ** (1 / n) * vol ** ((n - 1) / n)
    geo = _model_info(model, inner=domain.inner, outer=domain.outer)
    return _report("riemannian_isoperimetric", lhs, rhs, RIEMANNIAN_TOL, geo,
                   {"theta": theta, "volume": vol})


def check_riemannian_fwc(model, radius):
    """``int (|H|/(n-1))^(n-1) >= |S^(n-1)| theta`` on a centred geodesic sphere."""
    if not 0 < radius <= model.r_max:
        raise ValueError("sphere radius outside the model grid")
    n = model.n
    hbar = model.mean_curvature(radius) / (n - 1)
    lhs = model.sphere_area(radius) * hbar ** (n - 1)
    theta = comparison.asymptotic_volume_ratio(model)
    rhs = sphere_area(n - 1) * theta
    geo = _model_info(model, radius=radius)
    return _report("riemannian_fwc", lhs, rhs, RIEMANNIAN_TOL, geo,
                   {"theta": theta, "mean_curvature": model.mean_curvature(radius)})


def normal_segment_integral(n, r, h_nu):
    """``int_{-1}^{1} r (1 - r s h_nu / (n-1))_+^(n-1) ds`` in closed form.

    ``h_nu`` is the mean curvature paired with the unit normal.
    """
    a = -r * h_nu / (n - 1)
    if abs(a) < 1e-12:
        return 2.0 * r
    a_abs = abs(a)
    return r * ((1 + a_abs) ** n - max(1 - a_abs, 0.0) ** n) / (n * a_abs)


def check_heintze_karcher_tube(model, radius, r):
    """Tube volume ``|{d(., Sigma) < r}|`` against the Jacobian bound integrated over ``Sigma``."""
    cfg = radius if isinstance(radius, comparison.TubeConfig) else \
        comparison.TubeConfig(model, float(radius), float(r))
    lhs = comparison.tube_volume(cfg)
    n = model.n
    rhs = model.sphere_area(cfg.rho0) * normal_segment_integral(n, cfg.r, cfg.mean_curvature)
    geo = _model_info(model, rho0=cfg.rho0, r=cfg.r)
    return _report("heintze_karcher", lhs, rhs, RIEMANNIAN_TOL, geo,
                   {"mean_curvature": cfg.mean_curvature}, direction="le")


def radial_sobolev_sides(f_profile, df_profile, radius=1.0):
    """Both Sobolev sides for a radial density on the planar disk, by quadrature."""
    lhs = quad(lambda s: 2 * math.pi * s * abs(df_profile(s)), 0, radius,
               epsabs=0, epsrel=1e-12, limit=200)[0] + 2 * math.pi * radius * f_profile(radius)
    vol = quad(lambda s: 2 * math.pi * s * f_profile(s) ** 2, 0, radius,
               epsabs=0, epsrel=1e-12, limit=200)[0]
    return lhs, 2 * math.sqrt(math.pi) * math.sqrt(vol)


CHECKERS = {
    "sobolev_euclidean": check_sobolev_euclidean,
    "isoperimetric": check_isoperimetric,
    "fwc": check_fwc,
    "michael_simon": check_michael_simon,
    "log_sobolev": check_log_sobolev,
    "riemannian_isoperimetric": check_riemannian_isoperimetric,
    "riemannian_fwc": check_riemannian_fwc,
    "heintze_karcher": check_heintze_karcher_tube,
}

__all__ = [
    "CHECKERS", "InequalityReport", "RevolutionDomain", "THEOREMS",
    "check_fwc", "check_heintze_karcher_tube", "check_isoperimetric", "check_log_sobolev",
    "check_michael_simon", "check_riemannian_fwc", "check_riemannian_isoperimetric",
    "check_sobolev_euclidean", "density_values", "gaussian_log_sobolev_sides",
    "log_sobolev_sides", "normal_segment_integral", "radial_sobolev_sides", "reports_to_csv",
]
