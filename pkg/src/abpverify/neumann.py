"""Density normalisation and weighted Neumann solves for the ABP potential.

The potential ``u`` solves ``div(f grad u) = rho`` with the weighted flux
``f <grad u, eta> = f`` on the boundary (open case) or no boundary term
(closed surfaces).  Discretisation is P1 finite elements with the
cotangent stiffness weighted by the face mean of ``f``; the load is lumped
on circumcentric dual cells, which makes the f = const disk problem exact
at the nodes.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .mesh import (CurvatureData, CurveMesh, MeshError, TriangleMesh,
                   cotan_laplacian, curvature, dual_area, face_to_vertex, gradient, integrate,
                   quadratic_fit, vertex_gradient)

MODES = ("sobolev", "michael_simon", "log_sobolev")

COMPAT_TOL = 1e-8
RENORMALIZE_TOL = 1e-4


class IncompatibleDataError(ValueError):
    """The load and the boundary flux violate the divergence theorem."""


class SolverError(RuntimeError):
    """The linear solver hit its iteration cap."""


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")


def _check_geometry(geometry, mode):
    if isinstance(geometry, CurveMesh) or not isinstance(geometry, TriangleMesh):
        raise MeshError("Neumann problems need a triangulated domain or surface")
    if mode == "sobolev" and geometry.ambient_dim != 2:
        raise MeshError("sobolev mode needs a planar domain mesh")
    if mode in ("michael_simon", "log_sobolev") and geometry.ambient_dim < 3:
        raise MeshError(f"{mode} mode needs a surface mesh in R^3 or R^4")
    if mode == "log_sobolev" and not geometry.closed:
        raise MeshError("log_sobolev mode needs a closed surface")


def _positive(geometry, f):
    f = np.asarray(f, dtype=float)
    if f.shape != (geometry.n_vertices,):
        raise MeshError(f"density has shape {f.shape}, expected ({geometry.n_vertices},)")
    if not np.all(np.isfinite(f)) or np.any(f <= 0):
        raise ValueError("density must be positive and finite")
    return f


def _lumped(geometry, values):
    return math.fsum(dual_area(geometry) * values)


def grad_norm(geometry, f):
    """Vertex values of ``|grad f|`` (tangential on surfaces) from face gradients."""
    if geometry.ambient_dim == 2:
        g = face_to_vertex(geometry, gradient(geometry, f))
    else:
        g = vertex_gradient(geometry, f)
    return np.linalg.norm(g, axis=1)


def _h_squared(geometry, curv):
    if curv is None:
        curv = curvature(geometry)
    if not isinstance(curv, CurvatureData) or curv.H.shape[0] != geometry.n_vertices:
        raise ValueError("curvature data does not match the geometry")
    return np.einsum("nd,nd->n", curv.H, curv.H)


@dataclass(frozen=True)
class _Terms:
    """Vertex fields shared by normalisation and right-hand side."""

    f: np.ndarray
    grad: np.ndarray
    h2: np.ndarray


def _terms(geometry, f, mode, curv):
    g = grad_norm(geometry, f)
    h2 = np.zeros_like(f) if mode == "sobolev" else _h_squared(geometry, curv)
    return _Terms(f, g, h2)


def _boundary_flux_integral(geometry, f):
    return math.fsum(geometry.boundary_mass * f) if not geometry.closed else 0.0


def normalization_sides(geometry, f, mode, curv=None):
    """Both sides of the normalisation condition evaluated at ``f``.

    For ``sobolev`` and ``michael_simon`` the left side is 1-homogeneous
    and the right side ``n int f^(n/(n-1))`` is ``n/(n-1)``-homogeneous.
    For ``log_sobolev`` the pair is ``(int f log f, int f^-1|grad f|^2 +
    int f|H|^2)``.
    """
    _check_mode(mode)
    _check_geometry(geometry, mode)
    f = _positive(geometry, f)
    t = _terms(geometry, f, mode, curv)
    n = geometry.intrinsic_dim
    if mode == "log_sobolev":
        return (_lumped(geometry, f * np.log(f)),
                _lumped(geometry, t.grad ** 2 / f + f * t.h2))
    bulk = np.sqrt(t.grad ** 2 + f ** 2 * t.h2)
    lhs = _lumped(geometry, bulk) + _boundary_flux_integral(geometry, f)
    rhs = n * _lumped(geometry, f ** (n / (n - 1)))
    return lhs, rhs


def normalization_constant(geometry, f, mode, curv=None):
    """The unique ``c > 0`` for which ``c f`` satisfies the normalisation."""
    lhs, rhs = normalization_sides(geometry, f, mode, curv)
    if mode == "log_sobolev":
        mass = _lumped(geometry, np.asarray(f, dtype=float))
        return math.exp((rhs - lhs) / mass)
    if lhs <= 0 or rhs <= 0:
        raise ValueError("normalisation integrals vanish")
    n = geometry.intrinsic_dim
    return (lhs / rhs) ** (n - 1)


def normalize_density(geometry, f, mode, curv=None):
    """Return ``c f`` with ``c`` from :func:`normalization_constant`.

    Examples
    --------
    On the unit disk ``f = 2`` normalises to ``1`` in ``sobolev`` mode; on
    the unit sphere ``f = 1`` normalises to ``e^4`` in ``log_sobolev`` mode.
    """
    return normalization_constant(geometry, f, mode, curv) * _positive(geometry, f)


@dataclass(frozen=True)
class RightHandSide:
    """Vertex load ``rho`` plus its divergence-theorem bookkeeping."""

    values: np.ndarray
    load_integral: float
    flux_integral: float
    scale: float

    @property
    def compatibility_residual(self):
        return abs(self.load_integral - self.flux_integral)

    @property
    def relative_residual(self):
        return self.compatibility_residual / self.scale if self.scale > 0 else 0.0


def build_rhs(geometry, f, mode, curv=None):
    """Right-hand side ``rho`` of the potential equation for ``mode``.

    ``sobolev``: ``n f^(n/(n-1)) - |grad f|``; ``michael_simon``: ``n
    f^(n/(n-1)) - sqrt(|grad f|^2 + f^2 |H|^2)``; ``log_sobolev``: ``f log
    f - |grad f|^2 / f - f |H|^2``.  Curvature is computed from the mesh
    when not supplied.
    """
    _check_mode(mode)
    _check_geometry(geometry, mode)
    f = _positive(geometry, f)
    t = _terms(geometry, f, mode, curv)
    n = geometry.intrinsic_dim
    if mode == "sobolev":
        rho = n * f ** (n / (n - 1)) - t.grad
    elif mode == "michael_simon":
        rho = n * f ** (n / (n - 1)) - np.sqrt(t.grad ** 2 + f ** 2 * t.h2)
    else:
        rho = f * np.log(f) - t.grad ** 2 / f - f * t.h2
    flux = _boundary_flux_integral(geometry, f)
    load = _lumped(geometry, rho)
    scale = _lumped(geometry, np.abs(rho)) + flux
    return RightHandSide(rho, load, flux, scale)


@dataclass(frozen=True)
class NeumannProblem:
    """``div(f grad u) = rho`` with weighted flux ``f <grad u, eta> = g``.

    ``boundary_flux`` is ``"weight"`` (``g = f``, the ABP boundary
    condition), a callable ``g(points, conormals)`` evaluated at the ends
    of each boundary edge, or ``None`` on closed surfaces.
    """

    geometry: TriangleMesh
    weight: np.ndarray
    rhs: np.ndarray
    boundary_flux: object = "weight"
    mode: str = "sobolev"

    @classmethod
    def from_density(cls, geometry, f, mode, curv=None, normalize=True):
        """Normalise ``f`` (optionally) and assemble the ABP problem for ``mode``."""
        if normalize:
            f = normalize_density(geometry, f, mode, curv)
        rhs = build_rhs(geometry, f, mode, curv)
        return cls(geometry, np.asarray(f, dtype=float), rhs.values,
                   None if geometry.closed else "weight", mode)

    def boundary_load(self):
        """Per-vertex boundary contributions ``int_bd g phi_i`` (trapezoid per edge)."""
        geo = self.geometry
        out = np.zeros(geo.n_vertices)
        if geo.closed:
            if self.boundary_flux not in (None, "weight"):
                raise ValueError("closed geometry takes no boundary flux")
            return out
        be = geo.boundary_edges
        half = 0.5 * geo.boundary_edge_lengths
        if self.boundary_flux is None:
            raise ValueError("open geometry needs a boundary flux")
        if isinstance(self.boundary_flux, str):
            if self.boundary_flux != "weight":
                raise ValueError(f"unknown boundary flux {self.boundary_flux!r}")
            ga, gb = self.weight[be[:, 0]], self.weight[be[:, 1]]
        else:
            eta = geo.boundary_conormal
            ga = np.asarray(self.boundary_flux(geo.vertices[be[:, 0]], eta), dtype=float)
            gb = np.asarray(self.boundary_flux(geo.vertices[be[:, 1]], eta), dtype=float)
        np.add.at(out, be[:, 0], half * ga)
        np.add.at(out, be[:, 1], half * gb)
        return out

    def compatibility(self):
        """``(residual, scale)`` of ``int rho = int_bd g`` in the solver's quadrature."""
        mass = dual_area(self.geometry)
        bl = self.boundary_load()
        load = math.fsum(mass * self.rhs)
        flux = math.fsum(bl)
        scale = math.fsum(mass * np.abs(self.rhs)) + math.fsum(np.abs(bl))
        return abs(load - flux), scale


@dataclass(frozen=True)
class PotentialSolution:
    """Discrete potential with its derivatives and solver diagnostics.

    ``grad_u`` is per face (ambient vectors).  ``vertex_grad`` and
    ``hess_u`` come from 2-ring quadratic fits and are expressed in the
    vertex tangent frame.  ``excluded`` marks vertices whose Hessian is
    unreliable (ill-conditioned patch or within two rings of a corner).
    """

    problem: NeumannProblem
    u: np.ndarray
    grad_u: np.ndarray
    vertex_grad: np.ndarray
    hess_u: np.ndarray
    excluded: np.ndarray
    residual_norm: float
    compatibility_residual: float
    iterations: int
    renormalized: bool
    info: dict = field(default_factory=dict)

    @property
    def geometry(self):
        return self.problem.geometry

    def diagnostics(self):
        return {
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "compatibility_residual": self.compatibility_residual,
            "renormalized": self.renormalized,
            "excluded_vertices": int(self.excluded.sum()),
        }

    def shifted(self, constant):
        """Same solution with ``constant`` added to ``u`` (gauge change)."""
        from dataclasses import replace
        return replace(self, u=self.u + constant)


def _stiffness(geometry, f):
    face_f = f[geometry.triangles].mean(axis=1)
    return (-cotan_laplacian(geometry, face_f)).tocsr()


def solve(problem, rtol=1e-10, maxiter=None):
    """P1 solve of the weighted Neumann problem in the mean-zero gauge.

    Raises
    ------
    IncompatibleDataError
        If the compatibility residual exceeds ``1e-4`` of the data scale.
        Residuals between ``1e-8`` and ``1e-4`` are projected away (the
        load is shifted by a constant) and flagged as ``renormalized``.
    SolverError
        If conjugate gradients does not reach ``rtol`` within ``maxiter``.
    """
    geo = problem.geometry
    f = _positive(geo, problem.weight)
    rho = np.asarray(problem.rhs, dtype=float)
    if rho.shape != (geo.n_vertices,):
        raise MeshError("right-hand side does not match the mesh")
    residual, scale = problem.compatibility()
    rel = residual / scale if scale > 0 else 0.0
    if rel > RENORMALIZE_TOL:
        raise IncompatibleDataError(
            f"compatibility residual {residual:.3e} is {rel:.2e} of the data scale; "
            "was the density normalised?")
    renormalized = rel > COMPAT_TOL
    mass = dual_area(geo)
    b = problem.boundary_load() - mass * rho
    b -= mass * (math.fsum(b) / math.fsum(mass))
    k = _stiffness(geo, f)
    n = geo.n_vertices
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        u, iters, res = np.zeros(n), 0, 0.0
    else:
        dinv = 1.0 / k.diagonal()
        precond = LinearOperator((n, n), matvec=lambda x: dinv * x, dtype=float)
        count = [0]

        def _tick(_):
            count[0] += 1

        cap = maxiter if maxiter is not None else max(2000, 4 * n)
        u, info = cg(k, b, rtol=rtol, atol=0.0, maxiter=cap, M=precond, callback=_tick)
        iters = count[0]
        res = float(np.linalg.norm(k @ u - b) / bnorm)
        if info > 0 and res > 10 * rtol:
            raise SolverError(f"conjugate gradients stopped after {iters} iterations "
                              f"with relative residual {res:.2e}")
    u = u - integrate(geo, u) / geo.area
    fit = quadratic_fit(geo, u)
    excluded = ~fit.valid
    if geo.ambient_dim == 2:
        excluded = excluded | geo.near_corner_mask
    return PotentialSolution(
        problem=problem,
        u=u,
        grad_u=gradient(geo, u),
        vertex_grad=fit.gradient,
        hess_u=fit.hessian,
        excluded=excluded,
        residual_norm=res,
        compatibility_residual=residual,
        iterations=iters,
        renormalized=bool(renormalized),
        info={"relative_compatibility": rel, "cg_rtol": rtol},
    )


def solve_density(geometry, f, mode, curv=None, normalize=True, **kw):
    """Normalise, assemble and solve in one call."""
    return solve(NeumannProblem.from_density(geometry, f, mode, curv, normalize), **kw)


# -- radial oracle -----------------------------------------------------------


@dataclass(frozen=True)
class RadialSolution:
    """Radial potential ``u(r)`` on ``[0, 1]`` with ``u(0) = 0``.

    ``flux_residual`` is ``u'(1) - 1``: zero when the data are normalised
    on the true ball.
    """

    n: int
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    constant: float
    flux_residual: float

    def __call__(self, radius):
        from scipy.interpolate import CubicHermiteSpline
        return CubicHermiteSpline(self.r, self.u, self.du)(np.asarray(radius, dtype=float))

    def derivative(self, radius):
        from scipy.interpolate import CubicHermiteSpline
        return CubicHermiteSpline(self.r, self.u, self.du).derivative()(
            np.asarray(radius, dtype=float))


_RADIAL_NODES = 48


def _derivative(fun, r, step=1e-5):
    return (fun(r + step) - fun(r - step)) / (2 * step) if r > step else (fun(r + step) - fun(r)) / step


def solve_radial(n, f_profile, samples=2001, rho_profile=None, df_profile=None,
                 scale=None):
    """Radial reduction ``(r^(n-1) f u')' = r^(n-1) rho`` on the unit ball.

    Without ``rho_profile`` the density ``scale * f`` is used with the
    sobolev right-hand side ``n f^(n/(n-1)) - |f'|``; ``scale`` defaults to
    the normalisation constant on the ball.  The slope is ``u' = y /
    (r^(n-1) f)`` with ``y = int_0^r s^(n-1) rho``; ``y`` is evaluated by
    Gauss-Legendre quadrature and ``u`` by fourth-order (Simpson) steps.

    Parameters
    ----------
    n : int
        Dimension of the ball, ``n >= 2``.
    f_profile : callable
        Positive density as a function of the radius.
    samples : int
        Number of grid points including both ends.
    """
    if n < 2:
        raise ValueError("radial reduction needs n >= 2")
    if samples < 11:
        raise ValueError("too few samples")
    grid = np.linspace(0.0, 1.0, int(samples))
    fvals = np.array([f_profile(r) for r in grid], dtype=float)
    if not np.all(np.isfinite(fvals)) or np.any(fvals <= 0):
        raise ValueError("radial profile must be positive on [0, 1]")

    if rho_profile is None:
        dfun = df_profile if df_profile is not None else (lambda r: _derivative(f_profile, r))
        if scale is None:
            from scipy.integrate import quad
            p = n / (n - 1)
            lhs = quad(lambda r: r ** (n - 1) * abs(dfun(r)), 0, 1, limit=200)[0] + f_profile(1.0)
            rhs = n * quad(lambda r: r ** (n - 1) * f_profile(r) ** p, 0, 1, limit=200)[0]
            scale = (lhs / rhs) ** (n - 1)
        c = float(scale)

        def fun(r):
            return c * f_profile(r)

        def rho(r):
            return n * fun(r) ** (n / (n - 1)) - c * abs(dfun(r))
    else:
        c = 1.0 if scale is None else float(scale)

        def fun(r):
            return c * f_profile(r)

        rho = rho_profile

    # u'(r) = r G(r) / f(r) with G(r) = int_0^1 t^(n-1) rho(r t) dt, which
    # removes the 0/0 at the centre; u then follows by RK4 (Simpson) steps
    nodes, weights = np.polynomial.legendre.leggauss(_RADIAL_NODES)
    t = 0.5 * (nodes + 1.0)
    tw = 0.5 * weights * t ** (n - 1)

    def slope(r):
        if r == 0.0:
            return 0.0
        return r * math.fsum(tw * np.array([rho(r * ti) for ti in t])) / fun(r)

    step = grid[1] - grid[0]
    du = np.array([slope(r) for r in grid])
    mid = np.array([slope(r + 0.5 * step) for r in grid[:-1]])
    u = np.concatenate([[0.0], np.cumsum(step / 6 * (du[:-1] + 4 * mid + du[1:]))])
    return RadialSolution(n, grid, u, du, c, float(du[-1] - 1.0))


__all__ = [
    "COMPAT_TOL", "IncompatibleDataError", "MODES", "NeumannProblem", "PotentialSolution",
    "RadialSolution", "RightHandSide", "SolverError", "build_rhs", "grad_norm",
    "normalization_constant", "normalization_sides", "normalize_density", "solve",
    "solve_density", "solve_radial",
]
