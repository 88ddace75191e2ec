"""Differential operators and quadrature on meshes."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .core import CurveMesh, MeshError, TriangleMesh


def _as_vertex_field(mesh, field):
    f = np.asarray(field, dtype=float)
    if f.shape[:1] != (mesh.n_vertices,):
        raise MeshError(f"field has {f.shape[:1]} entries, mesh has {mesh.n_vertices} vertices")
    return f


def integrate(mesh, field):
    """Vertex-lumped quadrature; exact for piecewise-linear fields."""
    f = _as_vertex_field(mesh, field)
    return math.fsum(mesh.vertex_mass * f)


def boundary_integrate(mesh, field):
    """Trapezoidal quadrature over the boundary loops of a triangle mesh."""
    f = _as_vertex_field(mesh, field)
    return math.fsum(mesh.boundary_mass * f)


def gradient(mesh, field):
    """Per-face gradient of the piecewise-linear interpolant.

    Returns an ``(F, d)`` array of ambient vectors tangent to each face.
    """
    if not isinstance(mesh, TriangleMesh):
        raise MeshError("gradient needs a triangle mesh")
    f = _as_vertex_field(mesh, field)
    t = mesh.triangles
    p = mesh.vertices[t]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    g11 = np.einsum("ij,ij->i", e1, e1)
    g12 = np.einsum("ij,ij->i", e1, e2)
    g22 = np.einsum("ij,ij->i", e2, e2)
    det = g11 * g22 - g12 * g12
    if np.any(det <= 0):
        raise MeshError("degenerate face in gradient")
    d1 = f[t[:, 1]] - f[t[:, 0]]
    d2 = f[t[:, 2]] - f[t[:, 0]]
    a = (g22 * d1 - g12 * d2) / det
    b = (g11 * d2 - g12 * d1) / det
    return a[:, None] * e1 + b[:, None] * e2


def face_to_vertex(mesh, face_values):
    """Area-weighted average of per-face values onto vertices."""
    fv = np.asarray(face_values, dtype=float)
    w = mesh.face_areas
    acc = np.zeros((mesh.n_vertices,) + fv.shape[1:])
    np.add.at(acc, mesh.triangles.ravel(),
              np.repeat(fv * w.reshape((-1,) + (1,) * (fv.ndim - 1)), 3, axis=0))
    tot = np.zeros(mesh.n_vertices)
    np.add.at(tot, mesh.triangles.ravel(), np.repeat(w, 3))
    return acc / tot.reshape((-1,) + (1,) * (fv.ndim - 1))


def vertex_gradient(mesh, field):
    """Area-averaged face gradients, projected onto the vertex tangent plane."""
    g = face_to_vertex(mesh, gradient(mesh, field))
    t = mesh.vertex_tangent_frame
    return np.einsum("nij,nj->ni", t, np.einsum("nji,nj->ni", t, g))


@dataclass(frozen=True)
class QuadraticFit:
    """Per-vertex quadratic fits in the vertex tangent frame.

    ``gradient`` has shape ``(N, k)`` and ``hessian`` ``(N, k, k)`` (tangent
    coordinates; ``k`` is the intrinsic dimension).  ``valid`` flags
    vertices whose patch was well conditioned.
    """

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray
    valid: np.ndarray


def _patch_system(mesh):
    """Padded 2-ring patches in tangent coordinates, cached on the mesh."""
    cache = mesh.__dict__.get("_patch_cache")
    if cache is not None:
        return cache
    indptr, indices = mesh.two_ring
    n = mesh.n_vertices
    counts = np.diff(indptr)
    kmax = int(counts.max()) + 1
    nbr = np.zeros((n, kmax), dtype=np.int64)
    wmask = np.zeros((n, kmax))
    nbr[:, 0] = np.arange(n)
    wmask[:, 0] = 1.0
    rows = np.repeat(np.arange(n), counts)
    cols = np.arange(len(indices)) - np.repeat(indptr[:-1], counts) + 1
    nbr[rows, cols] = indices
    wmask[rows, cols] = 1.0
    rel = mesh.vertices[nbr] - mesh.vertices[:, None, :]
    local = np.einsum("nkd,ndj->nkj", rel, mesh.vertex_tangent_frame)
    dist2 = np.einsum("nkd,nkd->nk", rel, rel)
    scale = np.sqrt(np.sum(dist2 * wmask, axis=1) / np.maximum(counts, 1))
    s = local / scale[:, None, None]
    w = wmask / (1.0 + dist2 / scale[:, None] ** 2)
    x, y = s[..., 0], s[..., 1]
    design = np.stack([np.ones_like(x), x, y, 0.5 * x * x, x * y, 0.5 * y * y], axis=-1)
    normal = np.einsum("nk,nki,nkj->nij", w, design, design)
    ev = np.linalg.eigvalsh(normal)
    valid = (counts >= 6) & (ev[:, 0] > 1e-9 * ev[:, -1])
    normal[~valid] += np.eye(6)
    cache = (nbr, w, design, np.linalg.inv(normal), scale, valid, rel)
    mesh.__dict__["_patch_cache"] = cache
    return cache


def quadratic_fit(mesh, values):
    """Weighted least-squares quadratic fit of vertex values over 2-rings.

    ``values`` may carry trailing dimensions; they are fitted independently.
    """
    if not isinstance(mesh, TriangleMesh):
        raise MeshError("quadratic fitting needs a triangle mesh")
    vals = _as_vertex_field(mesh, values)
    nbr, w, design, inv, scale, valid, _ = _patch_system(mesh)
    flat = vals.reshape(len(vals), -1)
    rhs = np.einsum("nk,nki,nkc->nic", w, design, flat[nbr])
    coef = np.einsum("nij,njc->nic", inv, rhs)
    s1 = scale[:, None]
    s2 = (scale ** 2)[:, None]
    grad = np.stack([coef[:, 1], coef[:, 2]], axis=1) / s1[:, None]
    hess = np.stack([np.stack([coef[:, 3], coef[:, 4]], axis=1),
                     np.stack([coef[:, 4], coef[:, 5]], axis=1)], axis=1) / s2[:, None, None]
    tail = vals.shape[1:]
    return QuadraticFit(
        value=coef[:, 0].reshape((len(vals),) + tail),
        gradient=np.moveaxis(grad, -1, 1).reshape((len(vals),) + tail + (2,)),
        hessian=np.moveaxis(hess, -1, 1).reshape((len(vals),) + tail + (2, 2)),
        valid=valid.copy(),
    )


def hessian_recover(mesh, field):
    """Symmetric Hessian per vertex (tangent frame) from 2-ring quadratic fits."""
    return quadratic_fit(mesh, field)


@dataclass(frozen=True)
class CurvatureData:
    """Mean curvature vector and second fundamental form per vertex.

    ``H`` is an ``(N, d)`` ambient vector with ``H = Laplacian(x)`` (points
    inward on a sphere, ``|H| = n/R``).  ``II[i, a]`` is the ``k x k`` matrix
    ``<II, nu_a>`` in the tangent frame of vertex ``i``.
    """

    H: np.ndarray
    II: np.ndarray
    valid: np.ndarray

    def trace_vector(self, normal_frame):
        tr = np.trace(self.II, axis1=-2, axis2=-1)
        return np.einsum("nda,na->nd", normal_frame, tr)


def _cotangents(mesh):
    """Cotangent of the angle at corner k of every face, shape (F, 3)."""
    p = mesh.vertices[mesh.triangles]
    out = np.empty((mesh.n_faces, 3))
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        out[:, k] = np.einsum("ij,ij->i", a, b) / (2.0 * mesh.face_areas)
    return out


def cotan_laplacian(mesh, face_weight=None):
    """Cotangent stiffness form ``L`` with ``(L x)_i = sum_j w_ij (x_j - x_i)``.

    With ``face_weight`` (one positive value per face) each face's
    contribution is scaled, giving the P1 form of ``div(f grad)``.
    """
    t = mesh.triangles
    cot = _cotangents(mesh)
    if face_weight is not None:
        cot = cot * np.asarray(face_weight, dtype=float)[:, None]
    i = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    j = np.concatenate([t[:, 2], t[:, 0], t[:, 1]])
    w = 0.5 * cot.T.ravel()
    n = mesh.n_vertices
    off = sparse.coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]),
                                                       np.concatenate([j, i]))),
                            shape=(n, n)).tocsr()
    return off - sparse.diags(np.asarray(off.sum(axis=1)).ravel())


def dual_area(mesh):
    """Circumcentric dual-cell area per vertex.

    Pairs with the cotangent weights so that ``L |x|^2 / 2`` equals ``n``
    times the dual area at interior vertices of flat meshes.  If some cell
    comes out nonpositive (badly obtuse meshes) the mixed-area variant is
    used instead, which moves obtuse-face shares to the obtuse corner.
    """
    cached = mesh.__dict__.get("_dual_area")
    if cached is not None:
        return cached
    t = mesh.triangles
    p = mesh.vertices[t]
    cot = _cotangents(mesh)
    contrib = np.empty((mesh.n_faces, 3))
    for k in range(3):
        l_next = np.sum((p[:, (k + 1) % 3] - p[:, k]) ** 2, axis=1)
        l_prev = np.sum((p[:, (k + 2) % 3] - p[:, k]) ** 2, axis=1)
        contrib[:, k] = (l_next * cot[:, (k + 2) % 3] + l_prev * cot[:, (k + 1) % 3]) / 8.0
    m = np.zeros(mesh.n_vertices)
    np.add.at(m, t.ravel(), contrib.ravel())
    if np.any(m <= 0):
        obtuse = cot < 0
        bad = obtuse.any(axis=1)
        contrib[bad] = np.where(obtuse[bad], 0.5, 0.25) * mesh.face_areas[bad, None]
        m = np.zeros(mesh.n_vertices)
        np.add.at(m, t.ravel(), contrib.ravel())
    m.setflags(write=False)
    mesh.__dict__["_dual_area"] = m
    return m


def curvature(mesh):
    """Mean curvature vector and second fundamental form.

    Triangle meshes: ``H`` is the cotangent Laplacian of the position
    divided by the circumcentric dual area, projected to the normal
    space; ``II`` comes from quadric fits of the normal heights over the
    2-ring.  Boundary vertices take ``H`` as the trace of the fitted ``II``
    since the one-sided Laplacian is inconsistent there.  Curves use the
    turning angle over the dual length along the discrete principal normal.
    """
    if isinstance(mesh, CurveMesh):
        return _curve_curvature(mesh)
    nf = mesh.vertex_normal_frame
    n, d, m = nf.shape
    if m == 0:
        return CurvatureData(np.zeros((n, d)), np.zeros((n, 0, 2, 2)), np.ones(n, dtype=bool))
    lap = cotan_laplacian(mesh) @ mesh.vertices / dual_area(mesh)[:, None]
    hn = np.einsum("nda,nd->na", nf, lap)
    _, w, design, inv, scale, valid, rel = _patch_system(mesh)
    heights = np.einsum("nkd,nda->nka", rel, nf)
    coef = np.einsum("nij,nja->nia", inv, np.einsum("nk,nki,nka->nia", w, design, heights))
    s2 = (scale ** 2)[:, None]
    ii = np.empty((n, m, 2, 2))
    ii[:, :, 0, 0] = coef[:, 3] / s2
    ii[:, :, 0, 1] = ii[:, :, 1, 0] = coef[:, 4] / s2
    ii[:, :, 1, 1] = coef[:, 5] / s2
    bnd = mesh.boundary_mask
    hn[bnd] = np.trace(ii[bnd], axis1=-2, axis2=-1)
    H = np.einsum("nda,na->nd", nf, hn)
    return CurvatureData(H, ii, valid.copy())


def _curve_curvature(mesh):
    prev, nxt = mesh._incident
    ok = (prev >= 0) & (nxt >= 0)
    u = mesh._unit_edges
    n, d = mesh.vertices.shape
    H = np.zeros((n, d))
    turn = np.zeros((n, d))
    turn[ok] = u[nxt[ok]] - u[prev[ok]]
    norm = np.linalg.norm(turn, axis=1)
    bend = ok & (norm > 0)
    H[bend] = (mesh.turning_angles[bend] / mesh.vertex_mass[bend])[:, None] * (
        turn[bend] / norm[bend][:, None])
    nf = mesh.vertex_normal_frame
    ii = np.einsum("nda,nd->na", nf, H)[:, :, None, None]
    return CurvatureData(H, ii, ok)
