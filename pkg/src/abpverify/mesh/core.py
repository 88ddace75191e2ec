"""Triangle and polyline meshes with frames and boundary data."""

from functools import cached_property

import numpy as np
from scipy import sparse


class MeshError(ValueError):
    """Invalid mesh connectivity or geometry."""


def _face_frames(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - p0
    e2 = vertices[triangles[:, 2]] - p0
    g11 = np.einsum("ij,ij->i", e1, e1)
    g12 = np.einsum("ij,ij->i", e1, e2)
    g22 = np.einsum("ij,ij->i", e2, e2)
    return e1, e2, g11, g12, g22


class TriangleMesh:
    """Oriented triangle mesh of a 2-dimensional domain or surface.

    Vertex positions live in R^d with ``d = 2`` (planar domain) or
    ``d in {3, 4}`` (embedded surface).  Instances are treated as
    immutable; derived quantities are cached on first access.
    """

    intrinsic_dim = 2

    def __init__(self, vertices, triangles, name=""):
        v = np.array(vertices, dtype=float)
        t = np.array(triangles, dtype=np.int64)
        if v.ndim != 2 or t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("expected vertices (N, d) and triangles (F, 3)")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise MeshError("triangle with repeated vertex")
        v.setflags(write=False)
        t.setflags(write=False)
        self.vertices = v
        self.triangles = t
        self.name = name
        self._validate()

    # -- validation ---------------------------------------------------------

    def _validate(self):
        areas = self.face_areas
        if np.any(~(areas > 1e-14 * max(self.extent, 1e-300) ** 2)):
            bad = int(np.argmin(areas))
            raise MeshError(f"degenerate triangle {bad} (area {areas[bad]:.3e})")
        directed = self._directed_edges
        key = directed[:, 0] * len(self.vertices) + directed[:, 1]
        if len(np.unique(key)) != len(key):
            raise MeshError("non-manifold or inconsistently oriented edges")
        counts = np.bincount(self._edge_index, minlength=len(self.edges))
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        used = np.zeros(len(self.vertices), dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise MeshError(f"{int((~used).sum())} unreferenced vertices")
        _ = self.boundary_loops

    # -- basic geometry -----------------------------------------------------

    @property
    def ambient_dim(self):
        return self.vertices.shape[1]

    @property
    def codim(self):
        return self.ambient_dim - self.intrinsic_dim

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.triangles)

    @cached_property
    def extent(self):
        return float(np.ptp(self.vertices, axis=0).max())

    @cached_property
    def face_areas(self):
        _, _, g11, g12, g22 = _face_frames(self.vertices, self.triangles)
        return 0.5 * np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))

    @cached_property
    def face_centers(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def vertex_mass(self):
        """Barycentric lumped mass (one third of each incident area)."""
        m = np.zeros(self.n_vertices)
        np.add.at(m, self.triangles.ravel(), np.repeat(self.face_areas / 3.0, 3))
        return m

    @cached_property
    def area(self):
        return float(np.sum(np.sort(self.face_areas)))

    # -- connectivity -------------------------------------------------------

    @cached_property
    def _directed_edges(self):
        t = self.triangles
        return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])

    @cached_property
    def _edge_data(self):
        d = np.sort(self._directed_edges, axis=1)
        edges, inv = np.unique(d, axis=0, return_inverse=True)
        return edges, inv.ravel()

    @property
    def edges(self):
        return self._edge_data[0]

    @property
    def _edge_index(self):
        return self._edge_data[1]

    @cached_property
    def edge_lengths(self):
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    @cached_property
    def h(self):
        """Mesh size: mean edge length."""
        return float(self.edge_lengths.mean())

    @cached_property
    def h_max(self):
        return float(self.edge_lengths.max())

    @cached_property
    def boundary_edges(self):
        """Boundary edges ``(a, b, face)`` oriented as in their triangle."""
        counts = np.bincount(self._edge_index, minlength=len(self.edges))
        mask = counts[self._edge_index] == 1
        faces = np.tile(np.arange(self.n_faces), 3)
        de = self._directed_edges
        return np.column_stack([de[mask], faces[mask]])

    @cached_property
    def boundary_loops(self):
        be = self.boundary_edges
        if len(be) == 0:
            return []
        nxt = {}
        for a, b, _ in be:
            if a in nxt:
                raise MeshError(f"non-manifold boundary at vertex {a}")
            nxt[a] = b
        loops, seen = [], set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop, v = [], start
            while v not in seen:
                seen.add(v)
                loop.append(v)
                if v not in nxt:
                    raise MeshError(f"open boundary chain at vertex {v}")
                v = nxt[v]
            if v != start:
                raise MeshError(f"boundary chains merge at vertex {v}")
            loops.append(np.array(loop, dtype=np.int64))
        return loops

    @property
    def closed(self):
        return len(self.boundary_edges) == 0

    @cached_property
    def boundary_mask(self):
        m = np.zeros(self.n_vertices, dtype=bool)
        m[self.boundary_edges[:, :2].ravel()] = True
        return m

    @cached_property
    def adjacency(self):
        e = self.edges
        n = self.n_vertices
        a = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    @cached_property
    def two_ring(self):
        """CSR-style (indptr, indices) of the 2-ring of each vertex, self excluded."""
        a = self.adjacency
        a2 = (a + a @ a).tocsr()
        a2.setdiag(0)
        a2.eliminate_zeros()
        a2.sort_indices()
        return a2.indptr, a2.indices

    # -- boundary geometry --------------------------------------------------

    @cached_property
    def boundary_conormal(self):
        """Outward unit conormal per boundary edge, tangent to its face."""
        be = self.boundary_edges
        if len(be) == 0:
            return np.zeros((0, self.ambient_dim))
        t = self.triangles[be[:, 2]]
        opp = t.sum(axis=1) - be[:, 0] - be[:, 1]
        xa, xb, xc = (self.vertices[be[:, 0]], self.vertices[be[:, 1]],
                      self.vertices[opp])
        e = xb - xa
        e /= np.linalg.norm(e, axis=1)[:, None]
        w = 0.5 * (xa + xb) - xc
        w -= np.einsum("ij,ij->i", w, e)[:, None] * e
        return w / np.linalg.norm(w, axis=1)[:, None]

    @cached_property
    def boundary_edge_lengths(self):
        be = self.boundary_edges
        return np.linalg.norm(self.vertices[be[:, 1]] - self.vertices[be[:, 0]], axis=1)

    @cached_property
    def boundary_mass(self):
        """Lumped boundary length per vertex (half of each incident boundary edge)."""
        m = np.zeros(self.n_vertices)
        be = self.boundary_edges
        half = 0.5 * self.boundary_edge_lengths
        np.add.at(m, be[:, 0], half)
        np.add.at(m, be[:, 1], half)
        return m

    @cached_property
    def perimeter(self):
        return float(np.sum(np.sort(self.boundary_edge_lengths)))

    @cached_property
    def corner_vertices(self):
        """Boundary vertices where the boundary turns by more than 30 degrees."""
        out = []
        for loop in self.boundary_loops:
            p = self.vertices[loop]
            d_in = p - np.roll(p, 1, axis=0)
            d_out = np.roll(p, -1, axis=0) - p
            c = np.einsum("ij,ij->i", d_in, d_out) / (
                np.linalg.norm(d_in, axis=1) * np.linalg.norm(d_out, axis=1))
            out.append(loop[c < np.cos(np.pi / 6)])
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    @cached_property
    def near_corner_mask(self):
        """Vertices within the 2-ring of a sharp boundary corner."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        indptr, indices = self.two_ring
        for c in self.corner_vertices:
            mask[c] = True
            mask[indices[indptr[c]:indptr[c + 1]]] = True
        return mask

    # -- frames -------------------------------------------------------------

    @cached_property
    def face_normals(self):
        """Unit face normals (only for surfaces in R^3)."""
        if self.ambient_dim != 3:
            raise MeshError("face normals are only defined in R^3")
        p = self.vertices[self.triangles]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return n / np.linalg.norm(n, axis=1)[:, None]

    @cached_property
    def _frames(self):
        d = self.ambient_dim
        n_v = self.n_vertices
        if d == 2:
            t = np.broadcast_to(np.eye(2), (n_v, 2, 2)).copy()
            return t, np.zeros((n_v, 2, 0))
        e1, e2, g11, g12, g22 = _face_frames(self.vertices, self.triangles)
        # orthonormal face basis via Gram-Schmidt
        a = e1 / np.sqrt(g11)[:, None]
        b = e2 - np.einsum("ij,ij->i", e2, a)[:, None] * a
        b /= np.linalg.norm(b, axis=1)[:, None]
        proj = np.einsum("fi,fj->fij", a, a) + np.einsum("fi,fj->fij", b, b)
        proj *= self.face_areas[:, None, None]
        acc = np.zeros((n_v, d, d))
        np.add.at(acc, self.triangles.ravel(), np.repeat(proj, 3, axis=0))
        _, vecs = np.linalg.eigh(acc)
        tangent = vecs[:, :, -2:][:, :, ::-1].copy()
        normal = vecs[:, :, :-2][:, :, ::-1].copy()
        if d == 3:
            nrm = np.zeros((n_v, 3))
            np.add.at(nrm, self.triangles.ravel(),
                      np.repeat(self.face_normals * self.face_areas[:, None], 3, axis=0))
            flip = np.einsum("ij,ij->i", normal[:, :, 0], nrm) < 0
            normal[flip] *= -1.0
            # right-handed (t1, t2, nu)
            c = np.cross(tangent[:, :, 0], tangent[:, :, 1])
            swap = np.einsum("ij,ij->i", c, normal[:, :, 0]) < 0
            tangent[swap, :, 1] *= -1.0
        return tangent, normal

    @property
    def vertex_tangent_frame(self):
        """Orthonormal tangent basis per vertex, shape (N, d, 2)."""
        return self._frames[0]

    @property
    def vertex_normal_frame(self):
        """Orthonormal normal basis per vertex, shape (N, d, d - 2)."""
        return self._frames[1]

    def scaled(self, factor):
        return type(self)(self.vertices * factor, self.triangles, name=self.name)

    def describe(self):
        return {
            "kind": type(self).__name__,
            "name": self.name,
            "ambient_dim": self.ambient_dim,
            "vertices": self.n_vertices,
            "faces": self.n_faces,
            "boundary_loops": len(self.boundary_loops),
            "h_mean": self.h,
            "h_max": self.h_max,
        }


class DomainMesh(TriangleMesh):
    """Planar domain triangulated counter-clockwise in R^2."""

    def __init__(self, vertices, triangles, name=""):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError("DomainMesh vertices must be (N, 2)")
        super().__init__(v, triangles, name=name)

    def _validate(self):
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(signed <= 0):
            raise MeshError(f"triangle {int(np.argmin(signed))} is degenerate or clockwise")
        super()._validate()
        if self.closed:
            raise MeshError("planar domain without boundary")


class SurfaceMesh(TriangleMesh):
    """Triangulated surface in R^3 or R^4 (possibly with boundary)."""

    def __init__(self, vertices, triangles, name=""):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] not in (3, 4):
            raise MeshError("SurfaceMesh vertices must be (N, 3) or (N, 4)")
        super().__init__(v, triangles, name=name)


class CurveMesh:
    """Polyline in R^(1+m), open or closed."""

    intrinsic_dim = 1

    def __init__(self, vertices, closed=True, name=""):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise MeshError("CurveMesh vertices must be (N, 2) or (N, 3)")
        if len(v) < 3:
            raise MeshError("curve needs at least 3 vertices")
        v.setflags(write=False)
        self.vertices = v
        self.closed = bool(closed)
        self.name = name
        n = len(v)
        last = n if closed else n - 1
        self.edges = np.column_stack([np.arange(last), (np.arange(last) + 1) % n])
        if np.any(self.edge_lengths <= 1e-14 * max(np.ptp(v, axis=0).max(), 1e-300)):
            raise MeshError("zero-length edge")
        if len(np.unique(np.round(v / max(np.ptp(v), 1e-300), 12), axis=0)) != n:
            raise MeshError("repeated vertices")

    @property
    def ambient_dim(self):
        return self.vertices.shape[1]

    @property
    def codim(self):
        return self.ambient_dim - 1

    @property
    def n_vertices(self):
        return len(self.vertices)

    @cached_property
    def edge_vectors(self):
        e = self.edges
        return self.vertices[e[:, 1]] - self.vertices[e[:, 0]]

    @cached_property
    def edge_lengths(self):
        return np.linalg.norm(self.edge_vectors, axis=1)

    @cached_property
    def h(self):
        return float(self.edge_lengths.mean())

    @cached_property
    def length(self):
        return float(np.sum(np.sort(self.edge_lengths)))

    @cached_property
    def vertex_mass(self):
        """Dual length: half of each incident edge."""
        m = np.zeros(self.n_vertices)
        np.add.at(m, self.edges[:, 0], 0.5 * self.edge_lengths)
        np.add.at(m, self.edges[:, 1], 0.5 * self.edge_lengths)
        return m

    @cached_property
    def _unit_edges(self):
        return self.edge_vectors / self.edge_lengths[:, None]

    @cached_property
    def _incident(self):
        """(previous edge, next edge) per vertex, -1 where missing."""
        n = self.n_vertices
        prev = np.full(n, -1)
        nxt = np.full(n, -1)
        prev[self.edges[:, 1]] = np.arange(len(self.edges))
        nxt[self.edges[:, 0]] = np.arange(len(self.edges))
        return prev, nxt

    @cached_property
    def turning_angles(self):
        """Exterior angle at each vertex (zero at open ends)."""
        prev, nxt = self._incident
        ok = (prev >= 0) & (nxt >= 0)
        u = self._unit_edges
        c = np.zeros(self.n_vertices)
        c[ok] = np.einsum("ij,ij->i", u[prev[ok]], u[nxt[ok]])
        ang = np.zeros(self.n_vertices)
        ang[ok] = np.arccos(np.clip(c[ok], -1.0, 1.0))
        return ang

    @cached_property
    def _frames(self):
        prev, nxt = self._incident
        u = self._unit_edges
        t = np.zeros((self.n_vertices, self.ambient_dim))
        t[prev >= 0] += u[prev[prev >= 0]]
        t[nxt >= 0] += u[nxt[nxt >= 0]]
        t /= np.linalg.norm(t, axis=1)[:, None]
        d = self.ambient_dim
        # complete to an orthonormal basis; first column spans the tangent
        q, _ = np.linalg.qr(np.concatenate([t[:, :, None],
                                            np.broadcast_to(np.eye(d), (len(t), d, d))],
                                           axis=2)[:, :, :d])
        sign = np.sign(np.einsum("ij,ij->i", q[:, :, 0], t))
        q[:, :, 0] *= sign[:, None]
        return q[:, :, :1], q[:, :, 1:]

    @property
    def vertex_tangent_frame(self):
        return self._frames[0]

    @property
    def vertex_normal_frame(self):
        return self._frames[1]

    @property
    def boundary_mask(self):
        m = np.zeros(self.n_vertices, dtype=bool)
        if not self.closed:
            m[[0, -1]] = True
        return m

    def scaled(self, factor):
        return CurveMesh(self.vertices * factor, closed=self.closed, name=self.name)

    def describe(self):
        return {
            "kind": "CurveMesh",
            "name": self.name,
            "ambient_dim": self.ambient_dim,
            "vertices": self.n_vertices,
            "closed": self.closed,
            "h_mean": self.h,
        }


def embed(mesh, ambient_dim):
    """Embed a mesh into a higher-dimensional Euclidean space by zero padding.

    This is how codimension-1 statements reach the codimension >= 2
    checkers: R^(n+1) sits inside R^(n+2) as a coordinate hyperplane.
    """
    d = mesh.ambient_dim
    if ambient_dim < d:
        raise MeshError("cannot embed into a smaller space")
    v = np.hstack([mesh.vertices, np.zeros((mesh.n_vertices, ambient_dim - d))])
    if isinstance(mesh, CurveMesh):
        return CurveMesh(v, closed=mesh.closed, name=mesh.name)
    return SurfaceMesh(v, mesh.triangles, name=mesh.name)
