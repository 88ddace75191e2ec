"""Generators for the built-in test geometries.

Every generator takes a refinement ``level``; each level roughly halves the
mesh size.  Curves accept an explicit vertex count instead.
"""

import numpy as np

from .core import CurveMesh, DomainMesh, MeshError, SurfaceMesh


def _ring_disk(rings):
    """Concentric-ring triangulation of the unit disk: ring i has 6i vertices.

    Returns planar points, triangles, and the (ring radius fraction, angle)
    of each point so that callers can remap the rings.
    """
    pts = [(0.0, 0.0)]
    start = [0]
    for i in range(1, rings + 1):
        start.append(len(pts))
        k = 6 * i
        for j in range(k):
            pts.append((i / rings, 2.0 * np.pi * j / k))
    tris = []
    for i in range(1, rings + 1):
        m_in = 1 if i == 1 else 6 * (i - 1)
        m_out = 6 * i
        a = b = 0
        while a < m_in or b < m_out:
            ia, ia1 = start[i - 1] + a % m_in, start[i - 1] + (a + 1) % m_in
            ob, ob1 = start[i] + b % m_out, start[i] + (b + 1) % m_out
            if m_in == 1:
                tris.append((start[0], ob, ob1))
                b += 1
                if b == m_out:
                    a = m_in
                continue
            if a < m_in and (b >= m_out or (a + 1) / m_in < (b + 1) / m_out):
                tris.append((ia, ob, ia1))
                a += 1
            else:
                tris.append((ia, ob, ob1))
                b += 1
    rho_ang = np.array(pts)
    return rho_ang, np.array(tris, dtype=np.int64)


def _disk_rings(level):
    return max(2, (3 * 2 ** level) // 2)


def _orient_planar(v, t):
    p = v[t]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    t = t.copy()
    t[neg] = t[neg][:, [0, 2, 1]]
    return t


def disk(radius=1.0, level=3):
    ra, t = _ring_disk(_disk_rings(level))
    v = radius * np.column_stack([ra[:, 0] * np.cos(ra[:, 1]), ra[:, 0] * np.sin(ra[:, 1])])
    return DomainMesh(v, _orient_planar(v, t), name=f"disk(r={radius}, level={level})")


def _grid_triangles(nu, nv, wrap_u=False, wrap_v=False):
    """Triangulate an (nu x nv) vertex grid with alternating diagonals."""
    cu = nu if wrap_u else nu - 1
    cv = nv if wrap_v else nv - 1
    tris = []
    for i in range(cu):
        for j in range(cv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return np.array(tris, dtype=np.int64)


def square(side=1.0, level=3):
    n = 2 ** (level + 1) + 1
    x = np.linspace(-0.5 * side, 0.5 * side, n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    v = np.column_stack([xx.ravel(), yy.ravel()])
    t = _grid_triangles(n, n)
    return DomainMesh(v, _orient_planar(v, t), name=f"square(side={side}, level={level})")


def annulus(r_in=0.5, r_out=1.0, level=3):
    if not 0 < r_in < r_out:
        raise MeshError("annulus needs 0 < r_in < r_out")
    na = 12 * 2 ** level
    nr = max(2, int(np.ceil((r_out - r_in) / (2 * np.pi * 0.5 * (r_in + r_out) / na))) + 1)
    ang = 2 * np.pi * np.arange(na) / na
    rad = np.linspace(r_in, r_out, nr)
    aa, rr = np.meshgrid(ang, rad, indexing="ij")
    v = np.column_stack([(rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()])
    t = _grid_triangles(na, nr, wrap_u=True)
    return DomainMesh(v, _orient_planar(v, t),
                      name=f"annulus(r_in={r_in}, r_out={r_out}, level={level})")


def _icosahedron():
    phi = (1 + 5 ** 0.5) / 2
    v = np.array([(-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
                  (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
                  (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1)], dtype=float)
    f = np.array([(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
                  (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
                  (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
                  (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)], dtype=np.int64)
    return v / np.linalg.norm(v, axis=1)[:, None], f


def _icosphere_arrays(level):
    v, f = _icosahedron()
    verts = list(v)
    for _ in range(level):
        cache = {}
        new = []

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        f = np.array(new, dtype=np.int64)
    return np.array(verts), f


def icosphere(radius=1.0, level=3, ambient_dim=3):
    v, f = _icosphere_arrays(level)
    v = radius * v
    if ambient_dim > 3:
        v = np.hstack([v, np.zeros((len(v), ambient_dim - 3))])
    return SurfaceMesh(v, f, name=f"icosphere(r={radius}, level={level}, R^{ambient_dim})")


def sphere_r4(radius=1.0, level=3):
    return icosphere(radius, level, ambient_dim=4)


def flat_disk_r4(radius=1.0, level=3):
    ra, t = _ring_disk(_disk_rings(level))
    x = radius * ra[:, 0] * np.cos(ra[:, 1])
    y = radius * ra[:, 0] * np.sin(ra[:, 1])
    v = np.column_stack([x, y, np.zeros_like(x), np.zeros_like(x)])
    t = _orient_planar(v[:, :2], t)
    return SurfaceMesh(v, t, name=f"flat_disk_r4(r={radius}, level={level})")


def hemisphere(radius=1.0, level=3, ambient_dim=3):
    """Upper unit hemisphere; the ring disk is lifted along meridians."""
    ra, t = _ring_disk(_disk_rings(level))
    t = _orient_planar(np.column_stack([ra[:, 0] * np.cos(ra[:, 1]),
                                        ra[:, 0] * np.sin(ra[:, 1])]), t)
    th = 0.5 * np.pi * ra[:, 0]
    v = radius * np.column_stack([np.sin(th) * np.cos(ra[:, 1]),
                                  np.sin(th) * np.sin(ra[:, 1]), np.cos(th)])
    if ambient_dim > 3:
        v = np.hstack([v, np.zeros((len(v), ambient_dim - 3))])
    return SurfaceMesh(v, t, name=f"hemisphere(r={radius}, level={level}, R^{ambient_dim})")


def torus(major=2.0, minor=1.0, level=3):
    nu = 12 * 2 ** level
    nv = max(6, int(round(nu * minor / major)))
    u = 2 * np.pi * np.arange(nu) / nu
    w = 2 * np.pi * np.arange(nv) / nv
    uu, ww = np.meshgrid(u, w, indexing="ij")
    ring = major + minor * np.cos(ww)
    v = np.column_stack([(ring * np.cos(uu)).ravel(), (ring * np.sin(uu)).ravel(),
                         (minor * np.sin(ww)).ravel()])
    t = _grid_triangles(nu, nv, wrap_u=True, wrap_v=True)
    # outward orientation: check one face against the tube centre
    p = v[t[0]]
    nrm = np.cross(p[1] - p[0], p[2] - p[0])
    c = p.mean(axis=0)
    centre = major * np.array([c[0], c[1], 0.0]) / np.hypot(c[0], c[1])
    if np.dot(nrm, c - centre) < 0:
        t = t[:, [0, 2, 1]]
    return SurfaceMesh(v, t, name=f"torus(R={major}, r={minor}, level={level})")


def _curve_vertices(level, vertices):
    return int(vertices) if vertices else 64 * 2 ** level


def circle(radius=1.0, level=2, vertices=None, ambient_dim=3):
    n = _curve_vertices(level, vertices)
    a = 2 * np.pi * np.arange(n) / n
    v = np.zeros((n, ambient_dim))
    v[:, 0], v[:, 1] = radius * np.cos(a), radius * np.sin(a)
    return CurveMesh(v, closed=True, name=f"circle(r={radius}, n={n})")


def ellipse(a=2.0, b=1.0, level=2, vertices=None, ambient_dim=2):
    n = _curve_vertices(level, vertices)
    t = 2 * np.pi * np.arange(n) / n
    v = np.zeros((n, ambient_dim))
    v[:, 0], v[:, 1] = a * np.cos(t), b * np.sin(t)
    return CurveMesh(v, closed=True, name=f"ellipse(a={a}, b={b}, n={n})")


def torus_knot_point(t, p=2, q=3, major=2.0, minor=1.0):
    ring = major + minor * np.cos(q * t)
    return np.stack([ring * np.cos(p * t), ring * np.sin(p * t), minor * np.sin(q * t)], axis=-1)


def torus_knot(p=2, q=3, major=2.0, minor=1.0, level=2, vertices=None):
    n = _curve_vertices(level, vertices)
    t = 2 * np.pi * np.arange(n) / n
    v = torus_knot_point(t, p, q, major, minor)
    return CurveMesh(v, closed=True, name=f"torus_knot({p},{q}, n={n})")


SHAPES = {
    "disk": disk,
    "square": square,
    "annulus": annulus,
    "icosphere": icosphere,
    "sphere_r4": sphere_r4,
    "flat_disk_r4": flat_disk_r4,
    "hemisphere": hemisphere,
    "torus": torus,
    "circle": circle,
    "ellipse": ellipse,
    "torus_knot": torus_knot,
}


def builtin_shape(name, parameters=None, refinement=3):
    """Build a named test shape at the given refinement level."""
    try:
        gen = SHAPES[name]
    except KeyError:
        raise MeshError(f"unknown shape {name!r}; known: {', '.join(sorted(SHAPES))}") from None
    if refinement < 0:
        raise MeshError("refinement must be >= 0")
    return gen(level=refinement, **dict(parameters or {}))
