import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abpverify.mesh import (
    CurveMesh, DomainMesh, MeshError, MeshParseError, SurfaceMesh, boundary_integrate,
    builtin_shape, curvature, embed, gradient, hessian_recover, integrate, load_mesh,
    save_mesh, shapes,
)


@pytest.fixture(scope="module")
def disk4():
    return shapes.disk(level=4)


@pytest.fixture(scope="module")
def sphere3():
    return shapes.icosphere(level=3)


def test_disk_perimeter_and_size(disk4):
    assert 2500 <= disk4.n_faces <= 4000
    assert abs(disk4.perimeter - 2 * math.pi) <= 1e-3
    assert len(disk4.boundary_loops) == 1


def test_icosphere_area(sphere3):
    assert sphere3.closed
    assert abs(sphere3.area - 4 * math.pi) <= 1e-2 * 4 * math.pi


def test_circle_length():
    c = shapes.circle(vertices=256)
    assert c.closed
    assert c.length == pytest.approx(2 * 256 * math.sin(math.pi / 256), rel=1e-14)
    assert abs(c.length - 2 * math.pi) <= 1e-3


def test_unknown_shape():
    with pytest.raises(MeshError, match="unknown shape"):
        builtin_shape("dodecahedron")
    with pytest.raises(MeshError):
        builtin_shape("disk", refinement=-1)


def test_builtin_shape_refinement_halves_h():
    h = [builtin_shape("disk", {"radius": 1.0}, L).h for L in (2, 3, 4)]
    assert h[0] / h[1] == pytest.approx(2, rel=0.1)
    assert h[1] / h[2] == pytest.approx(2, rel=0.1)


def test_integrate_examples():
    d = shapes.disk(level=5)
    assert integrate(d, np.ones(d.n_vertices)) == pytest.approx(d.area, rel=1e-14)
    assert boundary_integrate(d, np.ones(d.n_vertices)) == pytest.approx(d.perimeter, rel=1e-14)
    assert abs(integrate(d, d.vertices[:, 0] ** 2) - math.pi / 4) <= 1e-3
    with pytest.raises(MeshError):
        integrate(d, np.ones(3))


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 10))
def test_integrate_linear(a, b, seed):
    d = shapes.disk(level=2)
    rng = np.random.default_rng(seed)
    f, g = rng.normal(size=(2, d.n_vertices))
    lhs = integrate(d, a * f + b * g)
    rhs = a * integrate(d, f) + b * integrate(d, g)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_gradient_exact_on_affine(a1, a2, b):
    d = shapes.square(level=2)
    g = gradient(d, d.vertices @ np.array([a1, a2]) + b)
    assert np.abs(g - [a1, a2]).max() <= 1e-11 * (1 + abs(a1) + abs(a2))


def test_gradient_surface_is_tangent(sphere3):
    g = gradient(sphere3, sphere3.vertices[:, 0])
    assert np.abs(np.einsum("ij,ij->i", g, sphere3.face_normals)).max() < 1e-12


def test_gradient_quadratic_first_order(disk4):
    g = gradient(disk4, 0.5 * np.sum(disk4.vertices ** 2, axis=1))
    err = np.abs(g - disk4.face_centers).max()
    assert err <= 2 * disk4.h_max


def test_hessian_exact_on_quadratic():
    d = shapes.square(level=3)
    x, y = d.vertices.T
    fit = hessian_recover(d, x * x - 3 * x * y)
    interior = fit.valid & ~d.boundary_mask
    t = d.vertex_tangent_frame[interior]
    # map the tangent-frame Hessian back to ambient coordinates
    amb = np.einsum("nai,nij,nbj->nab", t, fit.hessian[interior], t)
    assert np.abs(amb - np.array([[2.0, -3.0], [-3.0, 0.0]])).max() <= 1e-9
    lin = hessian_recover(d, 2 * x - y + 1)
    assert np.abs(lin.hessian[lin.valid]).max() <= 1e-9


def test_hessian_identity_for_half_square(disk4):
    fit = hessian_recover(disk4, 0.5 * np.sum(disk4.vertices ** 2, axis=1))
    ok = fit.valid & ~disk4.boundary_mask
    assert np.abs(fit.hessian[ok] - np.eye(2)).max() <= 1e-9


def test_frames_orthonormal(sphere3):
    t, nrm = sphere3.vertex_tangent_frame, sphere3.vertex_normal_frame
    full = np.concatenate([t, nrm], axis=2)
    gram = np.einsum("nda,ndb->nab", full, full)
    assert np.abs(gram - np.eye(3)).max() <= 1e-12
    s4 = shapes.sphere_r4(level=2)
    full = np.concatenate([s4.vertex_tangent_frame, s4.vertex_normal_frame], axis=2)
    assert np.abs(np.einsum("nda,ndb->nab", full, full) - np.eye(4)).max() <= 1e-12


def test_sphere_mean_curvature(sphere3):
    H = curvature(sphere3).H
    norm = np.linalg.norm(H, axis=1)
    assert np.abs(norm - 2).max() <= 2e-2
    inward = -np.einsum("ij,ij->i", H, sphere3.vertices) / norm
    assert inward.min() > 0.999


def test_flat_disk_r4_is_totally_geodesic():
    fd = shapes.flat_disk_r4(level=3)
    c = curvature(fd)
    assert np.abs(c.H).max() <= 1e-10
    assert np.abs(c.II).max() <= 1e-10


def test_circle_curvature():
    c = shapes.circle(vertices=512)
    cd = curvature(c)
    assert np.abs(np.linalg.norm(cd.H, axis=1) - 1).max() <= 1e-4
    total = math.fsum(np.linalg.norm(cd.H, axis=1) * c.vertex_mass)
    assert abs(total - 2 * math.pi) <= 1e-6


def _trace_defect(mesh):
    c = curvature(mesh)
    tr = np.trace(c.II, axis1=-2, axis2=-1)
    recon = np.einsum("nda,na->nd", mesh.vertex_normal_frame, tr)
    ok = c.valid & ~mesh.boundary_mask
    return np.linalg.norm(recon - c.H, axis=1)[ok].max()


# calibrated per shape family at level 3 -> 4; the defect is O(h^2) in practice
TRACE_C = 1.0


@pytest.mark.parametrize("maker", [lambda L: shapes.icosphere(level=L),
                                   lambda L: shapes.torus(level=L - 1),
                                   lambda L: shapes.sphere_r4(level=L)])
def test_trace_consistency_under_refinement(maker):
    coarse, fine = maker(3), maker(4)
    d0, d1 = _trace_defect(coarse), _trace_defect(fine)
    assert d0 <= TRACE_C * coarse.h
    assert d1 <= TRACE_C * fine.h
    assert d1 < d0


def test_conormal_outward_and_orthogonal():
    for d in (shapes.disk(level=3), shapes.annulus(level=2), shapes.square(level=2)):
        be = d.boundary_edges
        eta = d.boundary_conormal
        edge = d.vertices[be[:, 1]] - d.vertices[be[:, 0]]
        assert np.abs(np.einsum("ij,ij->i", eta, edge)).max() <= 1e-12
        assert np.abs(np.linalg.norm(eta, axis=1) - 1).max() <= 1e-12
        mid = 0.5 * (d.vertices[be[:, 0]] + d.vertices[be[:, 1]])
        bary = d.face_centers[be[:, 2]]
        assert np.all(np.einsum("ij,ij->i", eta, mid - bary) > 0)


def test_roundtrip_off_and_obj(tmp_path):
    d = shapes.disk(level=2)
    p = tmp_path / "disk.off"
    save_mesh(d, p)
    back = load_mesh(p)
    assert isinstance(back, DomainMesh)
    assert len(back.boundary_loops) == 1
    assert np.allclose(back.vertices, d.vertices)
    s = shapes.icosphere(level=1)
    q = tmp_path / "sphere.obj"
    save_mesh(s, q)
    back = load_mesh(q)
    assert isinstance(back, SurfaceMesh) and back.closed
    c = shapes.circle(vertices=32)
    r = tmp_path / "circle.obj"
    save_mesh(c, r)
    assert isinstance(load_mesh(r), CurveMesh)


def test_malformed_index_names_line(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n")
    with pytest.raises(MeshParseError) as exc:
        load_mesh(p)
    assert exc.value.line == 6
    assert ":6:" in str(exc.value)


def test_degenerate_face_rejected():
    with pytest.raises(MeshError):
        DomainMesh(np.array([[0, 0], [1, 0], [2, 0.0]]), np.array([[0, 1, 2]]))


def test_embed_raises_codimension():
    d = shapes.disk(level=2)
    e = embed(d, 3)
    assert e.ambient_dim == 3 and e.codim == 1
    assert np.allclose(e.vertices[:, :2], d.vertices)


def test_scaled_mesh_scales_curvature():
    s = shapes.icosphere(level=2)
    big = s.scaled(2.0)
    assert np.allclose(np.linalg.norm(curvature(big).H, axis=1),
                       0.5 * np.linalg.norm(curvature(s).H, axis=1), rtol=1e-10)
