import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from abpverify.comparison import TubeConfig, build_model
from abpverify.inequality import (
    InequalityReport, check_fwc, check_heintze_karcher_tube, check_isoperimetric,
    check_log_sobolev, check_michael_simon, check_riemannian_fwc,
    check_riemannian_isoperimetric, check_sobolev_euclidean, normal_segment_integral,
    radial_sobolev_sides, reports_to_csv,
)
from abpverify.mesh import MeshError, embed, shapes


# -- Euclidean domains ----------------------------------------------------------

def test_disk_equality():
    r = check_sobolev_euclidean(shapes.disk(level=5), 1.0)
    assert abs(r.ratio - 1) <= 5e-3
    assert r.holds


def test_square_and_annulus_closed_forms():
    sq = check_isoperimetric(shapes.square(level=3))
    assert abs(sq.ratio - 2 / math.sqrt(math.pi)) <= 5e-3
    an = check_isoperimetric(shapes.annulus(level=4))
    assert abs(an.lhs - 3 * math.pi) <= 5e-3 * 3 * math.pi
    assert abs(an.rhs - math.sqrt(3) * math.pi) <= 5e-3 * math.pi
    assert abs(an.ratio - math.sqrt(3)) <= 5e-3


def test_gaussian_density_against_radial_oracle():
    r = check_sobolev_euclidean(shapes.disk(level=5), lambda x: np.exp(-np.sum(x ** 2, axis=1)))
    lhs, rhs = radial_sobolev_sides(lambda s: math.exp(-s * s),
                                    lambda s: -2 * s * math.exp(-s * s))
    assert r.ratio >= 1
    assert r.lhs == pytest.approx(lhs, rel=5e-4)
    assert r.rhs == pytest.approx(rhs, rel=5e-4)


def test_nonpositive_density():
    with pytest.raises(ValueError, match="positive"):
        check_sobolev_euclidean(shapes.disk(level=2), lambda x: x[:, 0])


# -- submanifolds -----------------------------------------------------------------

def test_fwc_curves():
    c = check_fwc(shapes.circle(vertices=256))
    assert abs(c.ratio - 1) <= 1e-6
    e = check_fwc(shapes.ellipse(vertices=512))
    assert abs(e.ratio - 1) <= 1e-4
    k = check_fwc(shapes.torus_knot(vertices=2048))
    assert k.ratio > 2


def test_fwc_knot_turning_angle_oracle():
    # independent oracle: total curvature from a fine arclength quadrature
    # of |gamma' x gamma''| / |gamma'|^2 for the smooth (2,3) knot
    from abpverify.mesh.shapes import torus_knot_point
    t = np.linspace(0, 2 * np.pi, 200_001)
    p = torus_knot_point(t)
    d1 = np.gradient(p, t, axis=0)
    d2 = np.gradient(d1, t, axis=0)
    kappa_ds = np.linalg.norm(np.cross(d1, d2), axis=1) / np.einsum("ij,ij->i", d1, d1)
    total = trapezoid(kappa_ds, t)
    r = check_fwc(shapes.torus_knot(vertices=4096))
    assert total > 4 * math.pi
    assert r.lhs == pytest.approx(total, rel=1e-3)


def test_fwc_icosphere_improves():
    ratios = [check_fwc(shapes.icosphere(level=L)).ratio for L in (3, 4)]
    assert abs(ratios[0] - 1) <= 2e-2
    assert abs(ratios[1] - 1) < abs(ratios[0] - 1)


def test_fwc_rejects_open():
    with pytest.raises(MeshError):
        check_fwc(shapes.hemisphere(level=2))


def test_michael_simon_flat_disk():
    r = check_michael_simon(shapes.flat_disk_r4(level=4), 1.0)
    assert abs(r.lhs - 2 * math.pi) <= 5e-3 * 2 * math.pi
    assert abs(r.ratio - 1) <= 5e-3
    v = check_michael_simon(shapes.flat_disk_r4(level=4), lambda x: 1 + x[:, 0] / 2)
    assert v.ratio >= 1


def test_michael_simon_hemisphere():
    r = check_michael_simon(shapes.hemisphere(level=4, ambient_dim=4), 1.0)
    # |H| = 2 on area 2 pi plus the boundary circle
    assert r.lhs == pytest.approx(6 * math.pi, rel=5e-3)
    assert r.ratio >= 1


def test_michael_simon_codim_one_rejected():
    with pytest.raises(ValueError, match="m=1"):
        check_michael_simon(embed(shapes.disk(level=2), 3), 1.0)
    # embedding one dimension up is the supported path
    r = check_michael_simon(embed(shapes.disk(level=3), 4), 1.0)
    assert r.extra["m"] == 2


def test_log_sobolev_spheres():
    for c in (1.0, 3.0):
        r = check_log_sobolev(shapes.icosphere(level=4), c)
        assert r.margin == pytest.approx(8 * math.pi * c, rel=1e-2)
        assert r.holds
    r2 = check_log_sobolev(shapes.icosphere(radius=2.0, level=4), 1.0)
    assert r2.margin == pytest.approx(16 * math.pi * (math.log(4) - 1), rel=1e-2)


def test_log_sobolev_torus():
    r = check_log_sobolev(shapes.torus(level=3), 1.0)
    assert r.margin > 0


@pytest.mark.xfail(strict=True, reason="both forms are discretised independently; "
                   "their margins agree only to O(h^2)")
def test_log_sobolev_forms_agree_to_round_off():
    r = check_log_sobolev(shapes.icosphere(level=4), 1.0)
    assert r.extra["form_agreement"] <= 1e-8


def test_log_sobolev_forms_converge():
    agree = [check_log_sobolev(shapes.icosphere(level=L), lambda x: 1 + 0.3 * x[:, 2] ** 2)
             .extra["form_agreement"] for L in (2, 3, 4)]
    assert agree[0] / agree[1] >= 3
    assert agree[1] / agree[2] >= 3


# -- invariants -------------------------------------------------------------------

@given(st.sampled_from([0.5, 2.0]))
@settings(max_examples=2)
def test_scale_covariance(t):
    d = shapes.disk(level=3)
    for check, mesh, f in ((check_isoperimetric, d, None),
                           (check_sobolev_euclidean, d, lambda x: 1 + x[:, 0] ** 2),
                           (check_fwc, shapes.icosphere(level=2), None),
                           (check_michael_simon, shapes.hemisphere(level=2, ambient_dim=4), None)):
        args = () if f is None else (f,)
        base = check(mesh, *args)
        if f is None:
            scaled = check(mesh.scaled(t))
        else:
            scaled = check(mesh.scaled(t), lambda x, f=f: f(x / t))
        assert scaled.ratio == pytest.approx(base.ratio, rel=1e-10)


@pytest.mark.parametrize("build,target", [
    (lambda L: check_isoperimetric(shapes.disk(level=L)), 1.0),
    (lambda L: check_isoperimetric(shapes.annulus(level=L)), math.sqrt(3)),
    (lambda L: check_fwc(shapes.icosphere(level=L)), 1.0),
    (lambda L: check_michael_simon(shapes.flat_disk_r4(level=L)), 1.0),
])
def test_monotone_convergence(build, target):
    errs = [abs(build(L).ratio - target) for L in (2, 3, 4)]
    assert errs[1] <= 1.1 * errs[0]
    assert errs[2] <= 1.1 * errs[1]


# -- model manifolds ------------------------------------------------------------------

def test_riemannian_isoperimetric_examples():
    e = check_riemannian_isoperimetric(build_model(3), (0.0, 1.0))
    assert abs(e.ratio - 1) <= 1e-12
    cone = build_model(2, ("cone", 0.7))
    tip = check_riemannian_isoperimetric(cone, (0.0, 1.0))
    assert tip.lhs == pytest.approx(2 * math.pi * 0.7, rel=1e-14)
    assert abs(tip.ratio - 1) <= 1e-8
    ann = check_riemannian_isoperimetric(cone, (0.5, 1.0))
    assert ann.ratio > 1
    with pytest.raises(ValueError):
        check_riemannian_isoperimetric(cone, (1.0, 0.5))


def test_riemannian_fwc_examples():
    e = check_riemannian_fwc(build_model(3), 1.0)
    assert e.lhs == pytest.approx(4 * math.pi, rel=1e-14)
    assert abs(e.ratio - 1) <= 1e-12
    for n, a in ((3, 0.5), (4, 0.8)):
        assert abs(check_riemannian_fwc(build_model(n, ("cone", a)), 2.5).ratio - 1) <= 1e-8
    s = check_riemannian_fwc(build_model(3, ("smoothed_cone", 0.6, 1.0)), 3.0)
    assert s.ratio >= 1


@pytest.mark.parametrize("r", [0.5, 2.0])
def test_heintze_karcher_euclidean_equality(r):
    rep = check_heintze_karcher_tube(build_model(3), 1.0, r)
    expected = 4 * math.pi / 3 * ((1 + r) ** 3 - max(1 - r, 0) ** 3)
    assert rep.lhs == pytest.approx(expected, rel=1e-14)
    assert rep.rhs == pytest.approx(expected, rel=1e-12)
    assert rep.holds


def test_heintze_karcher_cone():
    m = build_model(3, ("cone", 0.8))
    rep = check_heintze_karcher_tube(m, TubeConfig(m, 2.0, 1.0), None)
    # cones realise equality, so the sides agree to round-off
    assert rep.direction == "le" and rep.holds
    assert rep.ratio == pytest.approx(1.0, abs=1e-12)


def test_normal_segment_quadrature():
    from scipy.integrate import quad
    for n, r, h in ((3, 0.5, -2.0), (3, 2.0, -2.0), (4, 1.0, 0.7), (2, 0.3, 0.0)):
        ref = quad(lambda s: r * max(1 - r * s * h / (n - 1), 0.0) ** (n - 1), -1, 1,
                   points=[(n - 1) / (r * h)] if h and abs((n - 1) / (r * h)) < 1 else None)[0]
        assert normal_segment_integral(n, r, h) == pytest.approx(ref, rel=1e-10)


# -- reports --------------------------------------------------------------------------

def test_report_serialisation():
    reps = [check_isoperimetric(shapes.square(level=2)),
            check_riemannian_fwc(build_model(3), 1.0)]
    rows = list(csv.DictReader(io.StringIO(reports_to_csv(reps))))
    assert [r["theorem"] for r in rows] == ["isoperimetric", "riemannian_fwc"]
    d = reps[0].to_dict()
    for key in ("theorem", "lhs", "rhs", "ratio", "margin", "tolerance", "geometry",
                "mesh_stats", "holds"):
        assert key in d


def test_report_sign_convention():
    ge = InequalityReport("x", 2.0, 1.0, 2.0, 1.0, 0.0)
    assert ge.holds
    le = InequalityReport("x", 2.0, 1.0, 2.0, -1.0, 0.0, "le")
    assert not le.holds
