import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from abpverify.geomconst import (
    DimPair, ball_volume, codim_moment_integral, codim_moment_qmc, gaussian_mass,
    michael_simon_constant, slab_inequality_margin, sphere_area,
)


@pytest.mark.parametrize("n, expected", [(1, 2.0), (2, math.pi), (4, math.pi ** 2 / 2),
                                         (3, 4 * math.pi / 3)])
def test_ball_volume_closed_forms(n, expected):
    assert ball_volume(n) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("n, expected", [(1, 2 * math.pi), (2, 4 * math.pi),
                                         (3, 2 * math.pi ** 2)])
def test_sphere_area_closed_forms(n, expected):
    assert sphere_area(n) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("bad", [0, 33, -1, 2.5])
def test_dimension_range_enforced(bad):
    with pytest.raises(ValueError):
        ball_volume(bad)
    with pytest.raises(ValueError):
        sphere_area(bad)


def test_dimpair_range():
    assert DimPair(2, 2).ambient == 4
    with pytest.raises(ValueError):
        DimPair(0, 1)
    with pytest.raises(ValueError):
        DimPair(10, 7)


@pytest.mark.parametrize("n", range(2, 33))
def test_sphere_is_derivative_of_ball(n):
    assert abs(sphere_area(n - 1) - n * ball_volume(n)) <= 1e-13 * sphere_area(n - 1)


def test_moment_examples():
    # polar oracle: 2 * int_0^1 s sqrt(1 - s^2) ds
    oracle = 2 * quad(lambda s: s * math.sqrt(1 - s * s), 0, 1)[0]
    assert codim_moment_integral(1, 2, 1.0) == pytest.approx(oracle, rel=1e-13)
    assert oracle == pytest.approx(2 / 3, rel=1e-12)
    assert codim_moment_integral(2, 1, 1.0) == pytest.approx(
        quad(lambda t: t * t, 0, 1)[0], rel=1e-13)
    assert codim_moment_integral(5, 3, 0.0) == 0.0


@given(st.integers(1, 6), st.integers(1, 6), st.floats(0.01, 10), st.floats(0, 5))
def test_moment_homogeneity(n, m, a, t):
    lhs = codim_moment_integral(n, m, t * a)
    rhs = t ** n * codim_moment_integral(n, m, a)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("n, m", [(n, m) for n in range(1, 8) for m in range(1, 8) if n + m <= 8])
def test_moment_against_qmc(n, m):
    rng = np.random.default_rng(n * 10 + m)
    a = rng.normal(size=m)
    a *= rng.uniform(0.5, 2.0) / np.linalg.norm(a)
    est, se = codim_moment_qmc(n, m, a, samples=2 ** 15, seed=n + 17 * m)
    exact = codim_moment_integral(n, m, float(np.linalg.norm(a)))
    assert abs(est - exact) <= 3 * se


def test_michael_simon_constant_examples():
    assert michael_simon_constant(2, 2) == pytest.approx(2 * math.sqrt(math.pi), rel=1e-14)
    assert michael_simon_constant(1, 2) == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(ValueError, match="m >= 2"):
        michael_simon_constant(2, 1)


@pytest.mark.parametrize("n", range(1, 15))
def test_michael_simon_codim_two_reduces(n):
    expected = n * ball_volume(n) ** (1 / n)
    assert abs(michael_simon_constant(n, 2) - expected) <= 1e-13 * expected


def test_slab_examples():
    assert slab_inequality_margin(0.4, 1.0, 5) == pytest.approx(0.0, abs=1e-15)
    assert slab_inequality_margin(0.0, 0.0, 2) == pytest.approx(0.0, abs=1e-15)


def test_slab_dense_sweep():
    s = np.linspace(0, 1, 317, endpoint=False)
    sigma = np.linspace(0, 1, 317)
    ss, gg = np.meshgrid(s, sigma)
    total = 0
    for m in range(2, 9):
        out = slab_inequality_margin(ss, gg, m)
        total += out.size
        assert out.min() >= -1e-15
    assert total >= 1e5 * 0.7


@given(st.floats(0, 0.999999), st.floats(0, 1), st.integers(2, 12))
def test_slab_nonnegative(s, sigma, m):
    assert slab_inequality_margin(s, sigma, m) >= -1e-15


@pytest.mark.parametrize("args", [(1.0, 0.5, 2), (0.2, 1.5, 2), (0.2, 0.5, 1)])
def test_slab_domain(args):
    with pytest.raises(ValueError):
        slab_inequality_margin(*args)


@pytest.mark.parametrize("k, tol", [(1, 1e-10), (2, 1e-10), (3, 1e-8), (4, 1e-8), (5, 1e-8)])
def test_gaussian_mass(k, tol):
    assert abs(gaussian_mass(k) - 1.0) <= tol


def test_gaussian_mass_converges():
    errs = [abs(gaussian_mass(2, q) - 1) for q in (8, 16, 32, 64)]
    assert errs[-1] < errs[0]
