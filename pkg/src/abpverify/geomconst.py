"""Dimensional constants and small scalar inequalities.

Volumes of balls and spheres are computed through ``math.lgamma`` so that
the whole supported range (dimensions up to 32) stays free of overflow.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

MAX_DIM = 32


@dataclass(frozen=True)
class DimPair:
    """Intrinsic dimension ``n`` and codimension ``m`` of a submanifold."""

    n: int
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 0 or self.n + self.m > 16:
            raise ValueError(f"unsupported dimension pair n={self.n}, m={self.m}")

    @property
    def ambient(self):
        return self.n + self.m


def _check_dim(n, lo=1, hi=MAX_DIM, name="n"):
    if int(n) != n or not lo <= n <= hi:
        raise ValueError(f"{name}={n!r} outside supported range [{lo}, {hi}]")
    return int(n)


def _log_ball_volume(n):
    return 0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1.0)


def ball_volume(n):
    """Volume of the open unit ball in R^n."""
    n = _check_dim(n)
    return math.exp(_log_ball_volume(n))


def sphere_area(n):
    """Area of the unit n-sphere sitting in R^(n+1)."""
    n = _check_dim(n)
    return math.exp(math.log(2.0) + 0.5 * (n + 1) * math.log(math.pi)
                    - math.lgamma(0.5 * (n + 1)))


def codim_moment_integral(n, m, a_norm):
    """Integral of ``(-<a, y>)_+^n`` over the unit ball of R^m.

    Closed form ``|B^(n+m)| / |S^n| * |a|^n``.

    Parameters
    ----------
    n : int
        Power of the positive part (intrinsic dimension).
    m : int
        Dimension of the integration ball (codimension), ``m >= 1``.
    a_norm : float
        Length of the vector ``a``.
    """
    n = _check_dim(n)
    m = _check_dim(m, name="m")
    _check_dim(n + m, name="n+m")
    if a_norm < 0:
        raise ValueError("a_norm must be nonnegative")
    if a_norm == 0:
        return 0.0
    log_c = _log_ball_volume(n + m) - math.log(sphere_area(n))
    return math.exp(log_c + n * math.log(a_norm))


def codim_moment_qmc(n, m, a, samples=2**14, seed=0):
    """Quasi-Monte Carlo estimate of the codimension moment integral.

    Scrambled Halton points on the cube ``[-1, 1]^m`` with the unit-ball
    indicator.  Returns ``(estimate, standard_error)`` where the standard
    error is the plain Monte Carlo one (conservative for QMC).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (m,):
        raise ValueError(f"vector a must have length m={m}")
    y = 2.0 * qmc.Halton(d=m, scramble=True, seed=seed).random(samples) - 1.0
    inside = np.einsum("ij,ij->i", y, y) < 1.0
    vals = np.where(inside, np.maximum(-(y @ a), 0.0) ** n, 0.0) * 2.0**m
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def michael_simon_constant(n, m):
    """Sharp constant ``n ((n+m)|B^(n+m)| / (m |B^m|))^(1/n)``; needs m >= 2."""
    n = _check_dim(n)
    if m < 2:
        raise ValueError(f"Michael-Simon constant requires codimension m >= 2, got m={m}")
    m = _check_dim(m, name="m")
    _check_dim(n + m, name="n+m")
    log_ratio = (math.log(n + m) + _log_ball_volume(n + m)
                 - math.log(m) - _log_ball_volume(m))
    return n * math.exp(log_ratio / n)


def slab_inequality_margin(s, sigma, m):
    """Slack in ``(1-s^2)^(m/2) - (sigma^2-s^2)_+^(m/2) <= (m/2)(1-sigma^2)``.

    Vectorised over ``s`` and ``sigma``.  Valid for ``0 <= s < 1``,
    ``0 <= sigma <= 1`` and integer ``m >= 2``; the result is nonnegative.
    """
    s = np.asarray(s, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if m < 2 or int(m) != m:
        raise ValueError("slab inequality needs an integer m >= 2")
    if np.any((s < 0) | (s >= 1)):
        raise ValueError("s must lie in [0, 1)")
    if np.any((sigma < 0) | (sigma > 1)):
        raise ValueError("sigma must lie in [0, 1]")
    half = 0.5 * m
    s2 = s * s
    bracket = (1.0 - s2) ** half - np.maximum(sigma * sigma - s2, 0.0) ** half
    out = half * (1.0 - sigma * sigma) - bracket
    return float(out) if out.ndim == 0 else out


def gaussian_mass(k, quadrature_level=64, half_width=20.0):
    """Normalised Gaussian mass ``(4 pi)^(-k/2) int exp(-|x|^2/4) dx`` over R^k.

    Tensor-product Gauss-Legendre rule with ``quadrature_level`` nodes per
    axis on ``[-half_width, half_width]``.  The integrand is separable, so
    the k-fold product rule is the k-th power of the 1D rule.
    """
    k = _check_dim(k, name="k")
    if quadrature_level < 1:
        raise ValueError("quadrature_level must be positive")
    x, w = np.polynomial.legendre.leggauss(int(quadrature_level))
    one_d = half_width * math.fsum(w * np.exp(-0.25 * (half_width * x) ** 2))
    return (one_d / math.sqrt(4.0 * math.pi)) ** k
