"""Tests for the standardized binomial grid and its Gaussian reference."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binutil import (
    BinomialGrid,
    DomainError,
    GaussianRef,
    build_grid,
    cdf,
    kolmogorov_distance,
    log_pmf,
    stirling_theta,
    survival,
)


def exact_pmf(n, p):
    # exact rational point masses, float conversion is the only rounding
    fp = Fraction(p)
    fq = 1 - fp
    return [float(math.comb(n, k) * fp**k * fq ** (n - k)) for k in range(n + 1)]


@pytest.mark.parametrize("n,p", [(1, 0.5), (7, 0.5), (23, 0.3), (50, 0.75), (41, 0.9)])
def test_log_pmf_matches_exact_rationals(n, p):
    exact = exact_pmf(n, p)
    for k in range(n + 1):
        got = math.exp(log_pmf(n, p, k))
        assert got == pytest.approx(exact[k], rel=5e-14, abs=0.0)


@pytest.mark.parametrize("n,p", [(64, 0.5), (129, 0.6), (200, 0.75)])
def test_pmf_ratio_recurrence(n, p):
    """Adjacent masses obey f[k+1]/f[k] = (n-k) p / ((k+1) q)."""
    grid = build_grid(n, p)
    for k in range(n):
        lhs = grid.logf[k + 1] - grid.logf[k]
        rhs = math.log((n - k) * p) - math.log((k + 1) * (1.0 - p))
        assert lhs == pytest.approx(rhs, abs=5e-13)


def test_grid_shape_and_spacing():
    grid = build_grid(100, 0.6)
    assert grid.n == 100
    assert grid.z.shape == (101,)
    assert grid.dz == pytest.approx(1.0 / math.sqrt(100 * 0.6 * 0.4), rel=1e-15)
    steps = np.diff(grid.z)
    assert np.allclose(steps, grid.dz, rtol=1e-12, atol=0.0)


def test_grid_symmetric_at_half():
    grid = build_grid(32, 0.5)
    assert np.allclose(grid.z, -grid.z[::-1], atol=1e-15)
    assert np.allclose(grid.logf, grid.logf[::-1], atol=1e-12)


def test_standardized_moments():
    # mean 0 and unit variance hold exactly for the binomial, so the float
    # sums must vanish at roundoff level
    for n, p in [(16, 0.5), (250, 0.7), (1023, 0.9)]:
        grid = build_grid(n, p)
        f = np.exp(grid.logf)
        assert math.fsum(f) == pytest.approx(1.0, abs=1e-13)
        assert math.fsum(f * grid.z) == pytest.approx(0.0, abs=1e-13)
        assert math.fsum(f * grid.z**2) == pytest.approx(1.0, abs=5e-13)


def test_z_at_extends_grid():
    grid = build_grid(25, 0.6)
    assert grid.z_at(0) == pytest.approx(grid.z[0], rel=1e-15)
    assert grid.z_at(25) == pytest.approx(grid.z[25], rel=1e-15)
    assert grid.z_at(-1) == pytest.approx(grid.z[0] - grid.dz, rel=1e-13)
    assert grid.z_at(26) == pytest.approx(grid.z[25] + grid.dz, rel=1e-13)
    ks = grid.z_at(np.array([-1, 0, 26]))
    assert ks.shape == (3,)


@pytest.mark.parametrize(
    "bad_n,bad_p",
    [(0, 0.5), (-3, 0.5), (2.5, 0.5), (4, 0.0), (4, 1.0), (4, -0.1), (4, float("nan"))],
)
def test_build_grid_rejects_bad_input(bad_n, bad_p):
    with pytest.raises(DomainError):
        build_grid(bad_n, bad_p)


def test_stirling_theta_frozen_values():
    assert stirling_theta(1.0) == pytest.approx(0.97273760154392797, rel=1e-15)
    assert stirling_theta(2.0) == pytest.approx(0.99217670292982429, rel=1e-15)
    assert stirling_theta(20.0) == pytest.approx(0.99991672607886894, rel=1e-15)
    assert stirling_theta(100.0) == pytest.approx(0.99999666676189758, rel=1e-15)


def test_stirling_theta_increasing_inside_unit_interval():
    xs = np.array([0.5, 1.0, 2.0, 5.0, 10.0, 19.0, 20.0, 100.0, 1e4, 1e6])
    vals = stirling_theta(xs)
    assert np.all(vals > 0.0) and np.all(vals < 1.0)
    assert np.all(np.diff(vals) > 0.0)


@pytest.mark.parametrize("x,tol", [(10.0, 1.2e-4), (100.0, 2e-6)])
def test_stirling_theta_complement_rate(x, tol):
    # 1 - theta decays like 1/(30 x^2); the next correction is O(1/x^4)
    assert abs(x * x * (1.0 - stirling_theta(x)) - 1.0 / 30.0) < tol


def test_stirling_theta_rejects_nonpositive():
    with pytest.raises(DomainError):
        stirling_theta(0.0)
    with pytest.raises(DomainError):
        stirling_theta(np.array([1.0, -2.0]))


def test_cdf_survival_complement():
    grid = build_grid(81, 0.6)
    for x in (-3.0, -0.5, 0.0, 0.7, 2.5):
        assert cdf(grid, x) + survival(grid, x) == pytest.approx(1.0, abs=1e-14)
    assert cdf(grid, grid.z[-1]) == pytest.approx(1.0, abs=1e-14)
    assert survival(grid, grid.z[-1]) == 0.0
    assert cdf(grid, grid.z[0] - 1.0) == 0.0


def test_cdf_counts_closed_atoms():
    grid = build_grid(10, 0.5)
    f = exact_pmf(10, 0.5)
    # exactly at an atom the closed comparison includes it
    assert cdf(grid, grid.z[3]) == pytest.approx(math.fsum(f[:4]), rel=1e-14)
    assert survival(grid, grid.z[3]) == pytest.approx(math.fsum(f[4:]), rel=1e-14)


def test_kolmogorov_distance_frozen():
    assert kolmogorov_distance(build_grid(2**10, 0.5)) == pytest.approx(
        0.012463902946490024, rel=1e-12
    )
    assert kolmogorov_distance(build_grid(2**14, 0.5)) == pytest.approx(
        0.0031166890083733079, rel=1e-12
    )


def test_kolmogorov_distance_halves_with_4x_n():
    # Berry-Esseen rate 1/sqrt(n): quadrupling n should cut the sup norm in
    # half, up to a small constant drift
    d1 = kolmogorov_distance(build_grid(2**8, 0.5))
    d2 = kolmogorov_distance(build_grid(2**10, 0.5))
    assert d1 / d2 == pytest.approx(2.0, rel=0.05)


def test_gaussian_ref_identities():
    xs = np.array([-8.0, -2.0, -0.3, 0.0, 1.0, 5.0])
    assert np.allclose(GaussianRef.cdf(xs) + GaussianRef.survival(xs), 1.0, atol=1e-15)
    assert np.allclose(GaussianRef.survival(xs), GaussianRef.cdf(-xs), rtol=1e-14)
    assert np.allclose(
        GaussianRef.log_cdf(xs), np.log(GaussianRef.cdf(xs)), rtol=1e-12
    )
    assert np.allclose(
        GaussianRef.logpdf(xs), np.log(GaussianRef.pdf(xs)), rtol=1e-13
    )
    assert GaussianRef.pdf(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-15)


def test_gaussian_ref_log_tails_far_out():
    # log variants must stay finite past the double underflow point
    assert GaussianRef.log_survival(45.0) == pytest.approx(-1017.2260942419525)
    assert math.isfinite(GaussianRef.log_cdf(-45.0))


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=400),
    p=st.floats(min_value=0.05, max_value=0.95),
)
def test_grid_normalization_property(n, p):
    grid = build_grid(n, p)
    f = np.exp(grid.logf)
    assert abs(math.fsum(f) - 1.0) < 1e-12
    assert abs(math.fsum(f * grid.z)) < 1e-9
