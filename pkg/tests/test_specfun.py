import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from wetsim.errors import DomainError
from wetsim.specfun import (
    GammaDist,
    NoncentralChi2,
    bessel_i,
    gamma_cdf,
    gamma_pdf,
    log_gamma,
    marcum_q,
    noncentral_chi2_cdf,
    noncentral_chi2_cdf_series,
    noncentral_chi2_moments,
    noncentral_chi2_pdf,
    noncentral_chi2_sf,
    upper_incomplete_gamma,
)


def test_log_gamma_values():
    assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
    assert log_gamma(0.5) == pytest.approx(0.5723649429247001, rel=1e-14)
    assert log_gamma(10.0) == pytest.approx(math.log(math.factorial(9)), rel=1e-14)


def test_log_gamma_rejects_nonpositive():
    with pytest.raises(DomainError):
        log_gamma(0.0)


def test_upper_incomplete_gamma():
    for x in (0.0, 0.3, 2.0, 17.0):
        assert upper_incomplete_gamma(1.0, x) == pytest.approx(math.exp(-x), rel=1e-14)
    assert upper_incomplete_gamma(2.0, 0.0) == pytest.approx(1.0)
    oracle, _ = integrate.quad(lambda t: t**2 * math.exp(-t), 2.0, np.inf, epsabs=1e-14)
    assert upper_incomplete_gamma(3.0, 2.0) == pytest.approx(oracle, rel=1e-12)
    assert oracle == pytest.approx(1.3534, abs=1e-4)


def _bessel_i0_series(x, terms=60):
    return sum((x / 2) ** (2 * k) / math.factorial(k) ** 2 for k in range(terms))


def test_bessel_i():
    assert bessel_i(0, 0.0) == 1.0
    assert bessel_i(1, 0.0) == 0.0
    assert bessel_i(0, 2.0) == pytest.approx(_bessel_i0_series(2.0), rel=1e-14)
    assert bessel_i(0, 2.0) == pytest.approx(2.2795853, abs=1e-7)


def test_marcum_q_examples():
    assert marcum_q(1, 5.0, 0.0) == 1.0
    assert marcum_q(1, 0.0, 2.0) == pytest.approx(math.exp(-2.0), rel=1e-13)
    assert marcum_q(2, 1.0, 1.0) == pytest.approx(1.0 - noncentral_chi2_cdf(1.0, 4.0, 1.0), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    order=st.integers(1, 12),
    a=st.floats(0.0, 12.0),
    b=st.floats(0.0, 14.0),
)
def test_marcum_q_matches_noncentral_chi2_tail(order, a, b):
    # both branches (Bessel series and Poisson series) against scipy's ncx2
    ref = stats.ncx2.sf(b * b, 2 * order, a * a) if a > 0 else stats.chi2.sf(b * b, 2 * order)
    assert marcum_q(order, a, b) == pytest.approx(ref, rel=1e-8, abs=1e-13)


def test_marcum_q_domain():
    with pytest.raises(DomainError):
        marcum_q(0, 1.0, 1.0)
    with pytest.raises(DomainError):
        marcum_q(1, -1.0, 1.0)


def test_ncx2_cdf_zero_and_tail():
    assert noncentral_chi2_cdf(0.0, 2.0, 6.0) == 0.0
    phi, psi = 2.0, 6.0
    x = phi + psi + 40 * math.sqrt(2 * (phi + 2 * psi))
    assert noncentral_chi2_cdf(x, phi, psi) == pytest.approx(1.0, abs=1e-9)
    mass, _ = integrate.quad(lambda z: noncentral_chi2_pdf(z, phi, psi), 0, x, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("dof,nc", [(2, 0.0), (2, 6.0), (4, 1.0), (16, 48.0), (3.5, 0.7), (32, 320.0)])
def test_ncx2_cdf_three_ways(dof, nc):
    z = np.linspace(0, dof + nc + 10 * math.sqrt(2 * (dof + 2 * nc)), 57)
    fast = noncentral_chi2_cdf(z, dof, nc)
    series = noncentral_chi2_cdf_series(z, dof, nc)
    ref = stats.ncx2.cdf(z, dof, nc) if nc > 0 else stats.chi2.cdf(z, dof)
    np.testing.assert_allclose(fast, ref, rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(series, ref, rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(noncentral_chi2_sf(z, dof, nc), 1 - ref, rtol=1e-7, atol=1e-12)


@pytest.mark.parametrize("dof,nc", [(2, 0.0), (2, 6.0), (1.0, 2.0), (16, 48.0)])
def test_ncx2_pdf_matches_scipy(dof, nc):
    z = np.linspace(0.05, 60, 80)
    ref = stats.ncx2.pdf(z, dof, nc) if nc > 0 else stats.chi2.pdf(z, dof)
    np.testing.assert_allclose(noncentral_chi2_pdf(z, dof, nc), ref, rtol=1e-9, atol=1e-300)


def test_ncx2_pdf_at_origin_dof2():
    assert noncentral_chi2_pdf(0.0, 2.0, 0.0) == pytest.approx(0.5)
    assert noncentral_chi2_pdf(0.0, 2.0, 6.0) == pytest.approx(0.5 * math.exp(-3.0))


def test_ncx2_moments():
    assert noncentral_chi2_moments(2, 6) == (8, 28)
    assert noncentral_chi2_moments(2, 0) == (2, 4)
    assert noncentral_chi2_moments(4, 0) == (4, 8)
    kappa = 3
    assert noncentral_chi2_moments(2, 2 * kappa) == (8, 28)


def test_ncx2_domain_errors():
    with pytest.raises(DomainError):
        noncentral_chi2_cdf(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        noncentral_chi2_cdf(1.0, 2.0, -1.0)
    with pytest.raises(DomainError):
        noncentral_chi2_pdf(-1.0, 2.0, 1.0)


def test_ncx2_sampler_moments(rng):
    d = NoncentralChi2(6.0, 4.0)
    x = d.sample(rng, 200_000)
    mean, var = d.moments()
    assert x.mean() == pytest.approx(mean, abs=4 * math.sqrt(var / x.size))


def test_gamma_family():
    assert gamma_cdf(0.0, GammaDist(2.0, 2.0)) == 0.0
    v = np.linspace(0, 8, 33)
    np.testing.assert_allclose(gamma_cdf(v, GammaDist(1.0, 1.0)), 1 - np.exp(-v), rtol=1e-13, atol=1e-15)
    g = GammaDist.from_mean(2.0, 2.0)
    oracle, _ = integrate.quad(lambda t: gamma_pdf(t, g), 0, 2.0)
    assert gamma_cdf(2.0, g) == pytest.approx(oracle, rel=1e-10)
    assert gamma_cdf(2.0, g) == pytest.approx(1 - 3 * math.exp(-2.0), rel=1e-13)
    assert gamma_cdf(2.0, g) == pytest.approx(0.59399, abs=1e-5)


@pytest.mark.parametrize("dof", [2, 4, 8, 16])
@pytest.mark.parametrize("nc", [0.0, 1.0, 6.0, 50.0])
def test_pdf_normalization_grid(dof, nc):
    hi = dof + nc + 40 * math.sqrt(2 * (dof + 2 * nc))
    mass, _ = integrate.quad(lambda z: noncentral_chi2_pdf(z, dof, nc), 0, hi, limit=400, epsabs=1e-12, epsrel=1e-12)
    assert 1 - 1e-6 <= mass <= 1 + 1e-12


@pytest.mark.parametrize("dof,nc", [(2, 0.0), (4, 1.0), (8, 6.0), (16, 50.0)])
def test_cdf_pdf_finite_difference(dof, nc):
    mean, var = noncentral_chi2_moments(dof, nc)
    z = np.linspace(mean - 1.5 * math.sqrt(var), mean + 3 * math.sqrt(var), 20)
    z = z[z > 0.05]
    h = 1e-5 * np.maximum(z, 1.0)
    fd = (noncentral_chi2_cdf(z + h, dof, nc) - noncentral_chi2_cdf(z - h, dof, nc)) / (2 * h)
    np.testing.assert_allclose(fd, noncentral_chi2_pdf(z, dof, nc), rtol=1e-6)


@pytest.mark.parametrize("dof", [2, 4, 8, 16])
@pytest.mark.parametrize("nc", [1.0, 6.0, 50.0])
def test_marcum_identity_two_paths(dof, nc):
    z = np.linspace(0.0, dof + nc + 12 * math.sqrt(2 * (dof + 2 * nc)), 60)
    via_q = 1 - marcum_q(dof / 2, math.sqrt(nc), np.sqrt(z))
    np.testing.assert_allclose(via_q, noncentral_chi2_cdf_series(z, dof, nc), atol=1e-10)
    F = noncentral_chi2_cdf(z, dof, nc)
    assert np.all(np.diff(F) >= 0)
