import math

import numpy as np
import pytest

from wetsim.channel import (
    custom_corr,
    equivalent_uniform_rho,
    exponential_corr,
    exponential_delta,
    identity_corr,
    rician_params,
    sample_ar1_channels,
    sample_channel,
    sample_channels,
    stream,
    uniform_corr,
    uniform_corr_eigen,
    uniform_delta,
)
from wetsim.errors import DomainError, NotPSDError, ValidationError


def test_rician_params():
    p = rician_params(0.0)
    assert p.mu == 0.0 and p.sigma2 == 0.5
    p = rician_params(3.0)
    assert p.mu**2 == pytest.approx(0.75) and p.sigma2 == pytest.approx(0.125)
    p = rician_params(1e9)
    assert p.sigma2 < 1e-9 and p.mu**2 == pytest.approx(1.0)
    with pytest.raises(DomainError):
        rician_params(-0.1)
    with pytest.raises(DomainError):
        rician_params(float("nan"))


@pytest.mark.parametrize("m,rho,delta", [(4, 0.0, 4.0), (4, 1.0, 16.0), (3, -0.5, 0.0)])
def test_uniform_delta(m, rho, delta):
    c = uniform_corr(m, rho)
    assert c.delta == pytest.approx(delta, abs=1e-12)
    assert c.entries.sum() == pytest.approx(delta, abs=1e-12)


def test_uniform_bounds():
    with pytest.raises(ValidationError):
        uniform_corr(3, -0.6)
    with pytest.raises(ValidationError):
        uniform_corr(3, 1.2)
    with pytest.raises(ValidationError):
        uniform_corr(0, 0.1)


def test_exponential_delta():
    assert exponential_corr(3, 0.5).delta == pytest.approx(5.5)
    for m in (1, 2, 5, 9):
        assert exponential_delta(m, 0.0) == m
        assert exponential_delta(m, 1.0) == pytest.approx(m * m)
    for m, tau in [(4, 0.3), (16, 0.8), (7, 0.95)]:
        assert exponential_corr(m, tau).entries.sum() == pytest.approx(exponential_delta(m, tau), rel=1e-13)
    with pytest.raises(ValidationError):
        exponential_corr(4, 1.1)


def test_equivalent_rho():
    assert equivalent_uniform_rho(uniform_corr(4, 0.3)) == pytest.approx(0.3)
    assert equivalent_uniform_rho(exponential_corr(3, 0.5)) == pytest.approx(2.5 / 6)
    assert equivalent_uniform_rho(identity_corr(8)) == 0.0


def test_uniform_eigen():
    np.testing.assert_allclose(uniform_corr_eigen(4, 0.2), [0.8, 0.8, 0.8, 1.6])
    np.testing.assert_allclose(uniform_corr_eigen(6, 0.0), np.ones(6))
    assert uniform_corr_eigen(4, 0.2).sum() == pytest.approx(4.0)
    for m in (2, 5, 16):
        for rho in (-1 / (m - 1), -0.01, 0.4, 1.0):
            num = np.linalg.eigvalsh(uniform_corr(m, rho).entries)
            np.testing.assert_allclose(uniform_corr_eigen(m, rho), num, atol=1e-10)


def test_factor_reconstruction():
    np.testing.assert_allclose(identity_corr(5).factor, np.eye(5))
    low = uniform_corr(2, 1.0).factor
    np.testing.assert_allclose(low @ low.T, np.ones((2, 2)), atol=1e-12)
    c = exponential_corr(4, 0.6)
    assert np.abs(c.factor @ c.factor.T - c.entries).max() <= 1e-10
    # singular at the lower bound
    c = uniform_corr(5, -0.25)
    assert np.abs(c.factor @ c.factor.T - c.entries).max() <= 1e-10


def test_custom_validation():
    with pytest.raises(ValidationError):
        custom_corr([[1, 0.2], [0.3, 1]])
    with pytest.raises(ValidationError):
        custom_corr([[2, 0], [0, 1]])
    with pytest.raises(NotPSDError):
        custom_corr([[1, 0.9, -0.9], [0.9, 1, 0.9], [-0.9, 0.9, 1]])


def test_unit_average_gain():
    g = np.abs(sample_channels(uniform_corr(4, 0.5), rician_params(2.0), stream(1), 250_000)) ** 2
    assert g.mean() == pytest.approx(1.0, abs=0.005)


def test_sample_correlation():
    h = sample_channels(uniform_corr(3, 0.5), rician_params(1.0), stream(2), 200_000)
    r = np.corrcoef(h.real.T)
    assert r[0, 1] == pytest.approx(0.5, abs=0.01)
    assert r[1, 2] == pytest.approx(0.5, abs=0.01)


def test_rayleigh_zero_mean():
    d = sample_channel(identity_corr(1), rician_params(0.0), stream(3))
    assert d.h.shape == (1,)
    h = sample_channels(identity_corr(2), rician_params(0.0), stream(3), 200_000)
    assert abs(h.real.mean()) < 0.004


def test_channel_draw_gains():
    d = sample_channel(identity_corr(3), rician_params(1.0), stream(4))
    np.testing.assert_allclose(d.gains, np.abs(d.h) ** 2)


def test_ar1_covariance():
    m, tau = 6, 0.7
    p = rician_params(1.5)
    h = sample_ar1_channels(m, tau, p, stream(5), 200_000)
    cov = np.cov(h.real.T) / p.sigma2
    np.testing.assert_allclose(cov, exponential_corr(m, tau).entries, atol=0.015)
    assert h.real.mean() == pytest.approx(p.mu / math.sqrt(2), abs=0.005)


def test_streams_are_reproducible_and_distinct():
    a = stream(9, 0).standard_normal(4)
    b = stream(9, 0).standard_normal(4)
    c = stream(9, 1).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


@pytest.mark.parametrize("kappa", [0.0, 1.0, 3.0])
def test_envelope_is_rician(kappa):
    from scipy import stats
    p = rician_params(kappa)
    h = sample_channels(identity_corr(1), p, stream(10), 1_000_000)[:, 0]
    # |h| / sigma is Rice with shape mu / sigma
    r = np.abs(h) / p.sigma
    assert stats.kstest(r, stats.rice(p.mu / p.sigma).cdf).statistic <= 0.003
