"""Correlated Rician channels: parameterization, correlation models, sampling.

The channel to one device is ``h = alpha + 1j*beta`` with
``alpha, beta ~ N(mu/sqrt(2) * 1, sigma2 * R)`` independent, equal mean phase
on every antenna and unit average power per antenna.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, NotPSDError, ValidationError

__all__ = [
    "ChannelDraw",
    "CorrelationMatrix",
    "RicianParams",
    "corr_factor",
    "custom_corr",
    "equivalent_uniform_rho",
    "exponential_corr",
    "exponential_delta",
    "identity_corr",
    "rician_params",
    "sample_ar1_channels",
    "sample_channel",
    "sample_channels",
    "stream",
    "uniform_corr",
    "uniform_corr_eigen",
    "uniform_delta",
]

PSD_TOL = 1e-10
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class RicianParams:
    kappa: float
    mu: float
    sigma2: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def rician_params(kappa: float) -> RicianParams:
    """Split unit channel power into LOS mean mu and scatter variance sigma2."""
    kappa = float(kappa)
    if not math.isfinite(kappa) or kappa < 0:
        raise DomainError(f"Rician factor must be finite and >= 0, got {kappa}")
    sigma2 = 1.0 / (2.0 * (1.0 + kappa))
    mu = math.sqrt(kappa / (1.0 + kappa))
    return RicianParams(kappa=kappa, mu=mu, sigma2=sigma2)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Normalized covariance R of the real (and imaginary) channel parts.

    ``delta`` is the sum of all entries; for the uniform and exponential
    models it is computed from the closed form rather than the matrix.
    """

    entries: np.ndarray
    kind: str = "custom"
    param: float | None = None
    delta: float = field(default=float("nan"))

    def __post_init__(self):
        r = np.array(self.entries, dtype=float)
        if r.ndim != 2 or r.shape[0] != r.shape[1] or r.shape[0] < 1:
            raise ValidationError("correlation matrix must be square and non-empty")
        if not np.allclose(r, r.T, rtol=0, atol=1e-12):
            raise ValidationError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(r), 1.0, rtol=0, atol=1e-12):
            raise ValidationError("correlation matrix must have a unit diagonal")
        if np.any(np.abs(r) > 1.0 + 1e-12):
            raise ValidationError("correlation entries must satisfy |r_ij| <= 1")
        lam_min = float(np.linalg.eigvalsh(r)[0])
        if lam_min < -PSD_TOL:
            raise NotPSDError(f"correlation matrix not PSD (smallest eigenvalue {lam_min:.3e})")
        r.setflags(write=False)
        object.__setattr__(self, "entries", r)
        if math.isnan(self.delta):
            object.__setattr__(self, "delta", float(r.sum()))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def factor(self) -> np.ndarray:
        return corr_factor(self)

    def __repr__(self) -> str:
        return f"CorrelationMatrix(m={self.m}, kind={self.kind!r}, param={self.param}, delta={self.delta:.6g})"


def _check_m(m: int) -> int:
    if int(m) != m or m < 1:
        raise ValidationError(f"antenna count must be a positive integer, got {m}")
    return int(m)


def uniform_delta(m: int, rho: float) -> float:
    return m * (1.0 + (m - 1) * rho)


def exponential_delta(m: int, tau: float) -> float:
    return m + 2.0 * sum((m - i) * tau**i for i in range(1, m))


def _check_uniform_rho(m: int, rho: float) -> None:
    lower = -1.0 / (m - 1) if m > 1 else -1.0
    if not (lower - _BOUND_SLACK <= rho <= 1.0 + _BOUND_SLACK):
        raise ValidationError(
            f"uniform correlation rho={rho} outside [-1/(M-1), 1] = [{lower:.6g}, 1] for M={m}"
        )


def uniform_corr(m: int, rho: float) -> CorrelationMatrix:
    m = _check_m(m)
    rho = float(rho)
    _check_uniform_rho(m, rho)
    r = np.full((m, m), rho)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(r, kind="uniform", param=rho, delta=uniform_delta(m, rho))


def exponential_corr(m: int, tau: float) -> CorrelationMatrix:
    m = _check_m(m)
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"exponential correlation tau={tau} outside [0, 1]")
    idx = np.arange(m)
    r = tau ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    return CorrelationMatrix(r, kind="exponential", param=tau, delta=exponential_delta(m, tau))


def identity_corr(m: int) -> CorrelationMatrix:
    m = _check_m(m)
    return CorrelationMatrix(np.eye(m), kind="uniform", param=0.0, delta=float(m))


def custom_corr(entries) -> CorrelationMatrix:
    return CorrelationMatrix(np.asarray(entries, dtype=float), kind="custom")


def equivalent_uniform_rho(c: CorrelationMatrix) -> float:
    """Uniform coefficient with the same delta: (delta - M) / (M(M-1))."""
    m = c.m
    if m < 2:
        raise ValidationError("equivalent uniform correlation is undefined for M = 1")
    rho = (c.delta - m) / (m * (m - 1))
    lower = -1.0 / (m - 1)
    if not (lower - _BOUND_SLACK <= rho <= 1.0 + _BOUND_SLACK):
        warnings.warn(
            f"equivalent rho={rho:.6g} lies outside [{lower:.6g}, 1]", RuntimeWarning, stacklevel=2
        )
    return rho


def uniform_corr_eigen(m: int, rho: float) -> np.ndarray:
    """Eigenvalues of the uniform correlation matrix, ascending."""
    m = _check_m(m)
    rho = float(rho)
    _check_uniform_rho(m, rho)
    vals = np.array([1.0 - rho] * (m - 1) + [1.0 + (m - 1) * rho])
    return np.sort(vals)


def corr_factor(c: CorrelationMatrix) -> np.ndarray:
    """L with L @ L.T == R.

    Cholesky first; singular or near-singular matrices (rho at its lower
    bound, tau = 1, ...) fall back to an eigen-factorization with tiny
    negative eigenvalues clipped to zero.
    """
    r = c.entries
    try:
        low = np.linalg.cholesky(r)
        if np.linalg.norm(low @ low.T - r) <= PSD_TOL:
            return low
    except np.linalg.LinAlgError:
        pass
    lam, vec = np.linalg.eigh(r)
    if lam[0] < -PSD_TOL:
        raise NotPSDError(f"correlation matrix not PSD (smallest eigenvalue {lam[0]:.3e})")
    return vec * np.sqrt(np.clip(lam, 0.0, None))


@dataclass(frozen=True)
class ChannelDraw:
    real_part: np.ndarray
    imag_part: np.ndarray

    @property
    def h(self) -> np.ndarray:
        return self.real_part + 1j * self.imag_part

    @property
    def gains(self) -> np.ndarray:
        return self.real_part**2 + self.imag_part**2


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent random stream number ``index`` derived from a 64-bit seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def sample_channels(
    c: CorrelationMatrix, p: RicianParams, rng: np.random.Generator, n: int
) -> np.ndarray:
    """``n`` channel vectors as a complex array of shape (n, M)."""
    low = c.factor
    m = c.m
    mean = p.mu / math.sqrt(2.0)
    sigma = p.sigma
    z = rng.standard_normal((2, n, m))
    alpha = mean + sigma * (z[0] @ low.T)
    beta = mean + sigma * (z[1] @ low.T)
    return alpha + 1j * beta


def sample_channel(c: CorrelationMatrix, p: RicianParams, rng: np.random.Generator) -> ChannelDraw:
    h = sample_channels(c, p, rng, 1)[0]
    return ChannelDraw(real_part=h.real.copy(), imag_part=h.imag.copy())


def sample_ar1_channels(m: int, tau: float, p: RicianParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """Exponentially correlated channels by the AR(1) recursion along the array.

    Same law as ``sample_channels(exponential_corr(m, tau), ...)`` without
    factorizing R; used where every user has its own tau.
    """
    m = _check_m(m)
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"exponential correlation tau={tau} outside [0, 1]")
    z = rng.standard_normal((2, n, m))
    innov = math.sqrt(max(1.0 - tau * tau, 0.0))
    for i in range(1, m):
        z[:, :, i] = tau * z[:, :, i - 1] + innov * z[:, :, i]
    mean = p.mu / math.sqrt(2.0)
    return (mean + p.sigma * z[0]) + 1j * (mean + p.sigma * z[1])
