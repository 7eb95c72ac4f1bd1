"""Special functions and the gamma / (non)central chi-squared family.

Elementary special functions (log-gamma, regularized incomplete gamma,
exponentially scaled Bessel I) come from :mod:`scipy.special`.  The
generalized Marcum Q-function and the noncentral chi-squared CDF are
implemented here through two deliberately different series so that the
identity ``F(z) = 1 - Q_{dof/2}(sqrt(nc), sqrt(z))`` can be used as a check.

All public functions broadcast over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .errors import DomainError

__all__ = [
    "GammaDist",
    "NoncentralChi2",
    "bessel_i",
    "bessel_i_scaled",
    "gamma_cdf",
    "gamma_pdf",
    "log_gamma",
    "marcum_q",
    "noncentral_chi2_cdf",
    "noncentral_chi2_cdf_series",
    "noncentral_chi2_moments",
    "noncentral_chi2_pdf",
    "noncentral_chi2_sf",
    "upper_incomplete_gamma",
]

_SERIES_RTOL = 1e-14
# a*b above this switches Marcum Q from the Bessel series to the Poisson series
_BESSEL_SWITCH = 30.0
# below this the noncentral argument is treated as exactly zero (error O(a^2))
_TINY_ARG = 1e-10
_MAX_TERMS = 100_000


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return x[()] if x.ndim == 0 else x


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("log_gamma requires x > 0")
    return _scalar_or_array(sp.gammaln(x))


def upper_incomplete_gamma(s, x):
    """Non-regularized upper incomplete gamma Gamma(s, x)."""
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(s > 0)) or np.any(~(x >= 0)):
        raise DomainError("upper_incomplete_gamma requires s > 0 and x >= 0")
    with np.errstate(over="ignore", under="ignore"):
        out = sp.gammaincc(s, x) * np.exp(sp.gammaln(s))
    return _scalar_or_array(out)


def bessel_i(order, x):
    """Modified Bessel function of the first kind I_order(x).

    Overflows to ``inf`` beyond x ~ 700; use :func:`bessel_i_scaled` there.
    """
    order = np.asarray(order, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0)) or np.any(~(order >= 0)):
        raise DomainError("bessel_i requires order >= 0 and x >= 0")
    with np.errstate(over="ignore"):
        return _scalar_or_array(sp.iv(order, x))


def bessel_i_scaled(order, x):
    """exp(-x) * I_order(x), finite for every x >= 0."""
    order = np.asarray(order, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0)) or np.any(~(order >= 0)):
        raise DomainError("bessel_i_scaled requires order >= 0 and x >= 0")
    return _scalar_or_array(sp.ive(order, x))


# ---------------------------------------------------------------------------
# Marcum Q


def _marcum_bessel(nu: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Integer-order Marcum Q by the Bessel series (a, b > 0, a*b moderate).

    For b > a:  Q = exp(-(a-b)^2/2) * sum_{k=1-nu}^inf (a/b)^k ive(k, ab)
    otherwise:  Q = 1 - exp(-(a-b)^2/2) * sum_{k=nu}^inf (b/a)^k ive(k, ab)
    Both sums have a ratio < 1 on the tail, so terms decay monotonically.
    """
    ab = a * b
    upper = b > a
    log_ratio = np.where(upper, np.log(a) - np.log(b), np.log(b) - np.log(a))
    k0 = np.where(upper, 1 - nu, nu).astype(float)
    pref = np.exp(-0.5 * (a - b) ** 2)

    total = np.zeros_like(ab)
    k = k0.copy()
    active = np.ones(ab.shape, dtype=bool)
    for _ in range(_MAX_TERMS):
        with np.errstate(divide="ignore", under="ignore", over="ignore", invalid="ignore"):
            term = np.exp(k * log_ratio + np.log(sp.ive(np.abs(k), ab)))
        term = np.where(np.isfinite(term), term, 0.0)
        term = np.where(active, term, 0.0)
        total += term
        # terms only shrink once k >= 0; negative-k terms are a finite prefix
        done = (k >= 0) & (term <= _SERIES_RTOL * total)
        active &= ~done
        if not active.any():
            break
        k += 1.0
    series = pref * total
    return np.where(upper, series, 1.0 - series)


def _poisson_window(lam: np.ndarray) -> tuple[int, int]:
    """Index range holding all non-negligible Poisson(lam) mass."""
    lam_max = float(np.max(lam)) if lam.size else 0.0
    lam_min = float(np.min(lam)) if lam.size else 0.0
    lo = max(0, int(math.floor(lam_min - 12.0 * math.sqrt(lam_min) - 20.0)))
    hi = int(math.ceil(lam_max + 12.0 * math.sqrt(lam_max) + 40.0))
    return lo, hi


def _poisson_gamma_series(shape: float, lam: np.ndarray, x: np.ndarray, upper: bool) -> np.ndarray:
    """sum_j Pois(j; lam) * R(shape + j, x), R = regularized Q (upper) or P."""
    lo, hi = _poisson_window(lam)
    fn = sp.gammaincc if upper else sp.gammainc
    out = np.zeros(np.broadcast(lam, x).shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lam = np.log(lam)
    for j in range(lo, hi + 1):
        with np.errstate(invalid="ignore", under="ignore"):
            w = np.exp(-lam + j * log_lam - sp.gammaln(j + 1.0))
        w = np.where(lam > 0, w, 1.0 if j == 0 else 0.0)
        out += w * fn(shape + j, x)
    return np.clip(out, 0.0, 1.0)


def marcum_q(order, a, b):
    """Generalized Marcum Q-function Q_order(a, b).

    Integer orders with a*b <= 30 use the Bessel-term series; everything
    else uses the Poisson-weighted incomplete-gamma series of the
    noncentral chi-squared tail.
    """
    order_f = float(order)
    if not order_f > 0:
        raise DomainError("marcum_q requires order > 0")
    a_arr, b_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if np.any(~(a_arr >= 0)) or np.any(~(b_arr >= 0)):
        raise DomainError("marcum_q requires a >= 0 and b >= 0")
    a_arr = a_arr.astype(float).copy()
    b_arr = b_arr.astype(float)
    out = np.empty(a_arr.shape)

    zero_b = b_arr == 0
    out[zero_b] = 1.0
    central = ~zero_b & (a_arr < _TINY_ARG)
    out[central] = sp.gammaincc(order_f, 0.5 * b_arr[central] ** 2)

    rest = ~zero_b & ~central
    is_int = order_f == round(order_f)
    bessel = rest & (a_arr * b_arr <= _BESSEL_SWITCH) if is_int else np.zeros_like(rest)
    if bessel.any():
        out[bessel] = _marcum_bessel(int(round(order_f)), a_arr[bessel], b_arr[bessel])
    poisson = rest & ~bessel
    if poisson.any():
        out[poisson] = _poisson_gamma_series(
            order_f, 0.5 * a_arr[poisson] ** 2, 0.5 * b_arr[poisson] ** 2, upper=True
        )
    return _scalar_or_array(np.clip(out, 0.0, 1.0))


# ---------------------------------------------------------------------------
# chi-squared family


def _check_chi2(dof: float, nc: float) -> None:
    if not dof > 0:
        raise DomainError(f"dof must be > 0, got {dof}")
    if not nc >= 0:
        raise DomainError(f"noncentrality must be >= 0, got {nc}")


def _check_nonneg(z: np.ndarray, name: str = "z") -> None:
    if np.any(~(z >= 0)):
        raise DomainError(f"{name} must be >= 0")


def noncentral_chi2_pdf(z, dof: float, nc: float):
    """Density of chi^2(dof, nc) at z; nc = 0 uses the central closed form."""
    _check_chi2(dof, nc)
    z = np.asarray(z, dtype=float)
    _check_nonneg(z)
    half = 0.5 * dof
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        if nc == 0:
            logf = (half - 1.0) * np.log(0.5 * z) - 0.5 * z - sp.gammaln(half) - math.log(2.0)
            out = np.exp(logf)
            if dof == 2:
                out = np.where(z == 0, 0.5, out)
        else:
            nu = half - 1.0
            arg = np.sqrt(nc * z)
            logf = (
                -0.5 * (np.sqrt(z) - math.sqrt(nc)) ** 2
                + 0.5 * nu * (np.log(z) - math.log(nc))
                + np.log(sp.ive(nu, arg))
                - math.log(2.0)
            )
            out = np.exp(logf)
            if dof == 2:
                out = np.where(z == 0, 0.5 * math.exp(-0.5 * nc), out)
    out = np.where(np.isfinite(out), out, np.where(z == 0, np.inf if dof < 2 else 0.0, 0.0))
    return _scalar_or_array(out)


def noncentral_chi2_cdf(z, dof: float, nc: float):
    """P(Z <= z) for Z ~ chi^2(dof, nc)."""
    _check_chi2(dof, nc)
    z = np.asarray(z, dtype=float)
    _check_nonneg(z)
    if nc == 0:
        return _scalar_or_array(sp.gammainc(0.5 * dof, 0.5 * z))
    return _scalar_or_array(np.clip(sp.chndtr(z, dof, nc), 0.0, 1.0))


def noncentral_chi2_cdf_series(z, dof: float, nc: float):
    """Same as :func:`noncentral_chi2_cdf`, summed as a Poisson mixture of central CDFs."""
    _check_chi2(dof, nc)
    z = np.asarray(z, dtype=float)
    _check_nonneg(z)
    lam = np.full(z.shape, 0.5 * nc)
    return _scalar_or_array(_poisson_gamma_series(0.5 * dof, lam, 0.5 * z, upper=False))


def noncentral_chi2_sf(z, dof: float, nc: float):
    """Survival function P(Z > z) via the Marcum Q-function."""
    _check_chi2(dof, nc)
    z = np.asarray(z, dtype=float)
    _check_nonneg(z)
    if nc == 0:
        return _scalar_or_array(sp.gammaincc(0.5 * dof, 0.5 * z))
    return marcum_q(0.5 * dof, math.sqrt(nc), np.sqrt(z))


def noncentral_chi2_moments(dof: float, nc: float) -> tuple[float, float]:
    _check_chi2(dof, nc)
    return dof + nc, 2.0 * (dof + 2.0 * nc)


@dataclass(frozen=True)
class NoncentralChi2:
    """chi^2(dof, noncentrality); noncentrality 0 is the central law."""

    dof: float
    noncentrality: float = 0.0

    def __post_init__(self):
        _check_chi2(self.dof, self.noncentrality)

    def pdf(self, z):
        return noncentral_chi2_pdf(z, self.dof, self.noncentrality)

    def cdf(self, z):
        return noncentral_chi2_cdf(z, self.dof, self.noncentrality)

    def sf(self, z):
        return noncentral_chi2_sf(z, self.dof, self.noncentrality)

    def moments(self) -> tuple[float, float]:
        return noncentral_chi2_moments(self.dof, self.noncentrality)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.noncentrality == 0:
            return rng.chisquare(self.dof, size)
        return rng.noncentral_chisquare(self.dof, self.noncentrality, size)


# ---------------------------------------------------------------------------
# gamma


@dataclass(frozen=True)
class GammaDist:
    """Gamma law with the (m, a/m) parameterization: shape m, scale a/m."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError("GammaDist requires shape > 0 and scale > 0")

    @classmethod
    def from_mean(cls, m: float, mean: float) -> "GammaDist":
        return cls(m, mean / m)

    def pdf(self, v):
        return gamma_pdf(v, self)

    def cdf(self, v):
        return gamma_cdf(v, self)


def gamma_pdf(v, g: GammaDist):
    v = np.asarray(v, dtype=float)
    _check_nonneg(v, "v")
    m = g.shape
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        logf = -m * math.log(g.scale) - sp.gammaln(m) + (m - 1.0) * np.log(v) - v / g.scale
        out = np.exp(logf)
    if m == 1:
        out = np.where(v == 0, 1.0 / g.scale, out)
    out = np.where(np.isnan(out), 0.0, out)
    return _scalar_or_array(out)


def gamma_cdf(v, g: GammaDist):
    """1 - Gamma(m, v/scale) / Gamma(m)."""
    v = np.asarray(v, dtype=float)
    _check_nonneg(v, "v")
    return _scalar_or_array(1.0 - sp.gammaincc(g.shape, v / g.scale))
