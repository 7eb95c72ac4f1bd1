"""Analytic laws, moments, outage and average harvest of every strategy.

Harvested energy under the ideal linear model is represented either as a
:class:`ScaledChiMixture` (OA, AA, SA, AA-CSI) or as an :class:`OaCsiDist`
(best-antenna selection, single integral over a Bessel kernel).  ``scale``
arguments are the product eta * rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize
from scipy import special as sp

from .eh import EhModel, IdealLinear, Piecewise
from .errors import CapabilityError, ConvergenceError, DomainError, ValidationError
from .specfun import noncentral_chi2_cdf, noncentral_chi2_pdf, noncentral_chi2_sf
from .strategies import Strategy

__all__ = [
    "ChiTerm",
    "OaCsiDist",
    "ScaledChiMixture",
    "analytic_moments",
    "avg_harvest",
    "dist_aa",
    "dist_aa_csi",
    "dist_oa",
    "dist_sa",
    "distribution",
    "energy_outage",
    "kappa_star",
    "min_variance_delta",
    "mixture_cdf",
    "mixture_moments",
    "mixture_pdf",
    "oa_csi_cdf",
    "oa_csi_mean_bound",
    "oa_csi_pdf",
    "q1",
    "q2",
    "saturated_cdf",
    "table_ii_moments",
]

# snapping thresholds for the singular points of the delta parameterization
IID_SNAP = 1e-6  # |delta - M| < IID_SNAP * M  -> i.i.d. closed forms
POINT_SNAP = 1e-9  # delta < POINT_SNAP * M^2    -> deterministic LOS component
CONV_EPSABS = 1e-8


class ChiTerm(NamedTuple):
    scale: float
    dof: float
    nc: float


def _check_kappa_delta(kappa: float, delta: float, m: int) -> None:
    if not kappa >= 0 or not math.isfinite(kappa):
        raise DomainError(f"kappa must be finite and >= 0, got {kappa}")
    if int(m) != m or m < 1:
        raise ValidationError(f"M must be a positive integer, got {m}")
    if not -1e-9 * m * m <= delta <= m * m * (1 + 1e-9):
        raise ValidationError(f"delta={delta} outside [0, M^2] for M={m}")


@dataclass(frozen=True)
class ScaledChiMixture:
    """Independent sum  offset + sum_t scale_t * chi^2(dof_t, nc_t).

    ``offset`` carries the deterministic limit of a noncentral term whose
    scale vanishes (delta -> 0); with no terms the law is a point mass.
    """

    terms: tuple[ChiTerm, ...]
    offset: float = 0.0

    def __post_init__(self):
        terms = tuple(ChiTerm(*map(float, t)) for t in self.terms)
        for t in terms:
            if not (t.scale > 0 and t.dof > 0 and t.nc >= 0):
                raise ValidationError(f"invalid mixture term {t}")
        object.__setattr__(self, "terms", terms)

    @property
    def is_degenerate(self) -> bool:
        return not self.terms

    def mean(self) -> float:
        return mixture_moments(self)[0]

    def var(self) -> float:
        return mixture_moments(self)[1]

    def cdf(self, x):
        return mixture_cdf(self, x)

    def cdf_left(self, x):
        """P(X < x); differs from :meth:`cdf` only at the atom of a point mass."""
        if self.is_degenerate:
            return _shape_like(x, (np.asarray(x, dtype=float) > self.offset).astype(float))
        return self.cdf(x)

    def pdf(self, x):
        return mixture_pdf(self, x)

    def scaled(self, factor: float) -> "ScaledChiMixture":
        return ScaledChiMixture(
            tuple(ChiTerm(t.scale * factor, t.dof, t.nc) for t in self.terms), self.offset * factor
        )

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.full(n, self.offset)
        for t in self.terms:
            z = rng.chisquare(t.dof, n) if t.nc == 0 else rng.noncentral_chisquare(t.dof, t.nc, n)
            out += t.scale * z
        return out


def _shape_like(x, out):
    out = np.asarray(out, dtype=float)
    return out[()] if np.ndim(x) == 0 else out


def dist_oa(kappa: float, scale: float = 1.0) -> ScaledChiMixture:
    _check_kappa_delta(kappa, 1.0, 1)
    return ScaledChiMixture((ChiTerm(scale / (2.0 * (1.0 + kappa)), 2.0, 2.0 * kappa),))


def dist_aa(kappa: float, delta: float, m: int, scale: float = 1.0) -> ScaledChiMixture:
    _check_kappa_delta(kappa, delta, m)
    if delta < POINT_SNAP * m * m:
        return ScaledChiMixture((), offset=scale * m * kappa / (1.0 + kappa))
    return ScaledChiMixture(
        (ChiTerm(scale * delta / (2.0 * m * (1.0 + kappa)), 2.0, 2.0 * kappa * m * m / delta),)
    )


def dist_sa(kappa: float, delta: float, m: int, scale: float = 1.0) -> ScaledChiMixture:
    """Two-term law indexed by delta only (exact for uniform correlation)."""
    _check_kappa_delta(kappa, delta, m)
    if m == 1 or delta >= m * m * (1.0 - POINT_SNAP):
        return dist_oa(kappa, scale)
    if abs(delta - m) < IID_SNAP * m:
        return ScaledChiMixture((ChiTerm(scale / (2.0 * m * (1.0 + kappa)), 2.0 * m, 2.0 * m * kappa),))
    central = ChiTerm(
        scale * (m * m - delta) / (2.0 * m * m * (1.0 + kappa) * (m - 1)), 2.0 * (m - 1), 0.0
    )
    if delta < POINT_SNAP * m * m:
        return ScaledChiMixture((central,), offset=scale * kappa / (1.0 + kappa))
    los = ChiTerm(scale * delta / (2.0 * m * m * (1.0 + kappa)), 2.0, 2.0 * kappa * m * m / delta)
    return ScaledChiMixture((central, los))


def dist_aa_csi(kappa: float, delta: float, m: int, scale: float = 1.0) -> ScaledChiMixture:
    """MRT harvest equals M times the switching-antenna harvest draw by draw."""
    return dist_sa(kappa, delta, m, scale).scaled(m)


# ---------------------------------------------------------------------------
# mixture evaluation


def mixture_moments(d: ScaledChiMixture) -> tuple[float, float]:
    mean = d.offset + sum(t.scale * (t.dof + t.nc) for t in d.terms)
    var = sum(t.scale**2 * 2.0 * (t.dof + 2.0 * t.nc) for t in d.terms)
    return mean, var


def _term_cdf(t: ChiTerm, y: np.ndarray) -> np.ndarray:
    return noncentral_chi2_cdf(np.maximum(y, 0.0) / t.scale, t.dof, t.nc)


def _term_pdf(t: ChiTerm, y: np.ndarray) -> np.ndarray:
    return noncentral_chi2_pdf(np.maximum(y, 0.0) / t.scale, t.dof, t.nc) / t.scale


def _convolve(d: ScaledChiMixture, y: np.ndarray, outer: str) -> np.ndarray:
    """x * int_0^1 f_A(x t) G_B(x (1 - t)) dt with G_B the CDF or PDF of B.

    A is the term with the smaller number of degrees of freedom, whose
    density stays bounded at the origin.
    """
    a, b = sorted(d.terms, key=lambda t: t.dof)
    out = np.zeros_like(y)
    pos = y > 0
    if not pos.any():
        return out
    yp = y[pos]
    g_b = _term_cdf if outer == "cdf" else _term_pdf

    def integrand(t):
        return yp * _term_pdf(a, yp * t) * g_b(b, yp * (1.0 - t))

    val, err = integrate.quad_vec(
        integrand, 0.0, 1.0, epsabs=CONV_EPSABS * 0.1, epsrel=1e-10, norm="max", limit=2000
    )
    if not np.all(np.isfinite(val)):
        raise ConvergenceError("mixture convolution produced non-finite values")
    out[pos] = val
    return out


def mixture_cdf(d: ScaledChiMixture, x):
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(x_arr >= 0)):
        raise DomainError("mixture_cdf requires x >= 0")
    y = x_arr - d.offset
    if d.is_degenerate:
        out = (y >= 0).astype(float)
    elif len(d.terms) == 1:
        out = np.where(y > 0, _term_cdf(d.terms[0], y), 0.0)
    elif len(d.terms) == 2:
        out = np.clip(_convolve(d, y, "cdf"), 0.0, 1.0)
    else:
        raise CapabilityError("mixtures with more than two terms are not supported")
    return _shape_like(x, out.reshape(np.shape(x)) if np.ndim(x) else out[0])


def mixture_pdf(d: ScaledChiMixture, x):
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(x_arr >= 0)):
        raise DomainError("mixture_pdf requires x >= 0")
    y = x_arr - d.offset
    if d.is_degenerate:
        out = np.where(y == 0, np.inf, 0.0)
    elif len(d.terms) == 1:
        out = np.where(y >= 0, _term_pdf(d.terms[0], y), 0.0)
        if d.offset > 0:
            out = np.where(y > 0, out, 0.0)
    elif len(d.terms) == 2:
        out = _convolve(d, y, "pdf")
    else:
        raise CapabilityError("mixtures with more than two terms are not supported")
    return _shape_like(x, out.reshape(np.shape(x)) if np.ndim(x) else out[0])


# ---------------------------------------------------------------------------
# best-antenna selection


@dataclass(frozen=True)
class OaCsiDist:
    """Law of eta*rho*max_i |h_i|^2 under correlation summarized by delta.

    Away from delta in {M, M^2} the CDF is the expectation, over
    T with density exp(-t - c) I_0(2 sqrt(c t)), c = kappa/rho_eq, of
    F_{chi^2(2, 2 rho_eq T/(1 - rho_eq))}(2(1 + kappa) x / (scale (1 - rho_eq)))^M
    with rho_eq = (delta - M)/(M(M - 1)).  That integral requires
    rho_eq > 0, i.e. delta > M.
    """

    m: int
    kappa: float
    delta: float
    scale: float = 1.0
    epsabs: float = 1e-10
    epsrel: float = 1e-9
    kernel_cut: float = 1e-12

    def __post_init__(self):
        _check_kappa_delta(self.kappa, self.delta, self.m)
        if not self.scale > 0:
            raise DomainError("scale must be > 0")

    @property
    def route(self) -> str:
        m = self.m
        if m == 1 or self.delta >= m * m * (1.0 - POINT_SNAP):
            return "oa"
        if abs(self.delta - m) < IID_SNAP * m:
            return "iid"
        if self.delta < m:
            return "unsupported"
        return "integral"

    @property
    def rho_eq(self) -> float:
        m = self.m
        return (self.delta - m) / (m * (m - 1))

    def _kernel(self, t):
        c = self.kappa / self.rho_eq
        return np.exp(-((np.sqrt(t) - math.sqrt(c)) ** 2)) * sp.ive(0, 2.0 * np.sqrt(c * t))

    def kernel_support(self) -> tuple[float, float]:
        """t-interval outside which the kernel is below ``kernel_cut`` of its peak."""
        c = self.kappa / self.rho_eq
        s = np.linspace(max(0.0, math.sqrt(c) - 12.0), math.sqrt(c) + 12.0, 4001)
        k = self._kernel(s**2)
        keep = np.nonzero(k >= self.kernel_cut * k.max())[0]
        lo = s[max(keep[0] - 1, 0)]
        hi = s[min(keep[-1] + 1, s.size - 1)]
        return float(lo**2), float(hi**2)

    def _integral(self, u: np.ndarray, kind: str) -> np.ndarray:
        m, kappa, r = self.m, self.kappa, self.rho_eq
        z = 2.0 * (1.0 + kappa) * u / (1.0 - r)
        lo, hi = self.kernel_support()

        if kind == "cdf":
            def integrand(t):
                f = noncentral_chi2_cdf(z, 2.0, 2.0 * r * t / (1.0 - r))
                return self._kernel(t) * f**m
        else:
            def integrand(t):
                nc = 2.0 * r * t / (1.0 - r)
                f = noncentral_chi2_cdf(z, 2.0, nc)
                return self._kernel(t) * m * f ** (m - 1) * noncentral_chi2_pdf(z, 2.0, nc)

        val, err = integrate.quad_vec(
            integrand, lo, hi, epsabs=self.epsabs, epsrel=self.epsrel, norm="max", limit=4000
        )
        if not np.all(np.isfinite(val)) or err > 1e3 * max(self.epsabs, self.epsrel):
            raise ConvergenceError(
                f"OA-CSI integral did not converge (M={m}, kappa={kappa}, delta={self.delta}, "
                f"t in [{lo:.3g}, {hi:.3g}], error estimate {err:.3g})"
            )
        if kind == "pdf":
            val = val * 2.0 * (1.0 + kappa) / (1.0 - r)
        return val

    def cdf(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(~(x_arr >= 0)):
            raise DomainError("OA-CSI CDF requires x >= 0")
        route = self.route
        if route == "oa":
            out = dist_oa(self.kappa, self.scale).cdf(x_arr)
        elif route == "iid":
            out = noncentral_chi2_cdf(2.0 * (1.0 + self.kappa) * x_arr / self.scale, 2.0, 2.0 * self.kappa) ** self.m
        elif route == "integral":
            out = np.clip(self._integral(x_arr / self.scale, "cdf"), 0.0, 1.0)
        else:
            raise CapabilityError(
                "OA-CSI law is only available for delta >= M (non-negative equivalent correlation); "
                "use Monte Carlo for delta < M"
            )
        return _shape_like(x, np.reshape(out, np.shape(x)))

    def pdf(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(~(x_arr >= 0)):
            raise DomainError("OA-CSI PDF requires x >= 0")
        route = self.route
        if route == "oa":
            out = dist_oa(self.kappa, self.scale).pdf(x_arr)
        elif route == "iid":
            z = 2.0 * (1.0 + self.kappa) * x_arr / self.scale
            nc = 2.0 * self.kappa
            out = (
                2.0 * (1.0 + self.kappa) * self.m / self.scale
                * noncentral_chi2_cdf(z, 2.0, nc) ** (self.m - 1)
                * noncentral_chi2_pdf(z, 2.0, nc)
            )
        elif route == "integral":
            out = self._integral(x_arr / self.scale, "pdf") / self.scale
        else:
            raise CapabilityError("OA-CSI law is only available for delta >= M")
        return _shape_like(x, np.reshape(out, np.shape(x)))

    def upper_support(self, tail: float = 1e-13) -> float:
        """x beyond which P(X > x) < tail (union bound over antennas)."""
        base = dist_oa(self.kappa, self.scale).terms[0]
        def excess(x):
            return math.log(max(self.m * noncentral_chi2_sf(x / base.scale, 2.0, base.nc), 1e-300)) - math.log(tail)
        hi = self.scale
        while excess(hi) > 0:
            hi *= 2.0
        return optimize.brentq(excess, 0.0 if excess(0.0) < 0 else hi / 2.0, hi, xtol=1e-12 * hi)

    def moments(self, n: int = 4096) -> tuple[float, float]:
        """Mean and variance from the tail integrals of the CDF."""
        x = np.linspace(0.0, self.upper_support(), n + 1)
        sf = 1.0 - np.asarray(self.cdf(x))
        mean = integrate.simpson(sf, x=x)
        second = integrate.simpson(2.0 * x * sf, x=x)
        return float(mean), float(second - mean**2)

    def mean(self) -> float:
        return self.moments()[0]

    def var(self) -> float:
        return self.moments()[1]


def oa_csi_cdf(d: OaCsiDist, x):
    return d.cdf(x)


def oa_csi_pdf(d: OaCsiDist, x):
    return d.pdf(x)


def oa_csi_mean_bound(kappa: float, m: int, scale: float = 1.0) -> float:
    """Upper bound on the mean best-antenna harvest for i.i.d. antennas."""
    return scale * (1.0 + math.sqrt((1.0 + 2.0 * kappa) * (m - 1)) / (1.0 + kappa))


# ---------------------------------------------------------------------------
# factories and closed-form statistics


def distribution(strategy, kappa: float, delta: float, m: int, scale: float = 1.0):
    """Analytic law of the ideal-model harvest for one device."""
    s = Strategy.parse(strategy)
    if s is Strategy.OA:
        return dist_oa(kappa, scale)
    if s is Strategy.AA:
        return dist_aa(kappa, delta, m, scale)
    if s is Strategy.SA:
        return dist_sa(kappa, delta, m, scale)
    if s is Strategy.AA_CSI:
        return dist_aa_csi(kappa, delta, m, scale)
    return OaCsiDist(m, kappa, delta, scale)


def table_ii_moments(strategy, kappa: float, delta: float, m: int, scale: float = 1.0) -> tuple[float, float]:
    """Closed-form mean and variance of the ideal-model harvest."""
    s = Strategy.parse(strategy)
    _check_kappa_delta(kappa, delta, m)
    k1 = (1.0 + kappa) ** 2
    if s is Strategy.OA or (m == 1 and s in (Strategy.SA, Strategy.AA_CSI)):
        return scale, scale**2 * (1.0 + 2.0 * kappa) / k1
    if s is Strategy.AA:
        mean = (delta + kappa * m * m) / (m * (1.0 + kappa))
        var = delta * (delta + 2.0 * kappa * m * m) / (m * m * k1)
        return scale * mean, scale**2 * var
    if s in (Strategy.SA, Strategy.AA_CSI):
        num = (m + 2.0 * kappa * delta) * m * m - 2.0 * delta * m * (1.0 + kappa) + delta**2
        if s is Strategy.SA:
            return scale, scale**2 * num / (m**3 * (m - 1) * k1)
        return scale * m, scale**2 * num / (m * (m - 1) * k1)
    raise CapabilityError("best-antenna selection has no closed-form moments; use OaCsiDist.moments")


def analytic_moments(strategy, kappa: float, delta: float, m: int, scale: float = 1.0) -> tuple[float, float]:
    d = distribution(strategy, kappa, delta, m, scale)
    if isinstance(d, OaCsiDist):
        return d.moments()
    return mixture_moments(d)


def kappa_star(strategy, delta: float, m: int) -> float:
    """Rician factor at which the harvest variance peaks."""
    s = Strategy.parse(strategy)
    if m < 2:
        raise ValidationError("kappa* requires M >= 2")
    if s is Strategy.AA:
        return 1.0 - delta / (m * m)
    if s in (Strategy.SA, Strategy.AA_CSI):
        return (delta - m) * (m * m - delta) / (delta * m * (m - 1))
    raise CapabilityError(f"no variance-maximizing kappa for {s.value}")


def min_variance_delta(kappa: float, m: int) -> float:
    """delta minimizing the SA / AA-CSI variance for a given kappa."""
    if m < 2:
        raise ValidationError("requires M >= 2")
    return m * (1.0 - min(kappa * (m - 1), 1.0))


# ---------------------------------------------------------------------------
# outage and non-ideal harvesting


def energy_outage(dist, xi_th, eta: float):
    """P(xi0 < eta * xi_th) for an analytic law exposing ``cdf``."""
    xi_th = np.asarray(xi_th, dtype=float)
    if np.any(~(xi_th >= 0)):
        raise DomainError("outage threshold must be >= 0")
    return dist.cdf(eta * xi_th)


def saturated_cdf(base: Callable, eta: float, w1: float, w2: float, xi):
    """CDF of g(xi0/eta) for the piecewise harvester, given the CDF of xi0."""
    if not w1 < w2:
        raise ValidationError(f"sensitivity ({w1}) must be below saturation ({w2})")
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(~(xi_arr >= 0)):
        raise DomainError("xi must be >= 0")
    lo, hi = eta * w1, eta * w2
    mid = (xi_arr >= lo) & (xi_arr < hi)
    out = np.ones_like(xi_arr)
    out[xi_arr < lo] = float(np.asarray(base(np.array([lo])))[0]) if np.any(xi_arr < lo) else 1.0
    if mid.any():
        out[mid] = np.asarray(base(xi_arr[mid]), dtype=float)
    return _shape_like(xi, out.reshape(np.shape(xi)) if np.ndim(xi) else out[0])


def _saturation_term(w2: float, q) -> float:
    return 0.0 if math.isinf(w2) else w2 * q


def q1(dof: float, phi_scale: float, eta: float, w1: float, w2: float) -> float:
    """E[g(phi_scale * Z)] for Z ~ chi^2(dof, 0) and the piecewise harvester."""
    if phi_scale == 0:
        return 0.0
    k = 0.5 * dof
    b1, b2 = w1 / (2.0 * phi_scale), w2 / (2.0 * phi_scale)
    lin = phi_scale * dof * (sp.gammaincc(1.0 + k, b1) - sp.gammaincc(1.0 + k, b2))
    return float(eta * (lin + _saturation_term(w2, sp.gammaincc(k, b2))))


def q2(psi: float, phi_scale: float, eta: float, w1: float, w2: float) -> float:
    """E[g(phi_scale * Z)] for Z ~ chi^2(2, psi), Nakagami-m approximation."""
    if phi_scale == 0:
        return 0.0
    m = (psi / 2.0 + 1.0) ** 2 / (psi + 1.0)
    mean = phi_scale * (psi + 2.0)
    a1, a2 = m * w1 / mean, m * w2 / mean
    lin = mean * (sp.gammaincc(m + 1.0, a1) - sp.gammaincc(m + 1.0, a2))
    return float(eta * (lin + _saturation_term(w2, sp.gammaincc(m, a2))))


def _piecewise_params(eh: EhModel) -> tuple[float, float, float]:
    if isinstance(eh, Piecewise):
        return eh.eta, eh.w1, eh.w2
    if isinstance(eh, IdealLinear):
        return eh.eta, 0.0, math.inf
    raise CapabilityError("average-harvest formulas need the ideal or piecewise harvester")


def avg_harvest(strategy, kappa: float, delta: float, m: int, rho: float, eh: EhModel) -> float:
    """Average harvested power under sensitivity / saturation (one device).

    SA is an approximation (g applied to the block average), every strategy
    inherits the Nakagami approximation of :func:`q2`.
    """
    s = Strategy.parse(strategy)
    _check_kappa_delta(kappa, delta, m)
    eta, w1, w2 = _piecewise_params(eh)
    g = eh

    if s is Strategy.OA_CSI:
        raise CapabilityError("no closed form for best-antenna selection; use scenario Monte Carlo")
    if s is Strategy.OA or (m == 1 and s is not Strategy.AA):
        return q2(2.0 * kappa, rho / (2.0 * (1.0 + kappa)), eta, w1, w2)
    degenerate = delta < POINT_SNAP * m * m
    if s is Strategy.AA:
        if degenerate:
            return float(g(rho * m * kappa / (1.0 + kappa)))
        return q2(2.0 * m * m * kappa / delta, delta * rho / (2.0 * m * (1.0 + kappa)), eta, w1, w2)

    gain = 1.0 if s is Strategy.SA else float(m)
    central = q1(
        2.0 * (m - 1), gain * (m * m - delta) * rho / (2.0 * m * m * (m - 1) * (1.0 + kappa)), eta, w1, w2
    )
    if degenerate:
        los = float(g(gain * rho * kappa / (1.0 + kappa)))
    else:
        los = q2(2.0 * kappa * m * m / delta, gain * delta * rho / (2.0 * m * m * (1.0 + kappa)), eta, w1, w2)
    return central + los
