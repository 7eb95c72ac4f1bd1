"""Energy-harvester transfer functions g: incident RF power -> harvested power.

Powers are linear milliwatts throughout; dBm only appears at I/O edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ValidationError

__all__ = [
    "EhModel",
    "IdealLinear",
    "Logistic",
    "PAPER_LOGISTIC",
    "PAPER_PIECEWISE",
    "Piecewise",
    "dbm_to_linear",
    "harvest",
    "linear_to_dbm",
]


def dbm_to_linear(x):
    """dBm -> mW."""
    out = np.power(10.0, np.asarray(x, dtype=float) / 10.0)
    return out[()] if out.ndim == 0 else out


def linear_to_dbm(p):
    """mW -> dBm."""
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(np.asarray(p, dtype=float))
    return out[()] if out.ndim == 0 else out


def _check_eta(eta: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"conversion efficiency must lie in [0, 1], got {eta}")


@dataclass(frozen=True)
class IdealLinear:
    eta: float = 1.0

    def __post_init__(self):
        _check_eta(self.eta)

    def __call__(self, rf):
        return self.eta * np.asarray(rf, dtype=float)


@dataclass(frozen=True)
class Piecewise:
    """Linear harvester with sensitivity ``w1`` and saturation ``w2`` (mW)."""

    eta: float
    w1: float
    w2: float

    def __post_init__(self):
        _check_eta(self.eta)
        if not self.w1 >= 0:
            raise ValidationError(f"sensitivity must be >= 0, got {self.w1}")
        if not self.w2 > self.w1:
            raise ValidationError(f"saturation ({self.w2}) must exceed sensitivity ({self.w1})")

    def __call__(self, rf):
        rf = np.asarray(rf, dtype=float)
        out = np.where(rf < self.w1, 0.0, self.eta * np.minimum(rf, self.w2))
        return out


@dataclass(frozen=True)
class Logistic:
    """Logistic harvester; p2 and p3 are expressed in ``unit`` mW (default uW)."""

    p1: float
    p2: float
    p3: float
    unit: float = 1e-3

    def __post_init__(self):
        if not (self.p1 > 0 and self.p2 > 0 and self.p3 > 0 and self.unit > 0):
            raise ValidationError("logistic parameters and unit must be positive")

    @property
    def ceiling(self) -> float:
        """Supremum of the output, in mW."""
        return self.p3 * self.unit

    def __call__(self, rf):
        x = np.asarray(rf, dtype=float) / self.unit
        e = np.exp(self.p1 * self.p2)
        with np.errstate(over="ignore"):
            y = self.p3 * ((1.0 + e) / (1.0 + np.exp(-self.p1 * (x - self.p2))) - 1.0) / e
        return y * self.unit


EhModel = Union[IdealLinear, Piecewise, Logistic]

PAPER_PIECEWISE = Piecewise(eta=0.25, w1=float(dbm_to_linear(-22.0)), w2=float(dbm_to_linear(-4.8)))
PAPER_LOGISTIC = Logistic(p1=0.015, p2=140.0, p3=84.0)


def harvest(model: EhModel, rf_in):
    """Harvested power for incident RF power ``rf_in`` (mW)."""
    rf = np.asarray(rf_in, dtype=float)
    if np.any(~(rf >= 0)):
        raise DomainError("incident RF power must be >= 0")
    out = np.asarray(model(rf), dtype=float)
    return out[()] if out.ndim == 0 else out


def efficiency(model: EhModel) -> float:
    """Conversion efficiency used for outage thresholds (1 for the logistic model)."""
    return float(getattr(model, "eta", 1.0))
