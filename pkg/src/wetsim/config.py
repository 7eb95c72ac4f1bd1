"""Run configuration: YAML document -> validated :class:`RunConfig`.

Every power field is a mapping ``{value: <number>, unit: dBm | mW}``.
Unknown keys are rejected with the dotted path of the offending field.
"""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import yaml

from .channel import CorrelationMatrix, custom_corr, exponential_corr, identity_corr, uniform_corr
from .eh import PAPER_LOGISTIC, PAPER_PIECEWISE, IdealLinear, Logistic, Piecewise, dbm_to_linear
from .errors import ConfigError, WetsimError
from .montecarlo import ScenarioConfig
from .strategies import Strategy

__all__ = ["RunConfig", "apply_overrides", "load_config", "parse_config"]

POWER_UNITS = ("dBm", "mW")


@dataclass(frozen=True)
class MultiUserSection:
    users: tuple[int, ...] = (1, 2, 4, 8)
    fairness_antennas: tuple[int, ...] = (4, 8, 16, 32, 64)
    fairness_users: int = 1
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)


@dataclass(frozen=True)
class RunConfig:
    seed: int
    workers: int
    kappa: float
    m: int
    corr: CorrelationMatrix
    rho: float  # mW
    eta: float
    piecewise: Piecewise
    logistic: Logistic
    eh_kind: str
    strategies: tuple[Strategy, ...]
    samples: int
    bins: int
    grid_points: int
    thresholds: tuple[float, ...]
    rho_sweep: tuple[float, ...]
    avg_samples: int
    multiuser: MultiUserSection
    multiuser_strategies: tuple[Strategy, ...]
    validate_samples: int
    source: dict = field(default_factory=dict, compare=False)

    @property
    def delta(self) -> float:
        return self.corr.delta

    @property
    def eh_model(self):
        if self.eh_kind == "ideal":
            return IdealLinear(self.eta)
        if self.eh_kind == "piecewise":
            return self.piecewise
        return self.logistic


# ---------------------------------------------------------------------------
# helpers


class _Node:
    """Mapping view that records consumed keys so leftovers can be rejected."""

    def __init__(self, data: Any, path: str):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(path, "expected a mapping")
        self.data = data
        self.path = path
        self.used: set[str] = set()

    def _p(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def has(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default=None):
        self.used.add(key)
        return self.data.get(key, default)

    def child(self, key: str) -> "_Node":
        self.used.add(key)
        return _Node(self.data.get(key), self._p(key))

    def number(self, key: str, default=None, lo=None, hi=None, lo_open=False) -> float:
        self.used.add(key)
        v = self.data.get(key, default)
        if v is None:
            raise ConfigError(self._p(key), "is required")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(self._p(key), f"expected a number, got {v!r}")
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(self._p(key), "must be finite")
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise ConfigError(self._p(key), f"must be {'>' if lo_open else '>='} {lo}, got {v:g}")
        if hi is not None and v > hi:
            raise ConfigError(self._p(key), f"must be <= {hi}, got {v:g}")
        return v

    def integer(self, key: str, default=None, lo: int = 1) -> int:
        self.used.add(key)
        v = self.data.get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
            raise ConfigError(self._p(key), f"expected an integer, got {v!r}")
        if v < lo:
            raise ConfigError(self._p(key), f"must be >= {lo}, got {v}")
        return int(v)

    def int_list(self, key: str, default) -> tuple[int, ...]:
        self.used.add(key)
        v = self.data.get(key, default)
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigError(self._p(key), "expected a non-empty list of integers")
        out = []
        for i, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or int(x) != x or x < 1:
                raise ConfigError(f"{self._p(key)}[{i}]", f"expected a positive integer, got {x!r}")
            out.append(int(x))
        return tuple(out)

    def choice(self, key: str, options, default=None) -> str:
        self.used.add(key)
        v = self.data.get(key, default)
        if v not in options:
            raise ConfigError(self._p(key), f"expected one of {list(options)}, got {v!r}")
        return v

    def power(self, key: str, default=None) -> float:
        """Power field -> mW."""
        self.used.add(key)
        v = self.data.get(key, default)
        if v is None:
            raise ConfigError(self._p(key), "is required")
        node = _Node(v, self._p(key))
        unit = node.choice("unit", POWER_UNITS)
        value = node.number("value")
        node.finish()
        if unit == "dBm":
            return float(dbm_to_linear(value))
        if value < 0:
            raise ConfigError(node._p("value"), "linear power must be >= 0")
        return value

    def sweep(self, key: str, default=None) -> tuple[float, ...]:
        """Either ``{values: [...], unit}`` or ``{start, stop, num, spacing, unit}`` -> mW."""
        self.used.add(key)
        v = self.data.get(key, default)
        if v is None:
            raise ConfigError(self._p(key), "is required")
        node = _Node(v, self._p(key))
        unit = node.choice("unit", POWER_UNITS)
        if node.has("values"):
            vals = node.raw("values")
            if not isinstance(vals, (list, tuple)) or not vals:
                raise ConfigError(node._p("values"), "expected a non-empty list")
            arr = []
            for i, x in enumerate(vals):
                if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                    raise ConfigError(f"{node._p('values')}[{i}]", f"expected a number, got {x!r}")
                arr.append(float(x))
            arr = np.array(arr)
        else:
            start, stop = node.number("start"), node.number("stop")
            num = node.integer("num", lo=1)
            spacing = node.choice("spacing", ("linear", "log"), "linear")
            if spacing == "log":
                if unit == "dBm":
                    raise ConfigError(node._p("spacing"), "log spacing applies to mW sweeps; dBm sweeps are already logarithmic")
                if not (start > 0 and stop > 0):
                    raise ConfigError(node.path, "log spacing needs start, stop > 0")
                arr = np.geomspace(start, stop, num)
            else:
                arr = np.linspace(start, stop, num)
        node.finish()
        if unit == "dBm":
            return tuple(float(x) for x in dbm_to_linear(arr))
        if np.any(arr < 0):
            raise ConfigError(node.path, "linear powers must be >= 0")
        return tuple(float(x) for x in arr)

    def finish(self) -> None:
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(self._p(extra[0]), "unknown key")


# ---------------------------------------------------------------------------
# sections


def _correlation(node: _Node, m: int) -> CorrelationMatrix:
    kind = node.choice("model", ("identity", "uniform", "exponential", "custom"), "identity")
    try:
        if kind == "identity":
            c = identity_corr(m)
        elif kind == "uniform":
            c = uniform_corr(m, node.number("rho"))
        elif kind == "exponential":
            c = exponential_corr(m, node.number("tau", lo=0.0, hi=1.0))
        else:
            entries = node.raw("entries")
            c = custom_corr(np.asarray(entries, dtype=float))
            if c.m != m:
                raise ConfigError(node._p("entries"), f"matrix is {c.m}x{c.m} but channel.antennas = {m}")
    except ConfigError:
        raise
    except (WetsimError, ValueError, TypeError) as exc:
        raise ConfigError(node.path, str(exc)) from None
    node.finish()
    return c


def _eh(node: _Node):
    kind = node.choice("model", ("ideal", "piecewise", "logistic"), "ideal")
    eta = node.number("eta", PAPER_PIECEWISE.eta if kind != "ideal" else 1.0, lo=0.0, hi=1.0)
    w1 = node.power("sensitivity", {"value": -22.0, "unit": "dBm"})
    w2 = node.power("saturation", {"value": -4.8, "unit": "dBm"})
    if not w1 < w2:
        raise ConfigError(node._p("saturation"), "must exceed eh.sensitivity")
    lg = node.child("logistic")
    p1 = lg.number("p1", PAPER_LOGISTIC.p1, lo=0.0, lo_open=True)
    p2 = lg.power("p2", {"value": PAPER_LOGISTIC.p2 * PAPER_LOGISTIC.unit, "unit": "mW"})
    p3 = lg.power("p3", {"value": PAPER_LOGISTIC.p3 * PAPER_LOGISTIC.unit, "unit": "mW"})
    lg.finish()
    node.finish()
    unit = PAPER_LOGISTIC.unit
    try:
        logistic = Logistic(p1, p2 / unit, p3 / unit, unit)
    except WetsimError as exc:
        raise ConfigError(lg.path, str(exc)) from None
    return kind, eta, Piecewise(eta if kind != "ideal" else PAPER_PIECEWISE.eta, w1, w2), logistic


def _strategies(node: _Node, key: str) -> tuple[Strategy, ...]:
    raw = node.raw(key, [s.value for s in Strategy])
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ConfigError(node._p(key), "expected a non-empty list of strategies")
    out = []
    for i, s in enumerate(raw):
        try:
            out.append(Strategy.parse(s))
        except WetsimError as exc:
            raise ConfigError(f"{node._p(key)}[{i}]", str(exc)) from None
    return tuple(out)


def _multiuser(node: _Node, seed: int, workers: int, eh_model) -> MultiUserSection:
    d = ScenarioConfig()
    users = node.int_list("users", [1, 2, 4, 8])
    fairness_antennas = node.int_list("fairness_antennas", [4, 8, 16, 32, 64])
    fairness_users = node.integer("fairness_users", 1)
    budget = node.raw("beam_budget")
    if budget is not None and (isinstance(budget, bool) or not isinstance(budget, int) or budget < 1):
        raise ConfigError(node._p("beam_budget"), "expected a positive integer or null")
    csi = node.raw("csi_placements", d.csi_placements)
    if csi is not None and (isinstance(csi, bool) or not isinstance(csi, int) or csi < 1):
        raise ConfigError(node._p("csi_placements"), "expected a positive integer or null")
    scen = ScenarioConfig(
        radius=node.number("radius", d.radius, lo=0.0, lo_open=True),
        pathloss_exponent=node.number("pathloss_exponent", d.pathloss_exponent),
        link_budget_divisor=node.number("link_budget_divisor", d.link_budget_divisor, lo=0.0, lo_open=True),
        kappa_amplitude=node.number("kappa_amplitude", d.kappa_amplitude, lo=0.0),
        kappa_decay=node.number("kappa_decay", d.kappa_decay, lo=0.0, lo_open=True),
        tau_decay=node.number("tau_decay", d.tau_decay, lo=0.0, lo_open=True),
        m_antennas=node.integer("antennas", 8),
        eh_model=eh_model,
        n_placements=node.integer("placements", d.n_placements),
        n_draws=node.integer("draws", d.n_draws),
        seed=seed,
        workers=workers,
        outage_threshold=node.power("outage_threshold", {"value": -22.0, "unit": "dBm"}),
        beam_budget=budget,
        csi_placements=csi,
        chunk_placements=node.integer("chunk_placements", d.chunk_placements),
    )
    strategies = _strategies(node, "strategies")
    node.finish()
    scen = replace(scen, strategy=strategies[0])
    return MultiUserSection(users, fairness_antennas, fairness_users, scen), strategies


def parse_config(doc: dict | None) -> RunConfig:
    """Validate a parsed YAML document."""
    root = _Node(doc or {}, "")
    seed = root.integer("seed", 1, lo=0)
    workers = root.integer("workers", os.cpu_count() or 1)

    ch = root.child("channel")
    kappa = ch.number("kappa", 1.0, lo=0.0)
    m = ch.integer("antennas", 8)
    corr = _correlation(ch.child("correlation"), m)
    rho = ch.power("rho", {"value": 1.0, "unit": "mW"})
    if not rho > 0:
        raise ConfigError("channel.rho", "must be > 0")
    ch.finish()

    eh_kind, eta, piecewise, logistic = _eh(root.child("eh"))
    eh_model = {"ideal": IdealLinear(eta), "piecewise": piecewise, "logistic": logistic}[eh_kind]
    strategies = _strategies(root, "strategies")

    mc = root.child("mc")
    samples = mc.integer("samples", 100_000)
    bins = mc.integer("bins", 200)
    mc.finish()

    grid = root.child("grid")
    points = grid.integer("points", 400, lo=2)
    grid.finish()

    out = root.child("outage")
    thresholds = out.sweep("thresholds", {"start": 0.001, "stop": 10.0, "num": 81, "spacing": "log", "unit": "mW"})
    out.finish()

    avg = root.child("avg_harvest")
    rho_sweep = avg.sweep("rho", {"start": -30.0, "stop": 20.0, "num": 11, "unit": "dBm"})
    avg_samples = avg.integer("samples", 100_000)
    avg.finish()

    mu_section, mu_strategies = _multiuser(root.child("multiuser"), seed, workers, eh_model)

    val = root.child("validate")
    validate_samples = val.integer("samples", 100_000, lo=1000)
    val.finish()
    root.finish()

    return RunConfig(
        seed=seed, workers=workers, kappa=kappa, m=m, corr=corr, rho=rho, eta=eta,
        piecewise=piecewise, logistic=logistic, eh_kind=eh_kind, strategies=strategies,
        samples=samples, bins=bins, grid_points=points, thresholds=thresholds,
        rho_sweep=rho_sweep, avg_samples=avg_samples, multiuser=mu_section,
        multiuser_strategies=mu_strategies, validate_samples=validate_samples, source=doc or {},
    )


def apply_overrides(doc: dict, assignments) -> dict:
    """Apply ``a.b.c=value`` overrides (value parsed as YAML) to a document copy."""
    doc = copy.deepcopy(doc or {})
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like key.path=value")
        key, text = item.split("=", 1)
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(key, f"cannot parse value: {exc}") from None
        node = doc
        parts = key.strip().split(".")
        for p in parts[:-1]:
            nxt = node.setdefault(p, {})
            if not isinstance(nxt, dict):
                raise ConfigError(key, f"{p} is not a mapping")
            node = nxt
        node[parts[-1]] = value
    return doc


def load_config(path: str | None, overrides=()) -> RunConfig:
    doc = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError("", f"invalid YAML in {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("", "top level of the config must be a mapping")
    return parse_config(apply_overrides(doc, overrides))
