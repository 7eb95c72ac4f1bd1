"""Monte Carlo engine: single-device sampling, multi-user disk scenario, KS.

Random streams are derived from (seed, index) pairs, so a run is fully
determined by its seed, configuration and worker count.  Per-worker partial
sums are merged in worker order with ``math.fsum``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import interpolate

from .channel import CorrelationMatrix, rician_params, sample_ar1_channels, sample_channels, stream
from .eh import PAPER_PIECEWISE, EhModel, efficiency
from .errors import ValidationError
from .strategies import Strategy, harvest_multi_user, harvest_single_user

__all__ = [
    "EmpiricalStats",
    "MultiUserResult",
    "ScenarioConfig",
    "SiteDraw",
    "derive_seed",
    "interpolated_cdf",
    "ks_distance",
    "multiuser_run",
    "run_mc",
    "sample_user_site",
    "split_counts",
]

PILOT_SAMPLES = 10_000
DEFAULT_BINS = 200
CHUNK = 1 << 16
# spawn-key slot reserved for beamforming restarts in the multi-user run
_BEAM_SLOT = 1 << 30


def derive_seed(seed: int, *keys: int) -> int:
    """64-bit seed for a named sub-experiment of a run."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, np.uint64)[0])


def split_counts(n: int, workers: int) -> list[int]:
    """Contiguous shares of ``n`` items, the first ``n % workers`` one larger."""
    base, extra = divmod(n, workers)
    return [base + (k < extra) for k in range(workers)]


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# single-device runs


@dataclass
class EmpiricalStats:
    n: int
    mean: float
    variance: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    outage_at: dict[float, float] = field(default_factory=dict)
    workers: int = 1
    samples: np.ndarray | None = None  # sorted, only when requested

    @property
    def se(self) -> float:
        return math.sqrt(self.variance / self.n)

    def density(self) -> tuple[np.ndarray, np.ndarray]:
        """Bin centers and histogram density."""
        widths = np.diff(self.hist_edges)
        centers = 0.5 * (self.hist_edges[1:] + self.hist_edges[:-1])
        return centers, self.hist_counts / (self.n * widths)


@dataclass(frozen=True)
class _McTask:
    corr: CorrelationMatrix
    kappa: float
    strategy: Strategy
    model: EhModel
    rho: float
    n: int
    seed: int
    index: int
    edges: np.ndarray
    shift: float
    levels: tuple[float, ...]
    keep: bool
    antenna: int


def _draw(corr, kappa, strategy, model, rho, rng, n, antenna):
    h = sample_channels(corr, rician_params(kappa), rng, n)
    return np.asarray(harvest_single_user(strategy, h, rho, model, antenna), dtype=float)


def _mc_share(t: _McTask) -> dict:
    rng = stream(t.seed, t.index)
    s1, s2 = [], []
    counts = np.zeros(t.edges.size - 1, dtype=np.int64)
    below = np.zeros(len(t.levels), dtype=np.int64)
    kept = []
    done = 0
    while done < t.n:
        k = min(CHUNK, t.n - done)
        x = _draw(t.corr, t.kappa, t.strategy, t.model, t.rho, rng, k, t.antenna)
        d = x - t.shift
        s1.append(math.fsum(d))
        s2.append(math.fsum(d * d))
        idx = np.clip(np.searchsorted(t.edges, x, side="right") - 1, 0, counts.size - 1)
        counts += np.bincount(idx, minlength=counts.size)
        for i, lev in enumerate(t.levels):
            below[i] += int(np.count_nonzero(x < lev))
        if t.keep:
            kept.append(x)
        done += k
    return {
        "s1": math.fsum(s1),
        "s2": math.fsum(s2),
        "counts": counts,
        "below": below,
        "samples": np.concatenate(kept) if kept else None,
    }


def run_mc(
    corr: CorrelationMatrix,
    kappa: float,
    strategy,
    model: EhModel,
    rho: float,
    n_samples: int,
    seed: int,
    thresholds: Sequence[float] = (),
    workers: int = 1,
    bins: int = DEFAULT_BINS,
    keep_samples: bool = False,
    antenna: int = 1,
) -> EmpiricalStats:
    """Streaming single-device Monte Carlo of the harvested power.

    A pilot pass of 1e4 draws (stream 0) fixes the histogram range
    [0, mean + 8 std] and the shift used for the variance sums; worker k
    then draws its share from stream k + 1.  Draws above the histogram range
    are counted in the last bin.  ``thresholds`` are RF-scale levels: outage
    is ``harvested < eta * threshold``.
    """
    strategy = Strategy.parse(strategy)
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValidationError(f"n_samples must be a positive integer, got {n_samples}")
    if workers < 1:
        raise ValidationError("workers must be >= 1")
    if not rho > 0:
        raise ValidationError("rho must be > 0")
    n_samples = int(n_samples)

    pilot = _draw(corr, kappa, strategy, model, rho, stream(seed, 0), min(PILOT_SAMPLES, n_samples), antenna)
    p_mean, p_std = float(pilot.mean()), float(pilot.std())
    top = p_mean + 8.0 * p_std
    if not top > 0:
        top = 1.0
    edges = np.linspace(0.0, top if p_std > 0 else 2.0 * top, bins + 1)

    eta = efficiency(model)
    levels = tuple(eta * float(t) for t in thresholds)
    tasks = [
        _McTask(corr, kappa, strategy, model, rho, n_k, seed, k + 1, edges, p_mean, levels, keep_samples, antenna)
        for k, n_k in enumerate(split_counts(n_samples, workers))
    ]
    parts = [p for p in _map(_mc_share, tasks, workers)]

    s1 = math.fsum(p["s1"] for p in parts)
    s2 = math.fsum(p["s2"] for p in parts)
    n = n_samples
    mean = p_mean + s1 / n
    var = max((s2 - s1 * s1 / n) / (n - 1), 0.0) if n > 1 else 0.0
    counts = sum(p["counts"] for p in parts)
    below = sum(p["below"] for p in parts)
    outage = {float(t): float(below[i]) / n for i, t in enumerate(thresholds)}
    samples = None
    if keep_samples:
        samples = np.sort(np.concatenate([p["samples"] for p in parts if p["samples"] is not None]))
    return EmpiricalStats(n, mean, var, edges, counts, outage, workers, samples)


# ---------------------------------------------------------------------------
# multi-user disk scenario


@dataclass(frozen=True)
class ScenarioConfig:
    """Devices uniform on a disk around the power beacon.

    rho_j = 1000 * d^-pathloss_exponent / link_budget_divisor mW,
    kappa_j = kappa_amplitude * exp(-d / kappa_decay),
    tau_j = exp(-d / tau_decay) (exponential correlation per device).
    ``outage_threshold`` is an RF-scale level in mW; a device is in outage
    when its harvest falls below eta times it.
    """

    radius: float = 10.0
    pathloss_exponent: float = 3.0
    link_budget_divisor: float = 50.0
    kappa_amplitude: float = 10.0
    kappa_decay: float = 2.0
    tau_decay: float = 3.0
    n_users: int = 1
    m_antennas: int = 8
    strategy: Strategy = Strategy.SA
    eh_model: EhModel = PAPER_PIECEWISE
    n_placements: int = 10_000
    n_draws: int = 100
    seed: int = 0
    workers: int = 1
    outage_threshold: float = PAPER_PIECEWISE.w1
    beam_budget: int | None = None
    csi_placements: int | None = 100  # AA-CSI search is costly; None uses every placement
    chunk_placements: int = 50

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if not self.radius > 0:
            raise ValidationError("radius must be > 0")
        for name in ("kappa_decay", "tau_decay", "link_budget_divisor"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")
        if not self.kappa_amplitude >= 0:
            raise ValidationError("kappa_amplitude must be >= 0")
        for name in ("n_users", "m_antennas", "n_placements", "n_draws", "workers", "chunk_placements"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v}")
        if self.csi_placements is not None and self.csi_placements < 1:
            raise ValidationError("csi_placements must be >= 1")
        if not self.outage_threshold >= 0:
            raise ValidationError("outage_threshold must be >= 0")

    @property
    def n_samples(self) -> int:
        return self.n_placements * self.n_draws

    def placements_for(self, strategy: Strategy) -> int:
        if strategy is Strategy.AA_CSI and self.csi_placements is not None:
            return min(self.n_placements, self.csi_placements)
        return self.n_placements


@dataclass(frozen=True)
class SiteDraw:
    distance: float
    rho: float
    kappa: float
    tau: float


def site_from_distance(cfg: ScenarioConfig, distance):
    d = np.asarray(distance, dtype=float)
    rho = 1000.0 * d ** (-cfg.pathloss_exponent) / cfg.link_budget_divisor
    kappa = cfg.kappa_amplitude * np.exp(-d / cfg.kappa_decay)
    tau = np.exp(-d / cfg.tau_decay)
    return rho, kappa, tau


def sample_user_site(cfg: ScenarioConfig, rng: np.random.Generator) -> SiteDraw:
    """Distance R*sqrt(u) (density 2x/R^2) and the derived per-device laws."""
    d = cfg.radius * math.sqrt(rng.random())
    rho, kappa, tau = site_from_distance(cfg, d)
    return SiteDraw(d, float(rho), float(kappa), float(tau))


@dataclass(frozen=True)
class MultiUserResult:
    strategy: Strategy
    n_users: int
    m_antennas: int
    n_placements: int
    n_draws: int
    mean_energy: float  # per device, mW
    se_energy: float  # over placements
    outage: float
    se_outage: float
    fairness_std: float  # pooled over draws, devices and placements, mW
    fairness_std_db: float  # same pooling, std of 10*log10(harvest) over non-zero harvests

    @property
    def fairness_std_dbm(self) -> float:
        """The linear spread expressed in dBm."""
        return 10.0 * math.log10(self.fairness_std) if self.fairness_std > 0 else -math.inf


def _user_stream(seed: int, placement: int, user: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(placement), int(user)))
    return np.random.Generator(np.random.PCG64(ss))


def _placement_draws(cfg: ScenarioConfig, placement: int) -> tuple[np.ndarray, np.ndarray]:
    """Channels (n_draws, M, S) and rho (S,) of one placement.

    Device j uses its own stream keyed by (placement, j), so the first
    devices coincide across runs that differ only in ``n_users`` or M.
    """
    m, s = cfg.m_antennas, cfg.n_users
    H = np.empty((cfg.n_draws, m, s), dtype=complex)
    rho = np.empty(s)
    for j in range(s):
        rng = _user_stream(cfg.seed, placement, j)
        site = sample_user_site(cfg, rng)
        rho[j] = site.rho
        H[:, :, j] = sample_ar1_channels(m, site.tau, rician_params(site.kappa), rng, cfg.n_draws)
    return H, rho


@dataclass(frozen=True)
class _MuTask:
    cfg: ScenarioConfig
    strategies: tuple[Strategy, ...]
    chunks: tuple[int, ...]


def _mu_share(t: _MuTask) -> dict:
    cfg = t.cfg
    eta = efficiency(cfg.eh_model)
    level = eta * cfg.outage_threshold
    out = {s: {"mean": [], "out": [], "sq": [], "pos": [], "l1": [], "l2": []} for s in t.strategies}
    for c in t.chunks:
        first = c * cfg.chunk_placements
        last = min(first + cfg.chunk_placements, cfg.n_placements)
        draws = [_placement_draws(cfg, p) for p in range(first, last)]
        H = np.concatenate([d[0] for d in draws])
        rho = np.concatenate([np.broadcast_to(d[1], (cfg.n_draws, cfg.n_users)) for d in draws])
        for s in t.strategies:
            n_pl = min(last, cfg.placements_for(s)) - first
            if n_pl <= 0:
                continue
            rows = n_pl * cfg.n_draws
            rng = _user_stream(cfg.seed, c, _BEAM_SLOT)
            x = harvest_multi_user(
                s, H[:rows], rho[:rows], cfg.eh_model, rng=rng, budget=cfg.beam_budget
            ).reshape(n_pl, cfg.n_draws * cfg.n_users)
            out[s]["mean"].extend(x.mean(axis=1))
            out[s]["out"].extend((x < level).mean(axis=1))
            out[s]["sq"].extend((x * x).mean(axis=1))
            pos = x > 0
            with np.errstate(divide="ignore"):
                lg = np.where(pos, 10.0 * np.log10(np.where(pos, x, 1.0)), 0.0)
            out[s]["pos"].extend(pos.sum(axis=1))
            out[s]["l1"].extend(lg.sum(axis=1))
            out[s]["l2"].extend((lg * lg).sum(axis=1))
    return out


def multiuser_run(cfg: ScenarioConfig, strategies: Sequence | None = None) -> dict[Strategy, MultiUserResult]:
    """Per-device average harvest, outage frequency and fairness spread.

    All strategies are evaluated on the same placements and channel draws.
    Standard errors treat placements as independent clusters.
    """
    strategies = tuple(Strategy.parse(s) for s in (strategies or [cfg.strategy]))
    n_chunks = -(-cfg.n_placements // cfg.chunk_placements)
    shares = split_counts(n_chunks, min(cfg.workers, n_chunks))
    tasks, start = [], 0
    for k in shares:
        tasks.append(_MuTask(cfg, strategies, tuple(range(start, start + k))))
        start += k
    parts = _map(_mu_share, tasks, cfg.workers)

    results = {}
    for s in strategies:
        mean_p = np.array([v for p in parts for v in p[s]["mean"]])
        out_p = np.array([v for p in parts for v in p[s]["out"]])
        sq_p = np.array([v for p in parts for v in p[s]["sq"]])
        n_pl = mean_p.size
        mean = math.fsum(mean_p) / n_pl
        outage = math.fsum(out_p) / n_pl
        second = math.fsum(sq_p) / n_pl
        cells = n_pl * cfg.n_draws * cfg.n_users
        pooled = max(second - mean * mean, 0.0) * cells / max(cells - 1, 1)
        n_pos = int(sum(int(v) for p in parts for v in p[s]["pos"]))
        if n_pos > 1:
            l1 = math.fsum(v for p in parts for v in p[s]["l1"]) / n_pos
            l2 = math.fsum(v for p in parts for v in p[s]["l2"]) / n_pos
            spread_db = math.sqrt(max(l2 - l1 * l1, 0.0) * n_pos / (n_pos - 1))
        else:
            spread_db = math.nan
        se_e = float(np.std(mean_p, ddof=1) / math.sqrt(n_pl)) if n_pl > 1 else math.nan
        se_o = float(np.std(out_p, ddof=1) / math.sqrt(n_pl)) if n_pl > 1 else math.nan
        results[s] = MultiUserResult(
            s, cfg.n_users, cfg.m_antennas, n_pl, cfg.n_draws, mean, se_e, outage, se_o, math.sqrt(pooled), spread_db
        )
    return results


# ---------------------------------------------------------------------------
# goodness of fit


def ks_distance(samples, cdf: Callable, cdf_left: Callable | None = None) -> float:
    """sup |F_n - F| between the empirical CDF of ``samples`` and ``cdf``.

    ``cdf_left(x) = P(X < x)`` is needed when the law has atoms; it defaults
    to ``cdf`` (continuous laws).
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 1000:
        raise ValidationError(f"ks_distance needs at least 1000 samples, got {n}")
    F = np.asarray(cdf(x), dtype=float)
    Fl = F if cdf_left is None else np.asarray(cdf_left(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - F)
    d_minus = np.max(Fl - (i - 1) / n)
    return float(max(d_plus, d_minus, 0.0))


def interpolated_cdf(cdf: Callable, lo: float, hi: float, n: int = 2001) -> Callable:
    """Tabulate an expensive CDF on [lo, hi] and interpolate monotonically.

    Outside the table the CDF is clamped to its end values.
    """
    if not hi > lo:
        raise ValidationError("interpolation range must satisfy hi > lo")
    grid = np.linspace(lo, hi, n)
    vals = np.maximum.accumulate(np.clip(np.asarray(cdf(grid), dtype=float), 0.0, 1.0))
    f = interpolate.PchipInterpolator(grid, vals, extrapolate=False)

    def tabulated(x):
        x = np.asarray(x, dtype=float)
        out = f(np.clip(x, lo, hi))
        return np.clip(out, 0.0, 1.0)

    return tabulated


def with_users(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    return replace(cfg, **changes)
