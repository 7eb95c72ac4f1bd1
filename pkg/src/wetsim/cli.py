"""Command-line front end.

    wetsim <command> [config.yaml] [--out PATH] [--set key.path=value ...]

Every command writes CSV: a ``# key=value`` metadata line, a header line,
then rows with floats printed to 17 significant digits.  Diagnostics go to
stderr.  Exit codes: 0 success, 2 configuration error, 3 numerical
convergence failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import replace
from typing import Callable, Sequence

import numpy as np

from . import __version__, analytic, validation
from .channel import rician_params, sample_channels, stream
from .config import RunConfig, load_config
from .eh import IdealLinear, linear_to_dbm
from .errors import CapabilityError, ConvergenceError, WetsimError
from .montecarlo import derive_seed, multiuser_run, run_mc
from .strategies import Strategy, harvest_single_user

__all__ = ["COMMANDS", "main", "render_csv"]

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_VALIDATION = 0, 2, 3, 4


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, Strategy):
        return v.value
    return str(v)


def render_csv(meta: dict, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    out = io.StringIO()
    out.write("# " + " ".join(f"{k}={_fmt(v)}" for k, v in meta.items()) + "\n")
    out.write(",".join(header) + "\n")
    for r in rows:
        out.write(",".join(_fmt(v) for v in r) + "\n")
    return out.getvalue()


def _meta(cfg: RunConfig, command: str, **extra) -> dict:
    return {"wetsim": __version__, "command": command, "seed": cfg.seed, "workers": cfg.workers, **extra}


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _strategy_seed(cfg: RunConfig, command: int, s: Strategy) -> int:
    return derive_seed(cfg.seed, command, list(Strategy).index(s))


def _scale(cfg: RunConfig) -> float:
    return cfg.eta * cfg.rho


def _dist(cfg: RunConfig, s: Strategy):
    return analytic.distribution(s, cfg.kappa, cfg.delta, cfg.m, _scale(cfg))


# ---------------------------------------------------------------------------
# commands


def cmd_stats(cfg: RunConfig):
    model = IdealLinear(cfg.eta)
    rows = []
    for s in cfg.strategies:
        try:
            a_mean, a_var = analytic.analytic_moments(s, cfg.kappa, cfg.delta, cfg.m, _scale(cfg))
        except CapabilityError as exc:
            _note(f"{s.value}: {exc}")
            a_mean = a_var = math.nan
        st = run_mc(cfg.corr, cfg.kappa, s, model, cfg.rho, cfg.samples, _strategy_seed(cfg, 1, s),
                    workers=cfg.workers, bins=cfg.bins)
        rows.append([s, cfg.kappa, cfg.delta, cfg.m, a_mean, a_var, st.mean, st.variance, st.se])
    header = ["strategy", "kappa", "delta", "M", "analytic_mean", "analytic_var", "mc_mean", "mc_var", "mc_se"]
    return _meta(cfg, "stats", samples=cfg.samples), header, rows


def _grid_top(cfg: RunConfig, s: Strategy, st) -> float:
    try:
        mean, var = analytic.analytic_moments(s, cfg.kappa, cfg.delta, cfg.m, _scale(cfg))
    except CapabilityError:
        mean, var = st.mean, st.variance
    top = mean + 6.0 * math.sqrt(max(var, 0.0))
    return top if top > 0 else 1.0


def _density_cmd(cfg: RunConfig, kind: str):
    model = IdealLinear(cfg.eta)
    rows = []
    for s in cfg.strategies:
        st = run_mc(cfg.corr, cfg.kappa, s, model, cfg.rho, cfg.samples, _strategy_seed(cfg, 2, s),
                    workers=cfg.workers, bins=cfg.bins, keep_samples=(kind == "cdf"))
        x = np.linspace(0.0, _grid_top(cfg, s, st), cfg.grid_points)
        try:
            d = _dist(cfg, s)
            ana = np.asarray(d.pdf(x) if kind == "pdf" else d.cdf(x), dtype=float)
        except CapabilityError as exc:
            _note(f"{s.value}: {exc}")
            ana = np.full(x.shape, math.nan)
        if kind == "pdf":
            centers, dens = st.density()
            idx = np.searchsorted(st.hist_edges, x, side="right") - 1
            inside = (idx >= 0) & (idx < dens.size)
            emp = np.where(inside, dens[np.clip(idx, 0, dens.size - 1)], 0.0)
        else:
            emp = np.searchsorted(st.samples, x, side="right") / st.n
        rows.extend([s, float(xi), float(a), float(e)] for xi, a, e in zip(x, ana, emp))
    header = ["strategy", "x", f"analytic_{kind}", f"empirical_{kind}"]
    return _meta(cfg, kind, samples=cfg.samples, points=cfg.grid_points), header, rows


def cmd_pdf(cfg: RunConfig):
    return _density_cmd(cfg, "pdf")


def cmd_cdf(cfg: RunConfig):
    return _density_cmd(cfg, "cdf")


def _outage_analytic(cfg: RunConfig, s: Strategy, xi: np.ndarray) -> np.ndarray:
    d = _dist(cfg, s)
    level = cfg.eta * xi
    if cfg.eh_kind == "ideal":
        return np.asarray(d.cdf(level), dtype=float)
    if cfg.eh_kind == "piecewise":
        pw = cfg.piecewise
        return np.asarray(analytic.saturated_cdf(d.cdf, pw.eta, pw.w1, pw.w2, level), dtype=float)
    raise CapabilityError("no analytic outage under the logistic harvester")


def cmd_outage(cfg: RunConfig):
    xi = np.asarray(cfg.thresholds, dtype=float)
    model = cfg.eh_model
    rows = []
    for s in cfg.strategies:
        try:
            ana = _outage_analytic(cfg, s, xi)
        except CapabilityError as exc:
            _note(f"{s.value}: {exc}")
            ana = np.full(xi.shape, math.nan)
        st = run_mc(cfg.corr, cfg.kappa, s, model, cfg.rho, cfg.samples, _strategy_seed(cfg, 3, s),
                    thresholds=tuple(xi), workers=cfg.workers, bins=cfg.bins)
        for t, a in zip(xi, ana):
            rows.append([float(t), s, float(a), st.outage_at[float(t)]])
    header = ["xi_th", "strategy", "analytic_outage", "empirical_outage"]
    return _meta(cfg, "outage", samples=cfg.samples, eh=cfg.eh_kind), header, rows


def cmd_avg_harvest(cfg: RunConfig):
    """Average harvest versus rho under the ideal, piecewise and logistic harvesters.

    One set of channel draws is shared by every rho and strategy.
    """
    models = {"ideal": IdealLinear(cfg.eta), "piecewise": cfg.piecewise, "logistic": cfg.logistic}
    rhos = np.asarray(cfg.rho_sweep, dtype=float)
    sums = {(i, s, k): [] for i in range(rhos.size) for s in cfg.strategies for k in models}
    rng = stream(derive_seed(cfg.seed, 4), 0)
    p = rician_params(cfg.kappa)
    done = 0
    while done < cfg.avg_samples:
        k_n = min(1 << 15, cfg.avg_samples - done)
        h = sample_channels(cfg.corr, p, rng, k_n)
        for i, r in enumerate(rhos):
            for s in cfg.strategies:
                for k, mdl in models.items():
                    sums[(i, s, k)].append(float(np.sum(harvest_single_user(s, h, r, mdl))))
        done += k_n
    rows = []
    for i, r in enumerate(rhos):
        for s in cfg.strategies:
            mc = {k: math.fsum(sums[(i, s, k)]) / cfg.avg_samples for k in models}
            try:
                ideal = analytic.analytic_moments(s, cfg.kappa, cfg.delta, cfg.m, cfg.eta * r)[0]
            except CapabilityError:
                ideal = math.nan
            try:
                pw = analytic.avg_harvest(s, cfg.kappa, cfg.delta, cfg.m, r, cfg.piecewise)
            except CapabilityError:
                pw = math.nan
            rows.append([float(linear_to_dbm(r)), float(r), s, ideal, mc["ideal"], pw, mc["piecewise"], mc["logistic"]])
    header = ["rho_dBm", "rho_mW", "strategy", "ideal_analytic", "ideal_mc", "piecewise_analytic",
              "piecewise_mc", "logistic_mc"]
    return _meta(cfg, "avg-harvest", samples=cfg.avg_samples), header, rows


def cmd_multiuser(cfg: RunConfig):
    mu = cfg.multiuser
    base = mu.scenario
    rows = []
    for n_users in mu.users:
        scen = replace(base, n_users=n_users)
        for s, r in multiuser_run(scen, cfg.multiuser_strategies).items():
            rows.append(["users", n_users, base.m_antennas, s, r.n_placements, r.mean_energy, r.se_energy,
                         r.outage, r.se_outage, r.fairness_std, r.fairness_std_db])
    csi_free = [s for s in cfg.multiuser_strategies if not s.uses_csi]
    for m in mu.fairness_antennas:
        if not csi_free:
            break
        scen = replace(base, n_users=mu.fairness_users, m_antennas=m)
        for s, r in multiuser_run(scen, csi_free).items():
            rows.append(["fairness", mu.fairness_users, m, s, r.n_placements, r.mean_energy, r.se_energy,
                         r.outage, r.se_outage, r.fairness_std, r.fairness_std_db])
    header = ["sweep", "n_users", "M", "strategy", "placements", "avg_energy_per_user_mW", "se_energy_mW",
              "avg_outage_per_user", "se_outage", "fairness_std_mW", "fairness_std_dB"]
    meta = _meta(cfg, "multiuser", placements=base.n_placements, draws=base.n_draws,
                 csi_placements=base.csi_placements if base.csi_placements is not None else "all",
                 outage_threshold_mW=base.outage_threshold)
    return meta, header, rows


def cmd_validate(cfg: RunConfig, delta_fn: Callable | None = None):
    """Theorem 1 sweep, Table II round trip, KS panels and special cases."""
    n = cfg.validate_samples
    kw = {"delta_fn": delta_fn} if delta_fn is not None else {}
    results = [validation.check_theorem1(n_draws=n, seed=derive_seed(cfg.seed, 5, 0))]
    results += validation.check_table_ii(n_mc=n, seed=derive_seed(cfg.seed, 5, 1), **kw)
    results += validation.check_ks_panels(n=n, seed=derive_seed(cfg.seed, 5, 2))
    results += validation.check_special_cases(n=n, seed=derive_seed(cfg.seed, 5, 3))
    rows = [[r.name, "info" if r.informational else ("pass" if r.passed else "fail"), r.value, r.tolerance, r.detail]
            for r in results]
    meta = _meta(cfg, "validate", samples=n)
    ok = all(r.passed or r.informational for r in results)
    return meta, ["check", "status", "value", "tolerance", "detail"], rows, ok, results


COMMANDS = {
    "stats": cmd_stats,
    "pdf": cmd_pdf,
    "cdf": cmd_cdf,
    "outage": cmd_outage,
    "avg-harvest": cmd_avg_harvest,
    "multiuser": cmd_multiuser,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wetsim", description="CSI-free multi-antenna WET analysis and simulation")
    ap.add_argument("--version", action="version", version=f"wetsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?" if name == "validate" else None, help="YAML configuration file")
        p.add_argument("--out", "-o", help="write CSV here instead of stdout")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. channel.kappa=3 (repeatable)")
        p.add_argument("--seed", type=int, help="override the seed")
        p.add_argument("--workers", type=int, help="override the worker count")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    try:
        cfg = load_config(args.config, overrides)
    except WetsimError as exc:
        _note(f"config error: {exc}")
        return EXIT_CONFIG

    ok = True
    try:
        result = COMMANDS[args.command](cfg)
        if args.command == "validate":
            meta, header, rows, ok, results = result
            for r in results:
                _note(r.line())
        else:
            meta, header, rows = result
    except ConvergenceError as exc:
        _note(f"convergence error: {exc}")
        return EXIT_CONVERGENCE
    except WetsimError as exc:
        _note(f"error: {exc}")
        return EXIT_CONFIG

    text = render_csv(meta, header, rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
