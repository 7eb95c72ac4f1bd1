"""End-to-end acceptance checks at full scale.

Each test prints one ``CRITERION k PASS|FAIL`` line (plus INFO lines) to the
terminal regardless of output capture, then asserts.  Seeds are fixed.
"""

import math
import time

import numpy as np
import pytest
import yaml

from wetsim.cli import main
from wetsim.eh import PAPER_PIECEWISE
from wetsim.montecarlo import ScenarioConfig, multiuser_run
from wetsim.strategies import Strategy
from wetsim.validation import (
    check_avg_harvest,
    check_ks_panels,
    check_lemma1,
    check_outage_ordering,
    check_special_cases,
    check_table_ii,
    check_theorem1,
)

SEED = 20240611
CSI_FREE = (Strategy.OA, Strategy.AA, Strategy.SA)


@pytest.fixture
def report(capsys):
    def emit(criterion, passed, summary, results=(), elapsed=None):
        with capsys.disabled():
            print()
            for r in results:
                print(f"    {r.line()}")
            tail = f" [{elapsed:.1f} s]" if elapsed is not None else ""
            print(f"CRITERION {criterion} {'PASS' if passed else 'FAIL'}: {summary}{tail}")

    def info(line):
        with capsys.disabled():
            print(f"    INFO {line}")

    emit.info = info
    return emit


def test_criterion_1_table_ii(report):
    t0 = time.perf_counter()
    results = check_table_ii(n_mc=1_000_000, seed=SEED)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in results) and elapsed < 120
    report(1, ok, "Table II closed forms (rel 1e-10) and 1e6-sample MC (3 SE), runtime < 2 min", results, elapsed)
    assert all(r.passed for r in results), [r.line() for r in results if not r.passed]
    assert elapsed < 120


def test_criterion_2_theorem1(report):
    t0 = time.perf_counter()
    r = check_theorem1(n_draws=100_000, seed=SEED + 1)
    elapsed = time.perf_counter() - t0
    ok = r.passed and elapsed < 60
    report(2, ok, "zero ordering violations over 1e5 draws per grid cell, runtime < 1 min", [r], elapsed)
    assert r.passed
    assert elapsed < 60


def test_criterion_3_ks_panels(report):
    t0 = time.perf_counter()
    results = check_ks_panels(n=1_000_000, seed=SEED + 2, tol=0.01)
    elapsed = time.perf_counter() - t0
    failed = [r for r in results if not r.passed]
    report(3, not failed, f"KS <= 0.01 at 1e6 samples on every asserted cell ({len(failed)} failing)", results, elapsed)
    assert not failed, [r.line() for r in failed]


def test_criterion_4_special_cases(report):
    t0 = time.perf_counter()
    results = check_special_cases(n=1_000_000, seed=SEED + 3)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in results)
    report(4, ok, "SA at tau=1 vs OA, AA point mass at delta=0, uniform eigenvalues", results, elapsed)
    assert ok, [r.line() for r in results if not r.passed]


def test_criterion_5_average_harvest(report):
    t0 = time.perf_counter()
    results = check_lemma1(PAPER_PIECEWISE, n=1_000_000, seed=SEED + 4)
    results += check_avg_harvest(PAPER_PIECEWISE, rho_dbw=tuple(range(-60, -9, 5)), n=1_000_000, seed=SEED + 5)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in results) and elapsed < 300
    report(5, ok, "q1 0.5%, q2 2%, OA/AA 5%, SA/AA-CSI 10% vs MC over rho in [-60, -10] dBW, runtime < 5 min",
           results, elapsed)
    assert all(r.passed for r in results), [r.line() for r in results if not r.passed]
    assert elapsed < 300


def test_criterion_6_outage_ordering(report):
    results = check_outage_ordering(kappa=1.0, m=8, grid=np.logspace(-3, 1, 81), cap=0.3)
    ok = all(r.passed for r in results)
    report(6, ok, "AA-CSI <= OA-CSI <= SA <= AA <= OA where all outages <= 0.3; SA/AA crossover exists", results)
    assert ok, [r.line() for r in results if not r.passed]


def test_criterion_7_multiuser(report):
    base = ScenarioConfig(seed=SEED + 6, workers=1, m_antennas=8)
    t0 = time.perf_counter()
    by_users = {s: multiuser_run(base.__class__(**{**base.__dict__, "n_users": s}), list(Strategy))
                for s in (1, 2, 4, 8)}
    fair = multiuser_run(base.__class__(**{**base.__dict__, "n_users": 1, "m_antennas": 32}), list(CSI_FREE))
    elapsed = time.perf_counter() - t0

    problems = []
    for st in CSI_FREE:
        ref = by_users[1][st]
        for n in (2, 4, 8):
            r = by_users[n][st]
            z = abs(r.mean_energy - ref.mean_energy) / math.hypot(r.se_energy, ref.se_energy)
            report.info(f"{st.value} |S|={n}: mean {r.mean_energy * 1e3:.4g} uW vs |S|=1 {ref.mean_energy * 1e3:.4g} uW, z={z:.2f}")
            if z > 3:
                problems.append(f"{st.value} not flat at |S|={n} (z={z:.2f})")
    for st in (Strategy.OA_CSI, Strategy.AA_CSI):
        means = [by_users[n][st].mean_energy for n in (1, 2, 4, 8)]
        report.info(f"{st.value} mean per user over |S|=1,2,4,8: " + ", ".join(f"{m * 1e3:.4g} uW" for m in means)
                    + f" ({by_users[1][st].n_placements} placements)")
        if any(b > a for a, b in zip(means, means[1:])):
            problems.append(f"{st.value} increases with |S|")
    for n in (1, 2, 4, 8):
        outs = {st: by_users[n][st].outage for st in CSI_FREE}
        report.info(f"outage |S|={n}: " + ", ".join(f"{k.value} {v:.4g}" for k, v in outs.items()))
        if min(outs, key=outs.get) is not Strategy.SA:
            problems.append(f"SA not lowest outage at |S|={n}")
    lin = {st: fair[st].fairness_std for st in CSI_FREE}
    db = {st: fair[st].fairness_std_db for st in CSI_FREE}
    report.info("fairness std at M=32 (mW): " + ", ".join(f"{k.value} {v:.5g}" for k, v in lin.items()))
    report.info("fairness std at M=32 of 10log10(harvest) (dB): " + ", ".join(f"{k.value} {v:.4g}" for k, v in db.items()))
    if min(lin, key=lin.get) is not Strategy.AA:
        problems.append(f"AA not lowest fairness std at M=32 ({min(lin, key=lin.get).value} is)")
    if elapsed >= 600:
        problems.append(f"runtime {elapsed:.0f} s >= 600 s")

    report(7, not problems, "multi-user properties at 1e4 placements x 1e2 draws"
           + (f"; {'; '.join(problems)}" if problems else ""), elapsed=elapsed)
    assert not problems, problems


DETERMINISM_CONFIG = {
    "seed": 77,
    "workers": 2,
    "channel": {"kappa": 3.0, "antennas": 8, "correlation": {"model": "exponential", "tau": 0.4}},
    "eh": {"model": "piecewise"},
    "mc": {"samples": 50_000},
    "grid": {"points": 100},
    "avg_harvest": {"samples": 20_000},
    "multiuser": {"users": [1, 2], "fairness_antennas": [8], "placements": 200, "draws": 10, "csi_placements": 10},
    "validate": {"samples": 5000},
}


def test_criterion_8_determinism(report, tmp_path, capsys):
    cfg = tmp_path / "det.yaml"
    cfg.write_text(yaml.safe_dump(DETERMINISM_CONFIG))
    differing = []
    for command in ("stats", "pdf", "cdf", "outage", "avg-harvest", "multiuser", "validate"):
        outs = []
        for k in range(2):
            path = tmp_path / f"{command}-{k}.csv"
            main([command, str(cfg), "--out", str(path)])
            outs.append(path.read_bytes())
        if outs[0] != outs[1]:
            differing.append(command)
    capsys.readouterr()
    report(8, not differing, "byte-identical CSV for every command on repeat runs (workers=2)"
           + (f"; differing: {differing}" if differing else ""))
    assert not differing
