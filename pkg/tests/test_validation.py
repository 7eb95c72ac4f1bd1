import math

import pytest

from wetsim.channel import uniform_delta
from wetsim.eh import PAPER_PIECEWISE, Piecewise
from wetsim.validation import (
    CheckResult,
    avg_harvest_table,
    check_lemma1,
    check_outage_ordering,
    check_special_cases,
    check_table_ii,
    check_theorem1,
    grid_rhos,
    ks_cell,
    q_operating_points,
)
from wetsim.strategies import Strategy


def test_grid_rhos_give_the_delta_grid():
    for m in (2, 4, 8, 16):
        deltas = [uniform_delta(m, r) for r in grid_rhos(m)]
        assert deltas == pytest.approx([0.0, m, m * (1 + 0.4 * (m - 1)), m * m], abs=1e-12)


def test_check_result_line():
    assert CheckResult("x", True, 0.1, 0.2).line().startswith("PASS x: value=0.1 tol=0.2")
    assert CheckResult("x", False, 0.3, 0.2, "why").line().endswith("why")
    assert CheckResult("x", True, 0.3, 0.2, informational=True).line().startswith("INFO")


def test_table_ii_small_run_passes():
    res = check_table_ii(n_mc=20_000, seed=3, kappas=(0.0, 3.0), ms=(2, 8))
    assert [r.name for r in res] == ["table_ii_closed_form", "table_ii_monte_carlo"]
    assert res[0].passed and res[0].value <= 1e-10
    assert res[1].value < 5.0


def test_table_ii_negative_control():
    def wrong_delta(m, rho):
        return m * (1 + (m - 1) * rho) * 0.9

    res = check_table_ii(n_mc=20_000, seed=3, kappas=(1.0,), ms=(4,), delta_fn=wrong_delta)
    assert not res[1].passed and res[1].value > 3


def test_theorem1_small():
    r = check_theorem1(n_draws=500, seed=1)
    assert r.passed and r.value == 0


def test_special_cases_small():
    res = {r.name: r for r in check_special_cases(n=100_000, seed=2)}
    assert res["aa_zero_delta_point_mass"].passed
    assert res["uniform_eigenvalues"].passed
    assert res["sa_full_correlation_equals_oa"].value < 0.01


def test_ks_cell_small():
    ks = ks_cell(3.0, 4, 0.2, 50_000, 4)
    assert set(ks) == set(Strategy)
    assert all(v < 0.02 for v in ks.values())


def test_outage_ordering_at_small_thresholds():
    res = check_outage_ordering(grid=[0.005, 0.01, 0.02, 0.05])
    assert res[0].passed
    assert not res[1].passed  # no crossover this low


def test_lemma1_q1_small():
    res = {r.name: r for r in check_lemma1(Piecewise(0.5, 0.1, 1.0), n=200_000, seed=1)}
    assert res["q1_vs_mc"].value < 0.01


def test_q_operating_points():
    pts = q_operating_points(PAPER_PIECEWISE)
    assert pts[0] == PAPER_PIECEWISE.w1 and pts[2] == PAPER_PIECEWISE.w2
    assert pts[1] == pytest.approx(math.sqrt(PAPER_PIECEWISE.w1 * PAPER_PIECEWISE.w2))


def test_avg_harvest_table_aa_in_linear_window():
    rows = avg_harvest_table(PAPER_PIECEWISE, [-25.0], n=100_000, seed=2)
    aa = [r for r in rows if r[1] is Strategy.AA][0]
    assert aa[2] == pytest.approx(aa[3], rel=0.05)
