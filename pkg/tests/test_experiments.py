import math

import numpy as np
import pytest

from achlab import RunConfig, RuleError, run, run_ensemble
from achlab.branching import borel
from achlab.experiments import (FAIL, OPEN, PASS, ExperimentReport, FitError, compare_rho, concentration_check,
                                cycle_check, delayed_percolation, detect_blowup, envelope_constant,
                                exploration_check, scan_l1, tail_fit, total_variation)
from achlab.experiments.delayed import tail_ok
from achlab.experiments.limits import tail_profile
from achlab.experiments.scaling import extrapolate, first_crossing


def geometric_profile(n=2**20, k_max=18):
    """``N_{>=k} = n 2^(1-k)`` exactly, as a size histogram."""
    ngeq = {k: n * 2.0 ** (1 - k) for k in range(1, k_max + 2)}
    ngeq[k_max + 1] = 0
    return {k: int(ngeq[k] - ngeq[k + 1]) for k in range(1, k_max + 1)}, n


def test_geometric_profile_fits_log_two():
    n_k, n = geometric_profile()
    fit = tail_fit(n_k, n, "exponential", exclude_top=0, k_max=17)
    assert fit.rate == pytest.approx(math.log(2), rel=1e-9)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.verdict(expected_rate=math.log(2)) == PASS
    k = np.arange(1, 17)
    ks, ngeq = tail_profile(n_k)
    assert np.all(ngeq[:16] <= fit.envelope(k, n) * (1 + 1e-9))


def test_power_law_profile():
    n = 10**6
    ks = np.arange(1, 400)
    ngeq = np.floor(n * ks ** -0.5)
    n_k = {int(k): int(a - b) for k, a, b in zip(ks, ngeq, np.append(ngeq[1:], 0)) if a - b > 0}
    fit = tail_fit(n_k, n, "polynomial", k_max=300)
    assert fit.rate == pytest.approx(0.5, abs=0.02)
    assert envelope_constant(n_k, n, 0.5, 300) == pytest.approx(1.0, abs=0.01)


def test_fit_errors():
    with pytest.raises(FitError):
        tail_fit({1: 10, 2: 4}, 14)
    with pytest.raises(FitError):
        tail_profile({})
    with pytest.raises(ValueError):
        tail_fit({1: 5, 2: 4, 3: 3, 4: 4}, kind="cubic")


def test_subcritical_er_tail_is_exponential():
    snap = run(RunConfig(n=200_000, rule="er", t_max=0.3, seed=1)).final()
    fit = tail_fit(snap.N_k, 200_000, "exponential", k_max=20)
    assert fit.rate > 0 and fit.verdict() == PASS
    ks, ngeq = tail_profile(snap.N_k)
    assert np.all(ngeq[: fit.k_max] <= fit.envelope(ks[: fit.k_max], 200_000) * (1 + 1e-9))


def test_critical_er_tail_is_half_power():
    snaps = [s.final() for s in run_ensemble(RunConfig(n=200_000, rule="er", t_max=0.5, seed=2), 4)]
    pooled = {}
    for s in snaps:
        for k, v in s.N_k.items():
            pooled[k] = pooled.get(k, 0) + v
    fit = tail_fit(pooled, 4 * 200_000, "polynomial", k_max=int(200_000 ** (1 / 3)))
    assert fit.rate == pytest.approx(0.5, abs=0.1)


def test_total_variation_and_helpers():
    assert total_variation({1: 0.5, 2: 0.5}, {1: 0.5, 2: 0.5}) == 0
    assert total_variation({1: 1.0}, {2: 0.9}, 0.1) == pytest.approx(1.0)
    assert first_crossing([0.1, 0.2, 0.3], [1, 5, 9], 4) == 0.2
    assert first_crossing([0.1], [1], 4) is None
    a, b = extrapolate([100, 10_000], [0.6, 0.51], 0.5)
    assert a == pytest.approx(0.5) and b == pytest.approx(1.0)
    assert extrapolate([100], [0.6], 0.5) == (0.6, 0.0)


def recompute_round_trip(report):
    again = ExperimentReport.from_json(report.to_json())
    assert again.recompute() == report.verdict
    assert again.verdict_line == f"VERDICT {report.id} {report.verdict}"
    text = report.to_csv()
    assert text.startswith(f"# achlab-report/1 id={report.id} verdict={report.verdict}")
    return again


def test_blowup_for_er_and_join_all():
    grid = [round(0.01 * i, 2) for i in range(70)]
    er = detect_blowup("er", [10_000, 100_000], grid, reps=3)
    assert er.verdict == PASS and abs(er.fits["t_hat"] - 0.5) <= 0.03
    ja = detect_blowup("join_all:ell=4", [10_000, 100_000], [round(0.005 * i, 3) for i in range(40)], reps=3)
    assert ja.verdict == PASS and abs(ja.fits["t_hat"] - 1 / 12) <= 0.015
    recompute_round_trip(er)


def test_blowup_open_when_grid_too_short():
    rep = detect_blowup("er", [1000], [0.0, 0.1], reps=2)
    assert rep.verdict == OPEN


def test_scan_er_threshold_and_bounds():
    grid = [round(0.02 * i, 2) for i in range(40)]
    rep = scan_l1("er", [10_000, 100_000], grid, reps=3, lower=0.45, upper=0.6)
    assert rep.verdict == PASS and abs(rep.fits["t_c_hat"] - 0.5) <= 0.06
    assert scan_l1("er", [10_000], grid, reps=2, upper=0.3).verdict == FAIL
    assert scan_l1("er", [10_000], grid[:5], reps=2).verdict == OPEN
    recompute_round_trip(rep)


def test_delayed_rule_threshold_above_half():
    rep = scan_l1("d_r:r=3", [100_000], [round(0.5 + 0.01 * i, 2) for i in range(51)], reps=2)
    assert rep.fits["t_c_hat"] > 0.5


def test_concentration_er():
    rep = concentration_check("er", 0.3, [4000, 16_000, 64_000], reps=60, ks=(1, 2))
    assert rep.verdict == PASS
    assert all(abs(s - 0.5) <= 0.15 for s in rep.fits["exponent"].values())
    recompute_round_trip(rep)


def test_identical_seeds_have_zero_spread():
    cfg = RunConfig(n=1000, rule="product", t_max=0.3, seed=3)
    values = {run(cfg).final().N_k[1] for _ in range(3)}
    assert len(values) == 1


def test_compare_er_against_closed_form():
    rep = compare_rho("er", 0.25, [10_000, 100_000], reps=10, reference="borel")
    assert rep.verdict == PASS and rep.fits["D"][-1] < 0.01
    recompute_round_trip(rep)


def test_compare_at_time_zero_is_exact():
    rep = compare_rho("product", 0.0, [1000], reps=2, reference="bp", samples=1000)
    assert rep.fits["D"] == [0.0]


def test_compare_closed_form_needs_pair_rule():
    with pytest.raises(ValueError):
        compare_rho("product", 0.1, [1000], reps=1, reference="borel")
    with pytest.raises(ValueError):
        compare_rho("er", 0.1, [1000], reps=1, reference="magic")


def test_compare_fails_against_wrong_law():
    rep = compare_rho("er", 0.25, [10_000, 100_000], reps=5, rho=borel(0.1, 200))
    assert rep.verdict == FAIL


def test_cycle_census_small():
    rep = cycle_check("product", 0.3, [10_000, 50_000], reps=10)
    assert rep.verdict == PASS
    recompute_round_trip(rep)
    with pytest.raises(RuleError):
        cycle_check("join_all:ell=3", 0.05, [100], reps=1)


def test_tail_ok_on_seed_itself():
    snap = run(RunConfig(n=50_000, rule="er", t_max=0.5, seed=4)).final()
    ok, C = tail_ok(snap.N_k, snap.N_k, 50_000)
    assert ok and C > 0


def test_delayed_small_scale_and_validation():
    rep = delayed_percolation(n_grid=[10_000, 100_000], reps=5)
    fits = rep.fits
    assert fits["S_half_median"][1] > fits["S_half_median"][0]
    assert fits["L1_after_median"][1] < fits["L1_after_median"][0]
    assert fits["checks"]["control_giant"] and fits["checks"]["tail"]
    assert 0 < fits["proof_delta"] < 1e-3
    recompute_round_trip(rep)
    with pytest.raises(ValueError):
        delayed_percolation(r=2)
    with pytest.raises(ValueError):
        delayed_percolation(delta=0.6)


def test_exploration_small():
    rep = exploration_check([2000, 20_000], graphs=2, vertices=100_000, checked_starts=50)
    assert rep.fits["mismatches"] == 0
    assert rep.verdict in (PASS, OPEN)
    recompute_round_trip(rep)
