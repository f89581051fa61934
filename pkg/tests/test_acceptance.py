"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

The lines are repeated in the pytest terminal summary under "acceptance criteria".
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from airy_ldp import validate
from airy_ldp.estimator import EstimatorConfig, convergence_scan, estimate_plain, estimate_tilted
from airy_ldp.rate import ModelParams, scaled_rate


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_01_variational_identity(acceptance):
    rep, dt = _timed(lambda: validate.check_variational_identity(n_params=20, seed=0))
    ok = rep["passed"] and dt < 10
    acceptance(1, "objective(v_star) = scaled_rate, 20 random (beta, L, zeta)", ok,
               f"max rel error {rep['max_rel_error']:.2e} (tol 1e-6), {dt:.2f}s (limit 10s)")
    assert ok


def test_02_minimizer_recovery(acceptance):
    rep, dt = _timed(lambda: validate.check_minimizer_recovery(ModelParams(2.0, 1.0, 1.0), 1000))
    ok = rep["passed"] and dt < 30
    acceptance(2, "brute-force minimizer vs v_star on 10^3 cells", ok,
               f"sup error {rep['sup_error']:.2e} (tol 1e-3), {dt:.2f}s (limit 30s)")
    assert ok


def test_03_phi_power_laws(acceptance):
    rep, dt = _timed(validate.check_phi_laws)
    ok = rep["passed"] and dt < 1
    acceptance(3, "Phi'''(0) = -1/2 and Phi(z)|z|^-5/2 -> 4/(15 pi)", ok,
               f"Phi'''(0) = {rep['third_derivative']:.7f} (tol 1e-4), ratio at z=-1e4 {rep['large_z_ratio']:.5f} "
               f"(tol 1%), {dt:.3f}s")
    assert ok


def test_04_riccati_vs_oracle(acceptance):
    rep, dt = _timed(lambda: validate.check_riccati_vs_oracle(n_pairs=200, seed=0, h=1e-3, length=2.0))
    ok = rep["passed"] and dt < 300
    acceptance(4, "Riccati count vs matrix inertia, 200 Hill pairs on (0,2]", ok,
               f"within 1: {rep['frac_within_1']:.3f} (>= 0.95), exact: {rep['frac_exact']:.3f} (>= 0.80), {dt:.1f}s")
    assert ok


def test_05_zero_noise_closed_forms(acceptance):
    (hill, lap), dt = _timed(lambda: (validate.check_zero_noise_hill(50, seed=0),
                                      validate.check_dirichlet_laplacian(n=10, h=1e-3)))
    ok = hill["passed"] and lap["passed"] and dt < 60
    acceptance(5, "zero-noise Hill counts and Dirichlet Laplacian spectrum", ok,
               f"{hill['mismatches']}/50 count mismatches, eigenvalue rel error {lap['max_rel_error']:.1e} "
               f"(tol 1e-3), {dt:.1f}s")
    assert ok


def test_06_interlacing(acceptance):
    rep, dt = _timed(lambda: validate.check_interlacing_suite(n_paths=100, seed=0, n=10, tol=1e-8))
    ok = rep["failures"] == 0 and dt < 300
    acceptance(6, "Dirichlet/periodic interlacing, 10 eigenvalues, 100 mollified paths", ok,
               f"{100 - rep['failures']}/100 pass, min gap {rep['min_gap']:.2e}, swapped control fails: "
               f"{rep['swapped_control_fails']}, {dt:.1f}s")
    assert ok


def test_07_comparison_lemma(acceptance):
    rep, dt = _timed(lambda: validate.check_comparison(n_pairs=100, seed=0, kappas=(1.0, 2.0, 8.0), n=10))
    ok = rep["passed"] and dt < 300
    acceptance(7, "spectral comparison, n = 1..10, 100 pairs, kappa in {1, 2, 8}", ok,
               f"{300 - rep['failures']}/300 pass, min margin {rep['min_margin']:.3f}, {dt:.1f}s")
    assert ok


def test_08_flat_domination(acceptance):
    rep, dt = _timed(lambda: validate.check_flat_domination(n_samples=100, seed=0, m_max=10))
    ok = rep["passed"] and dt < 300
    acceptance(8, "truncated periodic eigensum >= flat Fourier bound, m = 0..10", ok,
               f"{100 - rep['failures']}/100 pass, min margin {rep['min_margin']:.2e}, {dt:.1f}s")
    assert ok


def test_09_localization_coupling(acceptance):
    rep, dt = _timed(lambda: validate.check_localization(n_trials=100, seed=0))
    ok = rep["passed"] and dt < 300
    acceptance(9, "per-interval localization sandwich, 100 coupled trials", ok,
               f"{rep['failures']} violations, min gaps (lower, upper) = ({rep['min_lower_gap']}, "
               f"{rep['min_upper_gap']}), {dt:.1f}s")
    assert ok


@pytest.mark.slow
def test_10_unbiasedness_bridge(acceptance):
    t0 = time.perf_counter()
    base = EstimatorConfig(params=ModelParams(2.0, 1.0, 1.0), t=1.0, alpha=1.0 / 6.0, n_samples=10_000)
    hits, zs = 0, []
    for rep in range(20):
        plain = estimate_plain(replace(base, seed=2 * rep))
        tilted = estimate_tilted(replace(base, seed=2 * rep + 1))
        se = math.hypot(plain.std_error_log, tilted.std_error_log)
        z = (tilted.log_estimate - plain.log_estimate) / se
        zs.append(z)
        hits += abs(z) <= 2
    dt = time.perf_counter() - t0
    ok = hits >= 19 and dt < 1800
    acceptance(10, "plain vs tilted within 2 combined SE, 20 repetitions of n = 10^4", ok,
               f"{hits}/20 within 2 SE (need 19), max |z| {max(map(abs, zs)):.2f}, mean z {np.mean(zs):+.2f}, "
               f"{dt:.0f}s")
    assert ok


@pytest.mark.slow
def test_11_trend_toward_target(acceptance):
    t0 = time.perf_counter()
    params = ModelParams(2.0, 1.0, 1.0)
    rows = convergence_scan([EstimatorConfig(params=params, t=t, n_samples=10_000, seed=11) for t in (1.0, 2.0, 4.0)])
    dt = time.perf_counter() - t0
    vals = np.array([r["t2_log_G"] for r in rows])
    target = -scaled_rate(params)
    gaps = np.abs(vals - target)
    # the values sit below the (negative) target and approach it; see the decisions ledger
    approach = bool(np.all(np.diff(gaps) < 0) and np.all(vals < target))
    literal_decreasing = bool(np.all(np.diff(vals) < 0))
    in_band = 2 * target <= vals[-1] <= 0.5 * target
    ok = approach and in_band and dt < 7200
    acceptance(11, "t^-2 log G over t = 1, 2, 4 approaches -scaled_rate", ok,
               f"values {np.array2string(vals, precision=4)}, target {target:.4f}, monotone approach {approach}, "
               f"literally decreasing {literal_decreasing}, t=4 in [2x, x/2] band {in_band}, {dt:.0f}s")
    assert ok


def test_12_gaussian_reduction(acceptance):
    rep, dt = _timed(lambda: validate.check_gaussian_reduction(n_cases=20, seed=0))
    ok = rep["passed"] and dt < 1
    acceptance(12, "Gaussian reduction minimiser and F(y) >= F(y*) + (y - y*)^2/2", ok,
               f"max rel error {rep['max_rel_error']:.1e} (tol 1e-6), min quadratic margin "
               f"{rep['min_quadratic_margin']:.1e}, {dt:.3f}s")
    assert ok


def test_13_cost_bounds(acceptance):
    rep, dt = _timed(lambda: validate.check_cost_bounds(n=1000, seed=0))
    ok = rep["passed"] and dt < 1
    acceptance(13, "w_t excess in (0, log 2] and double-exponential sandwich, 10^3 inputs each", ok,
               f"excess range [{rep['excess_min']:.1e}, {rep['excess_max']:.4f}], sandwich "
               f"{rep['sandwich_upper_pass']}/1000 upper, {rep['sandwich_lower_pass']}/1000 lower, {dt:.3f}s")
    assert ok
