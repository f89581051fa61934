"""Executable invariant suites shared by the CLI ``validate`` command and the test-suite.

Every check returns a plain dict with a ``passed`` flag and the margins it
looked at, so reports serialise to JSON directly.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Callable

import numpy as np
from scipy import optimize

from . import cost
from .brownian import BrownianPath, PathGrid, make_rng, sample_path
from .estimator import EstimatorConfig, Quadrature, estimate_plain, estimate_tilted, spectral_statistic
from .oracle import (BC, LinearTerm, airy_count_bound_check, all_eigenvalues_below, boundary_ordering,
                     check_interlacing, comparison_bound_check, discretize, eigen_count, flat_domination_check,
                     lowest_eigenvalues)
from .rate import (Control, ModelParams, gaussian_reduction, localization_partition, minimize_objective, objective,
                   phi, phi_extended, scaled_rate, v_star)
from .riccati import count_hill_many, count_sao, localized_counts, monotone_lambda_scan, snap_partition

SUITES = ("riccati", "oracle", "interlace", "rate", "estimator")


def _f(x) -> float:
    return float(x)


# rate and cost


def check_variational_identity(n_params: int = 20, seed: int = 0, n_cells: int = 4000) -> dict:
    """``objective(v_star) == scaled_rate`` for random ``(beta, L, zeta)`` in ``[0.5, 4]^3``."""
    rng = make_rng(seed, 101)
    errs = []
    for beta, L, zeta in rng.uniform(0.5, 4.0, size=(n_params, 3)):
        p = ModelParams(beta, L, zeta)
        exact = scaled_rate(p)
        # midpoint-sampled step controls converge at second order; one Richardson step removes it
        f = lambda x: v_star(x, p)
        o1 = objective(Control.from_function(f, zeta, n_cells), p)
        o2 = objective(Control.from_function(f, zeta, 2 * n_cells), p)
        est = (4 * o2 - o1) / 3
        errs.append(abs(est - exact) / exact)
    errs = np.array(errs)
    return {"passed": bool(np.all(errs < 1e-6)), "max_rel_error": _f(errs.max()), "tol": 1e-6}


def check_minimizer_recovery(params: ModelParams = ModelParams(2.0, 1.0, 1.0), grid_size: int = 1000) -> dict:
    ctrl = minimize_objective(params, grid_size)
    mids = 0.5 * (ctrl.grid[:-1] + ctrl.grid[1:])
    err = float(np.max(np.abs(ctrl.values - v_star(mids, params))))
    return {"passed": err < 1e-3, "sup_error": err, "tol": 1e-3}


def check_phi_laws() -> dict:
    h = 1e-3
    z = np.array([-2 * h, -h, h, 2 * h])
    f = phi_extended(z)
    third = (f[3] - 2 * f[2] + 2 * f[1] - f[0]) / (2 * h**3)
    z_big = -1e4
    ratio = phi(z_big) * abs(z_big) ** -2.5 / (4 / (15 * math.pi))
    return {"passed": abs(third + 0.5) < 1e-4 and abs(ratio - 1) < 0.01,
            "third_derivative": _f(third), "large_z_ratio": _f(ratio), "phi_at_0": _f(phi(0.0))}


def check_gaussian_reduction(n_cases: int = 20, seed: int = 0) -> dict:
    rng = make_rng(seed, 102)
    rel_errs, min_margin = [], math.inf
    for _ in range(n_cases):
        beta, L, zeta = rng.uniform(0.5, 4.0, 3)
        t = rng.uniform(1.0, 16.0)
        alpha = rng.uniform(-0.3, 0.6)
        p = ModelParams(beta, L, zeta)
        x_i = rng.uniform(0.0, 0.95) * t ** (2 / 3) * zeta
        y_star, f_min, red = gaussian_reduction(p, t, alpha, x_i)
        # F is convex with a unique minimiser in [0, y_kink]; solve F'(y) = 0 independently
        y_num = optimize.brentq(red.dF, 0.0, red.y_kink, xtol=1e-15, rtol=1e-15, maxiter=500)
        rel_errs.append(abs(y_num - y_star) / max(abs(y_star), 1e-300))
        probe = y_star + np.linspace(-3, 3, 121) * max(1.0, y_star)
        gap = red.F(probe) - (f_min + 0.5 * (probe - y_star) ** 2)
        min_margin = min(min_margin, float(np.min(gap / np.maximum(1.0, np.abs(red.F(probe))))))
    rel_errs = np.array(rel_errs)
    return {"passed": bool(np.all(rel_errs < 1e-6) and min_margin >= -1e-12),
            "max_rel_error": _f(rel_errs.max()), "min_quadratic_margin": min_margin}


def check_cost_bounds(n: int = 1000, seed: int = 0) -> dict:
    rng = make_rng(seed, 103)
    lam = rng.normal(0, 5, n)
    t = rng.uniform(0.01, 100, n)
    excess = np.array([cost.w_t_excess(l, tt) for l, tt in zip(lam, t)])
    # the naive difference cancels to 0 for large |lam|; compare where it is representable
    naive = np.array([cost.w_t(l, tt) - tt ** (1 / 3) * max(-l, 0.0) for l, tt in zip(lam, t)])
    small = np.abs(t ** (1 / 3) * lam) < 20
    consistent = bool(np.allclose(naive[small], excess[small], rtol=1e-9, atol=1e-12))
    bound_ok = consistent and bool(np.all((excess > 0) & (excess <= math.log(2) + 1e-15)))
    x = rng.normal(0, 3, n)
    delta = rng.uniform(0, 2, n)
    ts = rng.uniform(0.01, 10, n)
    b = rng.uniform(0.1, 10, n)
    up, lo = cost.sandwich_bounds(x, delta, ts, b)
    return {"passed": bound_ok and bool(np.all(up) and np.all(lo)), "excess_min": _f(excess.min()),
            "excess_max": _f(excess.max()), "sandwich_upper_pass": int(np.sum(up)),
            "sandwich_lower_pass": int(np.sum(lo)), "n": n}


# Riccati


def check_zero_noise_hill(n_cases: int = 50, seed: int = 0, h: float = 1e-3) -> dict:
    """``count_hill = floor(l sqrt(lam_+) / pi)`` on ``B = 0`` for non-resonant ``(l, lam)``."""
    rng = make_rng(seed, 104)
    grid = PathGrid(h, 5.0)
    zero = BrownianPath.zero(grid)
    bad = 0
    for _ in range(n_cases):
        ell = h * rng.integers(200, 5000)
        lam = rng.uniform(-5, 300)
        k = ell * math.sqrt(max(lam, 0)) / math.pi
        if abs(k - round(k)) < 1e-3:
            lam += 0.5
            k = ell * math.sqrt(max(lam, 0)) / math.pi
        got = int(count_hill_many(zero, 2.0, [lam], (0.0, ell))[0])
        bad += got != math.floor(k)
    return {"passed": bad == 0, "mismatches": bad, "n": n_cases}


def check_riccati_vs_oracle(n_pairs: int = 200, seed: int = 0, h: float = 1e-3, length: float = 2.0) -> dict:
    """Riccati explosion count versus matrix inertia for Dirichlet Hill on ``(0, length]``."""
    rng = make_rng(seed, 105)
    grid = PathGrid(h, length)
    diffs = []
    for j in range(n_pairs):
        path = sample_path(grid, seed, 1000 + j)
        lam = rng.uniform(-10, 200)
        n_ric = int(count_hill_many(path, 2.0, [lam], (0.0, length))[0])
        n_mat = eigen_count(discretize(path, 2.0, (0.0, length), h), lam)
        diffs.append(abs(n_ric - n_mat))
    diffs = np.array(diffs)
    within1 = float(np.mean(diffs <= 1))
    exact = float(np.mean(diffs == 0))
    return {"passed": within1 >= 0.95 and exact >= 0.80, "frac_within_1": within1, "frac_exact": exact,
            "max_diff": int(diffs.max()), "n": n_pairs}


def check_localization(n_trials: int = 100, seed: int = 0, beta: float = 2.0, h: float = 2e-3) -> dict:
    """Per-interval sandwich ``N(lam - x_i, I_i) <= bucket_i <= N(lam - x_{i-1}, I_i) + 1``."""
    rng = make_rng(seed, 106)
    failures = 0
    min_lower, min_upper = math.inf, math.inf
    for j in range(n_trials):
        t = float(rng.uniform(1.0, 8.0))
        alpha = float(rng.uniform(-0.2, 0.5))
        zeta = float(rng.uniform(0.5, 2.0))
        part = snap_partition(localization_partition(t, alpha, zeta), h)
        lam = float(rng.uniform(-2.0, 1.2 * part.points[-1] + 2.0))
        length = h * math.ceil((max(lam, part.points[-1]) + 16.0) / h)
        path = sample_path(PathGrid(h, length), seed, 2000 + j)
        buckets, _ = localized_counts(path, beta, lam, part, return_flag=True)
        x = part.points
        for i in range(1, x.size):
            lower = int(count_hill_many(path, beta, [lam - x[i]], (x[i - 1], x[i]))[0])
            upper = int(count_hill_many(path, beta, [lam - x[i - 1]], (x[i - 1], x[i]))[0]) + 1
            min_lower = min(min_lower, buckets[i - 1] - lower)
            min_upper = min(min_upper, upper - buckets[i - 1])
            failures += not (lower <= buckets[i - 1] <= upper)
    return {"passed": failures == 0, "failures": failures, "min_lower_gap": int(min_lower),
            "min_upper_gap": int(min_upper), "n": n_trials}


def check_sao_monotone(n_paths: int = 5, seed: int = 0, h: float = 5e-3) -> dict:
    lams = np.linspace(-5, 30, 100)
    grid = PathGrid(h, 46.0)
    ok = True
    for j in range(n_paths):
        counts = monotone_lambda_scan(sample_path(grid, seed, 3000 + j), 2.0, lams)
        ok &= bool(np.all(np.diff(counts) >= 0))
    zero = BrownianPath.zero(grid)
    airy = [count_sao(zero, 2.0, lam) for lam in (1.0, 3.0, 5.0)]
    return {"passed": ok and airy == [0, 1, 2], "monotone": ok, "zero_noise_counts": airy}


# oracle


def check_dirichlet_laplacian(n: int = 10, h: float = 1e-3) -> dict:
    worst = 0.0
    for ell in (1.0, 2.0, 3.0):
        ev = lowest_eigenvalues(discretize(None, 2.0, (0.0, ell), h), n).eigenvalues
        exact = (np.arange(1, n + 1) * math.pi / ell) ** 2
        worst = max(worst, float(np.max(np.abs(ev - exact) / exact)))
    return {"passed": worst < 1e-3, "max_rel_error": worst, "tol": 1e-3}


def check_comparison(n_pairs: int = 100, seed: int = 0, kappas=(1.0, 2.0, 8.0), n: int = 10, h: float = 1e-3) -> dict:
    """Spectral comparison for random Brownian pairs on ``(0, 1]``; half the pairs are close."""
    rng = make_rng(seed, 107)
    grid = PathGrid(h, 1.0)
    failures, min_margin = 0, math.inf
    for j in range(n_pairs):
        j2 = sample_path(grid, seed, 4000 + j)
        other = sample_path(grid, seed, 5000 + j)
        eps = 0.2 if j % 2 else 1.0
        j1 = BrownianPath(grid, j2.values * (1 - eps) + eps * other.values if j % 2 else other.values)
        beta = float(rng.uniform(1.0, 4.0))
        for k in kappas:
            rep = comparison_bound_check(j1, j2, beta, (0.0, 1.0), k, n, h)
            failures += not rep.passed
            min_margin = min(min_margin, float(np.min(rep.margins)))
    return {"passed": failures == 0, "failures": failures, "min_margin": min_margin,
            "n_pairs": n_pairs, "kappas": list(kappas)}


def check_flat_domination(n_samples: int = 100, seed: int = 0, m_max: int = 10, h: float = 2e-3) -> dict:
    rng = make_rng(seed, 108)
    failures, min_margin = 0, math.inf
    for j in range(n_samples):
        ell = float(h * rng.integers(250, 1500))
        path = sample_path(PathGrid(h, ell), seed, 6000 + j)
        beta = float(rng.uniform(1.0, 4.0))
        op = discretize(path, beta, (0.0, ell), h, BC.PERIODIC)
        b_avg = float(path.values[-1] - path.values[0]) / ell
        r = float(rng.uniform(0.0, 150.0))
        rep = flat_domination_check(op, r, b_avg, beta, m_max)
        failures += not rep.passed
        min_margin = min(min_margin, float(np.min(rep.margins)))
    return {"passed": failures == 0, "failures": failures, "min_margin": min_margin, "n": n_samples}


def check_airy_bound() -> dict:
    """Count bound with 10% slack, asserted from ``lambda = 5.5`` upwards; the full-grid sup is reported."""
    rep = airy_count_bound_check(np.linspace(0.5, 30.0, 60), slack=0.1, lambda_min=5.5)
    return {"passed": bool(rep.passed), "sup_ratio": rep.details["sup_ratio"], "constant": rep.details["constant"],
            "monotone": rep.details["monotone"]}


def check_boundary_ordering(n_paths: int = 20, seed: int = 0, h: float = 2e-3) -> dict:
    grid = PathGrid(h, 1.0)
    failures = 0
    for j in range(n_paths):
        rep = boundary_ordering(sample_path(grid, seed, 7000 + j), 2.0, (0.0, 1.0), 0.02)
        failures += not rep.passed
    return {"passed": failures == 0, "failures": failures, "n": n_paths}


# interlacing


def check_interlacing_suite(n_paths: int = 100, seed: int = 0, n: int = 10, h: float = 2e-3,
                            epsilon: float = 0.02, tol: float = 1e-8) -> dict:
    grid = PathGrid(h, 1.0)
    failures, min_gap = 0, math.inf
    for j in range(n_paths):
        path = sample_path(grid, seed, 8000 + j)
        rep = check_interlacing(path, 2.0, (0.0, 1.0), epsilon, n, h, tol)
        failures += not rep.passed
        min_gap = min(min_gap, float(np.min(rep.margins)))
    control = check_interlacing(sample_path(grid, seed, 8000), 2.0, (0.0, 1.0), epsilon, n, h, tol, swap=True)
    return {"passed": failures == 0 and not control.passed, "failures": failures, "min_gap": min_gap,
            "swapped_control_fails": not control.passed, "n": n_paths}


# estimator


def check_statistic_zero_noise(h: float = 5e-3) -> dict:
    cfg = EstimatorConfig(t=1.0, riccati_step=h)
    stat = spectral_statistic(BrownianPath.zero(cfg.path_grid()), cfg)
    op = discretize(None, 2.0, (0.0, 40.0), h, BC.DIRICHLET, LinearTerm.X)
    ev = all_eigenvalues_below(op, 40.0)
    ref = float(np.sum(cost.w_t(ev - 1.0, 1.0)))
    return {"passed": bool(abs(stat - ref) < 1e-2), "statistic": stat, "oracle_sum": ref}


def check_plain_vs_tilted(n_samples: int = 2000, seed: int = 0, n_sigma: float = 3.0) -> dict:
    cfg = EstimatorConfig(t=1.0, n_samples=n_samples, seed=seed)
    a = estimate_plain(cfg)
    b = estimate_tilted(replace(cfg, seed=seed + 1))
    se = math.hypot(a.std_error_log, b.std_error_log)
    return {"passed": bool(abs(a.log_estimate - b.log_estimate) <= n_sigma * se), "plain": a.log_estimate,
            "tilted": b.log_estimate, "combined_se": se, "ess": b.ess}


def check_determinism(seed: int = 0) -> dict:
    cfg = EstimatorConfig(t=1.0, n_samples=20, seed=seed)
    a, b = estimate_tilted(cfg), estimate_tilted(cfg)
    same = bool(np.array_equal(a.per_sample_log_terms, b.per_sample_log_terms))
    return {"passed": bool(same and a.log_estimate == b.log_estimate)}


_SUITE_CHECKS: dict[str, dict[str, Callable[[int], dict]]] = {
    "rate": {
        "variational_identity": lambda s: check_variational_identity(seed=s),
        "minimizer_recovery": lambda s: check_minimizer_recovery(),
        "phi_laws": lambda s: check_phi_laws(),
        "gaussian_reduction": lambda s: check_gaussian_reduction(seed=s),
        "cost_bounds": lambda s: check_cost_bounds(seed=s),
    },
    "riccati": {
        "zero_noise_hill": lambda s: check_zero_noise_hill(seed=s),
        "oracle_agreement": lambda s: check_riccati_vs_oracle(seed=s),
        "localization": lambda s: check_localization(seed=s),
        "monotone_scan": lambda s: check_sao_monotone(seed=s),
    },
    "oracle": {
        "dirichlet_laplacian": lambda s: check_dirichlet_laplacian(),
        "boundary_ordering": lambda s: check_boundary_ordering(seed=s),
        "comparison": lambda s: check_comparison(seed=s),
        "flat_domination": lambda s: check_flat_domination(seed=s),
        "airy_count_bound": lambda s: check_airy_bound(),
    },
    "interlace": {
        "interlacing": lambda s: check_interlacing_suite(seed=s),
    },
    "estimator": {
        "zero_noise_statistic": lambda s: check_statistic_zero_noise(),
        "plain_vs_tilted": lambda s: check_plain_vs_tilted(seed=s),
        "determinism": lambda s: check_determinism(seed=s),
    },
}


def run_suite(name: str, seed: int = 0) -> dict:
    """Run one suite (or ``"all"``); failures are report content, not exceptions."""
    names = SUITES if name == "all" else (name,)
    for n in names:
        if n not in _SUITE_CHECKS:
            raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")
    checks = {}
    for n in names:
        for key, fn in _SUITE_CHECKS[n].items():
            try:
                checks[f"{n}.{key}"] = fn(seed)
            except Exception as exc:  # report, do not abort the other checks
                checks[f"{n}.{key}"] = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
    return {"suite": name, "seed": seed, "passed": all(c["passed"] for c in checks.values()), "checks": checks}
