import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airy_ldp.brownian import BrownianPath, PathGrid, sample_path
from airy_ldp.oracle import (BC, LinearTerm, airy_count_bound_check, airy_counts, all_eigenvalues_below,
                             boundary_ordering, check_interlacing, comparison_bound_check, discretize, eigen_count,
                             eigensum_variational_check, flat_bound_rhs, flat_domination_check, flat_n_max,
                             fourier_level, lowest_eigenvalues, truncated_eigensum, write_spectrum_csv)

PI = math.pi
# negated zeros of Ai (standard tables)
AIRY_ZEROS = np.array([2.33810741, 4.08794944, 5.52055983, 6.78670809, 7.94413359])


def _dense_eigs(op):
    return np.linalg.eigvalsh(op.dense())


@pytest.mark.parametrize("bc,exact", [
    (BC.DIRICHLET, lambda n: (n * PI) ** 2),
    (BC.NEUMANN, lambda n: ((n - 1) * PI) ** 2),
    (BC.PERIODIC, lambda n: (2 * PI * (n // 2)) ** 2),
])
def test_laplacian_spectra(bc, exact):
    op = discretize(None, 2.0, (0.0, 1.0), 1e-3, bc)
    ev = lowest_eigenvalues(op, 7).eigenvalues
    n = np.arange(1, 8)
    ref = exact(n)
    assert np.allclose(ev, ref, rtol=1e-4, atol=1e-6)


def test_truncated_eigensum_dirichlet_unit_interval():
    op = discretize(None, 2.0, (0.0, 1.0), 1e-3)
    # (50 - pi^2) + (50 - 4 pi^2) = 100 - 5 pi^2
    assert truncated_eigensum(op, 50.0) == pytest.approx(100 - 5 * PI**2, rel=1e-5)
    assert truncated_eigensum(op, 5.0) == 0.0


def test_airy_eigenvalues():
    op = discretize(None, 2.0, (0.0, 40.0), 5e-3, BC.DIRICHLET, LinearTerm.X)
    ev = lowest_eigenvalues(op, 5).eigenvalues
    assert np.allclose(ev, AIRY_ZEROS, atol=1e-4)


@pytest.mark.parametrize("bc", list(BC))
def test_matches_dense_solver(bc):
    h = 0.01
    path = sample_path(PathGrid(h, 2.0), 11)
    op = discretize(path, 2.0, (0.0, 2.0), h, bc)
    dense = _dense_eigs(op)
    sp = lowest_eigenvalues(op, 8)
    assert np.allclose(sp.eigenvalues, dense[:8], rtol=1e-9, atol=1e-7)
    assert np.all(sp.residual_bound < 1e-6 * np.maximum(1, np.abs(sp.eigenvalues)))
    for lam in np.concatenate([[dense[0] - 1], 0.5 * (dense[:20] + dense[1:21])]):
        assert eigen_count(op, lam) == int(np.sum(dense < lam))


def test_all_eigenvalues_below_consistent_with_count():
    h = 0.005
    op = discretize(sample_path(PathGrid(h, 3.0), 1), 2.0, (0.0, 3.0), h, BC.PERIODIC)
    ev = all_eigenvalues_below(op, 120.0)
    assert ev.size == eigen_count(op, 120.0)
    assert np.all(ev < 120.0)


def test_richardson_second_order():
    j = lambda x: 0.3 * np.sin(2 * PI * x) + 0.1 * np.cos(6 * PI * x)
    ev = [lowest_eigenvalues(discretize(j, 2.0, (0.0, 1.0), h), 10).eigenvalues for h in (0.01, 0.005, 0.0025)]
    ratio = (ev[0] - ev[1]) / (ev[1] - ev[2])
    assert np.all((ratio > 3.5) & (ratio < 4.5))


def test_interlacing_and_negative_control():
    path = sample_path(PathGrid(2e-3, 1.0), 5)
    assert check_interlacing(path, 2.0, (0.0, 1.0), 0.02, 10).passed
    assert not check_interlacing(path, 2.0, (0.0, 1.0), 0.02, 10, swap=True).passed


def test_boundary_ordering_on_samples():
    for seed in range(10):
        path = sample_path(PathGrid(2e-3, 1.5), seed)
        assert boundary_ordering(path, 1.0, (0.0, 1.5), 0.03).passed


def test_comparison_bound():
    grid = PathGrid(1e-3, 1.0)
    j2 = sample_path(grid, 1)
    j1 = BrownianPath(grid, j2.values + 0.1 * sample_path(grid, 2).values)
    for k in (1.0, 2.0, 8.0):
        rep = comparison_bound_check(j1, j2, 2.0, (0.0, 1.0), k, 10)
        assert rep.passed
        # the sharp coefficient also bounds lambda_n(H1)
        assert np.all(rep.details["rhs_sharp"] >= rep.details["lambda1"] - 1e-8)


def test_comparison_identical_paths():
    path = sample_path(PathGrid(1e-3, 1.0), 3)
    rep = comparison_bound_check(path, path, 2.0, (0.0, 1.0), 2.0, 5)
    assert rep.details["U12"] == 0.0 and rep.passed


def test_fourier_levels():
    assert list(fourier_level(np.arange(1, 6), 1.0)) == pytest.approx(
        [0.0, (2 * PI) ** 2, (2 * PI) ** 2, (4 * PI) ** 2, (4 * PI) ** 2])


def test_flat_bound_rhs_direct_sum():
    r, b, beta, ell = 60.0, 0.7, 2.0, 1.3
    sigma = 2 / math.sqrt(beta)
    n_max = flat_n_max(r, b, beta, ell)
    direct = sum(max(r - sigma * b - lv, 0.0) for lv in fourier_level(np.arange(1, n_max + 1), ell))
    assert flat_bound_rhs(r, b, beta, ell, n_max) == pytest.approx(direct)
    # one more level lies above r - sigma b
    assert fourier_level(np.array([n_max + 1]), ell)[0] >= r - sigma * b


def test_eigensum_variational_chain():
    h = 2e-3
    path = sample_path(PathGrid(h, 1.0), 6)
    op = discretize(path, 2.0, (0.0, 1.0), h, BC.PERIODIC)
    b_avg = path.values[-1] - path.values[0]
    for m in range(0, 11):
        assert eigensum_variational_check(op, m, b_avg, 2.0).passed


def test_flat_domination_random():
    h = 2e-3
    rng = np.random.default_rng(4)
    for seed in range(10):
        ell = h * rng.integers(300, 1200)
        path = sample_path(PathGrid(h, ell), seed)
        op = discretize(path, 2.0, (0.0, ell), h, BC.PERIODIC)
        rep = flat_domination_check(op, rng.uniform(0, 120), (path.values[-1] - path.values[0]) / ell, 2.0)
        assert rep.passed


def test_airy_counts_and_bound():
    assert airy_counts([0.0, 10.0])[0] == 0
    assert airy_counts([10.0])[0] == math.floor(2 / (3 * PI) * 10**1.5)
    rep = airy_count_bound_check(np.linspace(0.5, 30.0, 60), slack=0.1, lambda_min=5.5)
    assert rep.passed and rep.details["monotone"]
    # right after the first eigenvalue the ratio N / lambda^{3/2} exceeds 1.1 * 2/(3 pi)
    assert rep.details["sup_ratio"] > rep.details["constant"]


def test_discretize_validation():
    with pytest.raises(ValueError):
        discretize(None, 2.0, (0.0, 1.0), 0.3)
    with pytest.raises(ValueError):
        discretize(None, 2.0, (1.0, 1.0), 0.1)
    with pytest.raises(ValueError):
        lowest_eigenvalues(discretize(None, 2.0, (0.0, 1.0), 0.1), 50)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(-20, 200))
def test_count_monotone_in_lambda(seed, lam):
    op = discretize(sample_path(PathGrid(0.01, 1.0), seed), 2.0, (0.0, 1.0), 0.01)
    assert eigen_count(op, lam) <= eigen_count(op, lam + 1.0)


def test_spectrum_csv():
    sp = lowest_eigenvalues(discretize(None, 2.0, (0.0, 1.0), 1e-2), 3)
    buf = io.StringIO()
    write_spectrum_csv(sp, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "index,eigenvalue,bc" and len(lines) == 4
