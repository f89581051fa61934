import io
import math

import numpy as np
import pytest

from airy_ldp.brownian import (BrownianPath, DriftProfile, PathGrid, add_drift, cell_drift, girsanov_log_weight,
                               grid_log_weight, increment_max, make_rng, mollify, read_path_csv, sample_path,
                               write_path_csv)


def test_grid_validation():
    g = PathGrid(0.25, 2.0)
    assert g.n_points == 9 and g.n_cells == 8
    assert g.index_of(1.5) == 6
    with pytest.raises(ValueError):
        PathGrid(0.3, 1.0)
    with pytest.raises(ValueError):
        PathGrid(-0.1, 1.0)
    with pytest.raises(ValueError):
        g.index_of(0.3)


def test_sample_path_deterministic_and_streams_differ():
    g = PathGrid(0.01, 5.0)
    a, b = sample_path(g, 7, 3), sample_path(g, 7, 3)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, sample_path(g, 7, 4).values)
    assert not np.array_equal(a.values, sample_path(g, 8, 3).values)
    assert a.values[0] == 0.0
    assert not a.values.flags.writeable


def test_increment_variance():
    g = PathGrid(0.01, 100.0)
    incr = sample_path(g, 1).increments
    # 10^4 increments: sample variance within ~5 standard errors of h
    assert np.var(incr) == pytest.approx(0.01, rel=5 * math.sqrt(2 / incr.size))
    assert abs(np.mean(incr)) < 5 * math.sqrt(0.01 / incr.size)


def test_make_rng_extra_keys():
    a = make_rng(1, 2, 3).standard_normal(4)
    b = make_rng(1, 2, 4).standard_normal(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, make_rng(1, 2, 3).standard_normal(4))


def test_drift_profile_cumulative():
    d = DriftProfile(np.array([0.0, 1.0, 3.0]), np.array([2.0, -1.0]))
    assert d.cumulative(0.5) == pytest.approx(1.0)
    assert d.cumulative(2.0) == pytest.approx(1.0)
    assert d.cumulative(10.0) == pytest.approx(0.0)
    assert d.energy() == pytest.approx(4.0 + 2.0)
    with pytest.raises(ValueError):
        DriftProfile(np.array([0.0, 0.0]), np.array([1.0]))


def test_add_drift_exact_on_zero_path():
    g = PathGrid(0.1, 4.0)
    d = DriftProfile(np.array([0.0, 1.0, 2.0]), np.array([1.5, 0.5]))
    p = add_drift(BrownianPath.zero(g), d)
    assert np.allclose(p.values, d.cumulative(g.nodes))
    assert p.drift_applied is d
    # breakpoints beyond the path end are clipped
    long = DriftProfile(np.array([0.0, 10.0]), np.array([1.0]))
    assert add_drift(BrownianPath.zero(g), long).values[-1] == pytest.approx(4.0)


def test_mollify_identity_at_grid_step():
    p = sample_path(PathGrid(0.01, 1.0), 2)
    assert np.array_equal(mollify(p, 0.01).values, p.values)


def test_mollify_preserves_linear_functions_inside():
    g = PathGrid(0.01, 1.0)
    p = BrownianPath.from_function(g, lambda x: 3 * x - 1)
    m = mollify(p, 0.05)
    inner = slice(6, -6)
    assert np.allclose(m.values[inner], p.values[inner], atol=1e-12)
    with pytest.raises(ValueError):
        mollify(p, 0.001)


def test_mollify_smooths():
    p = sample_path(PathGrid(0.002, 1.0), 5)
    m = mollify(p, 0.05)
    assert np.sum(np.diff(m.values, 2) ** 2) < 0.01 * np.sum(np.diff(p.values, 2) ** 2)


def test_increment_max():
    g = PathGrid(0.5, 3.0)
    p = BrownianPath(g, np.array([0.0, 1.0, -2.0, 0.5, 0.0, 4.0, 1.0]))
    assert increment_max(p, 0.0, 1.5) == pytest.approx(2.0)
    assert increment_max(p, 1.0, 2.5) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        increment_max(p, 1.0, 1.0)


def test_girsanov_zero_drift_is_zero():
    p = sample_path(PathGrid(0.01, 2.0), 0)
    assert girsanov_log_weight(p, DriftProfile.zero()) == 0.0
    assert grid_log_weight(p, DriftProfile.zero()) == 0.0


def test_girsanov_weights_agree_on_aligned_breakpoints():
    g = PathGrid(0.01, 3.0)
    d = DriftProfile(np.array([0.0, 1.0, 2.5]), np.array([0.7, 0.2]))
    x = add_drift(sample_path(g, 3), d)
    assert grid_log_weight(x, d) == pytest.approx(girsanov_log_weight(x, d), rel=1e-10)


def test_girsanov_drifted_path_identity():
    # on B~ + int V the weight equals -int V dB~ - 1/2 int V^2
    g = PathGrid(0.01, 3.0)
    d = DriftProfile(np.array([0.0, 1.0, 2.0]), np.array([0.4, 1.1]))
    b = sample_path(g, 9)
    jumps = np.diff(b.value_at(d.breakpoints))
    expected = -np.dot(d.levels, jumps) - 0.5 * d.energy()
    assert girsanov_log_weight(add_drift(b, d), d) == pytest.approx(expected, rel=1e-12)


def test_exponential_martingale_mean():
    # E[exp(-gw(B~))] = 1 on undrifted paths; E over tilted samples of exp(gw(X)) = 1 too
    g = PathGrid(0.05, 2.0)
    d = DriftProfile(np.array([0.0, 0.5, 2.0]), np.array([0.8, -0.3]))
    n = 4000
    w1 = np.array([math.exp(-girsanov_log_weight(sample_path(g, 1, i), d)) for i in range(n)])
    w2 = np.array([math.exp(grid_log_weight(add_drift(sample_path(g, 2, i), d), d)) for i in range(n)])
    for w in (w1, w2):
        assert abs(np.mean(w) - 1) < 5 * np.std(w) / math.sqrt(n)


def test_cell_drift_sums_to_total():
    g = PathGrid(0.3, 3.0)
    d = DriftProfile(np.array([0.1, 1.0, 2.0]), np.array([1.0, 2.0]))
    assert cell_drift(g, d).sum() == pytest.approx(0.9 + 2.0)


def test_csv_roundtrip(tmp_path):
    p = sample_path(PathGrid(0.1, 2.0), 42)
    f = tmp_path / "p.csv"
    write_path_csv(p, f)
    q = read_path_csv(f)
    assert np.array_equal(p.values, q.values) and q.seed == 42 and q.step == p.step
    buf = io.StringIO()
    write_path_csv(p, buf)
    assert buf.getvalue().splitlines()[0] == "h,x_max,seed"
