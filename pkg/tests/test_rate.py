import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airy_ldp.rate import (Control, ModelParams, Partition, gaussian_reduction, localization_partition,
                           minimize_objective, objective, phi, phi_extended, riemann_objective, scaled_rate,
                           tilt_profile, v_star)

PI = math.pi
positive = st.floats(0.5, 4.0)

# closed form at z = -1 evaluated in exact arithmetic (mpmath, 30 digits), frozen here
PHI_AT_MINUS_ONE = 0.050262836597930585


def test_phi_at_minus_one():
    assert phi(-1.0) == pytest.approx(PHI_AT_MINUS_ONE, rel=1e-14)


def test_phi_zero_and_domain():
    assert phi(0.0) == 0.0
    with pytest.raises(ValueError):
        phi(0.1)
    with pytest.raises(ValueError):
        phi(float("nan"))
    with pytest.raises(ValueError):
        phi_extended(1 / PI**2)


def test_phi_low_derivatives_vanish():
    h = 1e-3
    f = phi_extended(np.array([-2 * h, -h, 0.0, h, 2 * h]))
    first = (f[3] - f[1]) / (2 * h)
    second = (f[3] - 2 * f[2] + f[1]) / h**2
    assert abs(first) < 1e-4 and abs(second) < 1e-4


def test_phi_small_z_expansion():
    # Phi(z) = -z^3/12 - pi^2 z^4 / 96 + O(z^5): the pure cubic is only accurate to O(|z|)
    z = -1e-3
    ratio = phi(z) / abs(z) ** 3
    expansion = 1 / 12 + PI**2 / 96 * z
    assert ratio == pytest.approx(expansion, rel=1e-5)
    assert abs(ratio - 1 / 12) == pytest.approx(1.03e-4, rel=0.02)


def test_phi_series_matches_closed_form_at_switch():
    z = -0.1 / PI**2
    closed = 4 / (15 * PI**6) * ((1 - PI**2 * z) ** 2.5 - 1) + 2 / (3 * PI**4) * z - z**2 / (2 * PI**2)
    for zz in (z * (1 - 1e-9), z * (1 + 1e-9)):
        assert phi_extended(zz) == pytest.approx(closed, rel=1e-6)


def test_phi_large_z_law():
    z = -1e4
    assert phi(z) / abs(z) ** 2.5 == pytest.approx(4 / (15 * PI), rel=0.01)


@given(st.floats(-1e3, 0))
def test_phi_non_negative_and_monotone(z):
    assert phi(z) >= 0
    assert phi(z - 1.0) >= phi(z)


def test_scaled_rate_parameterizations():
    assert scaled_rate(ModelParams(2.0, 1.0, 1.0)) == pytest.approx(PHI_AT_MINUS_ONE, rel=1e-14)
    # beta = 1, L = 1/2 collapses to Phi(-zeta) / 2
    for zeta in (0.3, 1.0, 7.0):
        assert scaled_rate(ModelParams(1.0, 0.5, zeta)) == pytest.approx(0.5 * phi(-zeta), rel=1e-13)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(beta=0.0)
    with pytest.raises(ValueError):
        ModelParams(zeta=float("inf"))


@settings(max_examples=50)
@given(positive, positive, positive)
def test_vstar_algebraic_identity(beta, L, zeta):
    p = ModelParams(beta, L, zeta)
    x = np.linspace(0, 1.5 * zeta, 101)
    v = v_star(x, p)
    lhs = np.maximum(zeta - x - p.sigma * v, 0.0)
    rhs = (math.sqrt(beta) * PI / (2 * L) * v) ** 2
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * max(1.0, zeta))


def test_vstar_shape():
    p = ModelParams()
    assert v_star(p.zeta, p) == 0.0 and v_star(5.0, p) == 0.0
    x = np.linspace(0, 1, 50)
    assert np.all(np.diff(v_star(x, p)) <= 0)


def test_objective_at_vstar_matches_rate():
    p = ModelParams(2.0, 1.0, 1.0)
    val = objective(Control.from_function(lambda x: v_star(x, p), p.zeta, 10_000), p)
    assert val == pytest.approx(scaled_rate(p), rel=1e-7)


def test_objective_requires_cover():
    p = ModelParams()
    with pytest.raises(ValueError):
        objective(Control(np.array([0.0, 0.5]), np.array([0.1])), p)


def test_zero_control_cost():
    p = ModelParams(2.0, 1.0, 2.0)
    expected = 2 * p.L / (3 * PI) * 0.4 * p.zeta**2.5
    assert objective(Control(np.array([0.0, 2.0]), np.array([0.0])), p) == pytest.approx(expected)


def test_minimizer_uniqueness_probe():
    p = ModelParams(2.0, 1.0, 1.0)
    n = 500
    base = Control.from_function(lambda x: v_star(x, p), p.zeta, n)
    f0 = objective(base, p)
    rng = np.random.default_rng(0)
    for _ in range(100):
        pert = rng.uniform(-1, 1, n)
        pert *= 1e-2 / np.max(np.abs(pert))
        vals = np.maximum(base.values + pert, 0.0)
        assert objective(Control(base.grid, vals), p) > f0


def test_minimize_objective_recovers_vstar():
    p = ModelParams(3.0, 0.7, 1.5)
    ctrl = minimize_objective(p, 400)
    mids = 0.5 * (ctrl.grid[1:] + ctrl.grid[:-1])
    assert np.max(np.abs(ctrl.values - v_star(mids, p))) < 1e-3


def test_partition_and_tilt():
    part = localization_partition(8.0, 1 / 3, 1.0)
    # i_* = ceil(8^{1/3}) + 1 = 3, spacing 8^{1/3} = 2
    assert np.allclose(part.points, [0, 2, 4, 6])
    assert part.n_buckets == 4
    prof = tilt_profile(8.0, 1 / 3, ModelParams())
    assert np.allclose(prof.breakpoints, part.points)
    assert prof.levels[0] == pytest.approx(4 * v_star(0.0, ModelParams()))
    assert prof.levels[-1] == 0.0
    with pytest.raises(ValueError):
        localization_partition(1.0, 2 / 3, 1.0)
    with pytest.raises(ValueError):
        Partition(np.array([0.5, 1.0]))


def test_riemann_objective_converges():
    p = ModelParams()
    target = scaled_rate(p)
    errs = [abs(sum(riemann_objective(t, 1 / 6, p)) - target) for t in (10.0, 100.0, 1000.0)]
    assert errs[-1] < 0.1 * target
    assert errs[2] < errs[0]


def test_gaussian_reduction_minimum():
    p = ModelParams(2.0, 1.0, 1.0)
    y_star, f_min, red = gaussian_reduction(p, 8.0, 1 / 6, 1.0)
    assert red.dF(y_star) == pytest.approx(0.0, abs=1e-9 * max(1.0, y_star))
    ys = np.linspace(y_star - 5, y_star + 5, 201)
    assert np.all(red.F(ys) >= f_min + 0.5 * (ys - y_star) ** 2 - 1e-12)
    assert red.F_min == f_min
