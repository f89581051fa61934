"""Closed-form lower-tail rate, its variational form, and the tilt profile.

The rate function is

    Phi(z) = 4/(15 pi^6) (1 - pi^2 z)^{5/2} - 4/(15 pi^6) + 2/(3 pi^4) z - z^2/(2 pi^2),   z <= 0,

and for parameters ``(beta, L, zeta)`` the scaled rate is
``L (2L/beta)^5 Phi(-(beta/2L)^2 zeta)``. The same number is the minimum over
controls ``v >= 0`` of

    int_0^inf (2L/3pi) ((zeta - x - (2/sqrt(beta)) v(x))_+)^{3/2} + v(x)^2 / 2 dx,

attained at ``v_star``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .brownian import DriftProfile

PI = math.pi
_SERIES_RADIUS = 0.1  # use the power series when pi^2 |z| < this
_N_SERIES = 24


@dataclass(frozen=True)
class ModelParams:
    beta: float = 2.0
    L: float = 1.0
    zeta: float = 1.0

    def __post_init__(self):
        for name in ("beta", "L", "zeta"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def sigma(self) -> float:
        """Noise strength ``2/sqrt(beta)``."""
        return 2.0 / math.sqrt(self.beta)


def _series_coefficients() -> np.ndarray:
    # coefficient of z^k in Phi for k >= 3: 4/(15 pi^6) * binom(5/2, k) * (-pi^2)^k
    c = np.zeros(_N_SERIES + 1)
    binom = 1.0
    for k in range(1, _N_SERIES + 1):
        binom *= (2.5 - (k - 1)) / k
        if k >= 3:
            c[k] = 4.0 / (15.0 * PI**6) * binom * (-(PI**2)) ** k
    return c


_COEF = _series_coefficients()


def phi_extended(z):
    """Analytic continuation of Phi to ``z < 1/pi^2`` (used for centred differences at 0)."""
    z = np.asarray(z, dtype=float)
    if np.any(PI**2 * z >= 1):
        raise ValueError("phi_extended requires z < 1/pi^2")
    small = np.abs(PI**2 * z) < _SERIES_RADIUS
    out = np.empty_like(z)
    zs = z[small]
    # Horner from the top term down to z^3
    acc = np.zeros_like(zs)
    for k in range(_N_SERIES, 2, -1):
        acc = acc * zs + _COEF[k]
    out[small] = acc * zs**3
    zb = z[~small]
    out[~small] = (
        4.0 / (15.0 * PI**6) * ((1.0 - PI**2 * zb) ** 2.5 - 1.0)
        + 2.0 / (3.0 * PI**4) * zb
        - zb**2 / (2.0 * PI**2)
    )
    return out if out.ndim else float(out)


def phi(z):
    """Rate function for ``z <= 0``."""
    za = np.asarray(z, dtype=float)
    if np.any(za > 0) or np.any(np.isnan(za)):
        raise ValueError("phi is defined for z <= 0 only")
    out = np.maximum(phi_extended(za), 0.0)
    return out if np.ndim(out) else float(out)


def scaled_rate(params: ModelParams) -> float:
    """``L (2L/beta)^5 Phi(-(beta/2L)^2 zeta)`` (positive; the limit is its negative)."""
    b, L, zeta = params.beta, params.L, params.zeta
    return L * (2 * L / b) ** 5 * phi(-((b / (2 * L)) ** 2) * zeta)


def v_star(x, params: ModelParams):
    """Optimal control ``4L^2 pi^-2 beta^-3/2 (sqrt(1 + (pi beta/2L)^2 (zeta - x)_+) - 1)``."""
    b, L = params.beta, params.L
    s = np.maximum(params.zeta - np.asarray(x, dtype=float), 0.0)
    a = (PI * b / (2 * L)) ** 2 * s
    # sqrt(1+a) - 1 written as a / (sqrt(1+a) + 1) to keep relative accuracy for small a
    out = 4 * L**2 / (PI**2 * b**1.5) * a / (np.sqrt(1 + a) + 1)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Control:
    """Piecewise-constant control: ``values[i]`` on ``[grid[i], grid[i+1])``, zero beyond."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
            raise ValueError("control grid must be strictly increasing with at least two points")
        if v.shape != (g.size - 1,):
            raise ValueError("control needs one value per cell")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, func: Callable, x_max: float, n_cells: int) -> "Control":
        """Sample ``func`` at cell midpoints of a uniform grid on ``[0, x_max]``."""
        g = np.linspace(0.0, x_max, n_cells + 1)
        return cls(g, np.asarray(func(0.5 * (g[1:] + g[:-1])), dtype=float))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.grid, x, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        return np.where(inside, self.values[np.clip(idx, 0, self.values.size - 1)], 0.0)


def _cell_objective(xl, xr, v, params: ModelParams):
    """Exact integral of the objective integrand over ``[xl, xr]`` for constant ``v``.

    The positive part is handled through the antiderivative of ``(c - x)_+^{3/2}``,
    which is continuous across the kink, so no splitting is needed.
    """
    sig, zeta = params.sigma, params.zeta
    k = 2 * params.L / (3 * PI) * 0.4
    hi = np.maximum(zeta - xl - sig * v, 0.0) ** 2.5
    lo = np.maximum(zeta - xr - sig * v, 0.0) ** 2.5
    return k * (hi - lo) + 0.5 * v * v * (xr - xl)


def objective(control: Control, params: ModelParams) -> float:
    g = control.grid
    if g[0] > 0 or g[-1] < params.zeta * (1 - 1e-12):
        raise ValueError(f"control grid [{g[0]}, {g[-1]}] does not cover [0, zeta={params.zeta}]")
    total = np.sum(_cell_objective(g[:-1], g[1:], control.values, params))
    # beyond the grid v = 0; the cost there vanishes once the grid covers zeta
    tail = 2 * params.L / (3 * PI) * 0.4 * max(params.zeta - g[-1], 0.0) ** 2.5
    return float(total + tail)


_GOLD = (math.sqrt(5) - 1) / 2


def minimize_objective(params: ModelParams, grid_size: int, tol: float = 1e-13, max_iter: int = 400) -> Control:
    """Brute-force discrete minimizer on a uniform grid over ``[0, zeta]``.

    For a piecewise-constant control the objective is a sum of independent
    convex cell terms, so each cell is minimized by golden-section search on
    ``[0, zeta sqrt(beta)/2]`` (beyond that bound the first term vanishes and
    the quadratic term only grows). All cells are searched at once.
    """
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    g = np.linspace(0.0, params.zeta, grid_size + 1)
    xl, xr = g[:-1], g[1:]
    lo = np.zeros(grid_size)
    hi = np.full(grid_size, params.zeta * math.sqrt(params.beta) / 2)
    f = lambda v: _cell_objective(xl, xr, v, params)
    width0 = max(hi[0] - lo[0], 1e-300)
    for _ in range(max_iter):
        if np.max(hi - lo) <= tol * width0:
            break
        # both interior points are re-evaluated each round; cells are cheap
        c = hi - _GOLD * (hi - lo)
        d = lo + _GOLD * (hi - lo)
        left = f(c) < f(d)
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
    else:
        raise RuntimeError(f"golden-section search did not converge, bracket width {np.max(hi - lo):.3e}")
    return Control(g, 0.5 * (lo + hi))


@dataclass(frozen=True)
class Partition:
    """Breakpoints ``0 = x_0 < x_1 < ... < x_m``; the last bucket is ``(x_m, inf)``."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or p.size < 1 or p[0] != 0 or np.any(np.diff(p) <= 0):
            raise ValueError("partition points must start at 0 and increase strictly")
        object.__setattr__(self, "points", p)

    @property
    def n_buckets(self) -> int:
        return self.points.size


def check_alpha(alpha: float) -> None:
    if not (-1.0 / 3.0 < alpha < 2.0 / 3.0):
        raise ValueError(f"alpha must lie in (-1/3, 2/3), got {alpha}")


def localization_partition(t: float, alpha: float, zeta: float) -> Partition:
    """``x_i = i t^alpha`` for ``i = 0..i_*`` with ``i_* = ceil(zeta t^{2/3 - alpha}) + 1``."""
    check_alpha(alpha)
    if not t > 0:
        raise ValueError("t must be positive")
    i_star = math.ceil(zeta * t ** (2.0 / 3.0 - alpha)) + 1
    return Partition(np.arange(i_star + 1) * t**alpha)


def tilt_profile(t: float, alpha: float, params: ModelParams) -> DriftProfile:
    """``V_i = t^{2/3} v_star(t^{-2/3} x_{i-1})`` on ``(x_{i-1}, x_i]``."""
    x = localization_partition(t, alpha, params.zeta).points
    levels = t ** (2.0 / 3.0) * v_star(t ** (-2.0 / 3.0) * x[:-1], params)
    return DriftProfile(x, np.asarray(levels, dtype=float))


def riemann_objective(t: float, alpha: float, params: ModelParams) -> tuple[float, float]:
    """Discrete counterparts of the two objective terms at scale ``t``.

    Returns ``(cost, energy)`` with
    ``cost = t^-2 sum_i t^{1/3} L (2|I|/3pi) (t^{2/3} zeta - x_i - sigma V_i)_+^{3/2}`` and
    ``energy = t^-2 * 1/2 sum_i V_i^2 |I|``. Their sum tends to ``scaled_rate``
    as ``t`` grows since both are Riemann sums of the objective at ``v_star``.
    """
    prof = tilt_profile(t, alpha, params)
    x = prof.breakpoints
    width = np.diff(x)
    gap = np.maximum(t ** (2.0 / 3.0) * params.zeta - x[1:] - params.sigma * prof.levels, 0.0)
    cost = t ** (1.0 / 3.0) * params.L * np.sum(2 * width / (3 * PI) * gap**1.5)
    energy = 0.5 * np.sum(prof.levels**2 * width)
    return float(cost / t**2), float(energy / t**2)


@dataclass(frozen=True)
class GaussianReduction:
    """One-interval reduction ``F(y) = (2L/3pi) t^{1/3+alpha} (r - sigma t^{-alpha/2} y)_+^{3/2} + y^2/2``.

    Here ``r = t^{2/3} zeta - x_i`` and ``sigma = 2/sqrt(beta)``.
    """

    params: ModelParams
    t: float
    alpha: float
    x_i: float

    @property
    def _r(self) -> float:
        return self.t ** (2.0 / 3.0) * self.params.zeta - self.x_i

    @property
    def _amp(self) -> float:
        return 2 * self.params.L / (3 * PI) * self.t ** (1.0 / 3.0 + self.alpha)

    @property
    def _slope(self) -> float:
        return self.params.sigma * self.t ** (-self.alpha / 2)

    def F(self, y):
        y = np.asarray(y, dtype=float)
        out = self._amp * np.maximum(self._r - self._slope * y, 0.0) ** 1.5 + 0.5 * y * y
        return out if out.ndim else float(out)

    def dF(self, y):
        y = np.asarray(y, dtype=float)
        out = -1.5 * self._amp * self._slope * np.sqrt(np.maximum(self._r - self._slope * y, 0.0)) + y
        return out if out.ndim else float(out)

    @property
    def y_kink(self) -> float:
        """Point where the positive part switches off."""
        return self._r / self._slope

    @property
    def y_star(self) -> float:
        xi = self.t ** (-2.0 / 3.0) * self.x_i
        return self.t ** (2.0 / 3.0 + self.alpha / 2) * v_star(xi, self.params)

    @property
    def F_min(self) -> float:
        return self.F(self.y_star)


def gaussian_reduction(params: ModelParams, t: float, alpha: float, x_i: float) -> tuple[float, float, GaussianReduction]:
    check_alpha(alpha)
    red = GaussianReduction(params, float(t), float(alpha), float(x_i))
    return red.y_star, red.F_min, red
