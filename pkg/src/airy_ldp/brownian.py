"""Discretized Brownian paths: sampling, drifting, mollification, Girsanov weights.

A path is stored as nodal values on a uniform grid ``x_j = j * step``. The
white noise ``B'`` is never formed; consumers work with increments.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

_REL_GRID_TOL = 1e-9


@dataclass(frozen=True)
class PathGrid:
    step: float
    length: float

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"grid step must be positive, got {self.step}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"grid length must be positive, got {self.length}")
        n_cells = round(self.length / self.step)
        if n_cells < 1:
            raise ValueError("grid must contain at least two nodes")
        if abs(n_cells * self.step - self.length) > _REL_GRID_TOL * self.length:
            raise ValueError(f"step {self.step} does not divide length {self.length}")

    @property
    def n_points(self) -> int:
        return round(self.length / self.step) + 1

    @property
    def n_cells(self) -> int:
        return self.n_points - 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_points) * self.step

    def index_of(self, x: float) -> int:
        """Index of the node at ``x``; raises if ``x`` is not a node."""
        j = round(x / self.step)
        if abs(j * self.step - x) > _REL_GRID_TOL * max(1.0, abs(x)) or not 0 <= j < self.n_points:
            raise ValueError(f"x = {x} is not a node of the grid (step {self.step}, length {self.length})")
        return j


@dataclass(frozen=True)
class DriftProfile:
    """Piecewise-constant drift: ``levels[i]`` on ``(breakpoints[i], breakpoints[i+1]]``, zero after."""

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        if bp.ndim != 1 or bp.size < 1:
            raise ValueError("breakpoints must be a non-empty 1-D array")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if lv.shape != (bp.size - 1,):
            raise ValueError("levels must have one entry per interval")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)

    @classmethod
    def zero(cls) -> "DriftProfile":
        return cls(np.array([0.0]), np.array([]))

    def cumulative(self, x) -> np.ndarray:
        """Exact ``int_0^x V(y) dy`` (piecewise linear in x)."""
        bp = self.breakpoints
        cum = np.concatenate([[0.0], np.cumsum(self.levels * np.diff(bp))])
        return np.interp(np.asarray(x, dtype=float), bp, cum)

    def energy(self) -> float:
        """``int V^2 dx``."""
        return float(np.sum(self.levels**2 * np.diff(self.breakpoints)))

    def is_zero(self) -> bool:
        return not np.any(self.levels)


@dataclass(frozen=True)
class BrownianPath:
    grid: PathGrid
    values: np.ndarray
    seed: Optional[int] = None
    drift_applied: Optional[DriftProfile] = None
    stream: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} values, got shape {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def step(self) -> float:
        return self.grid.step

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def value_at(self, x) -> np.ndarray:
        """Piecewise-linear interpolation of the nodal values."""
        return np.interp(np.asarray(x, dtype=float), self.grid.nodes, self.values)

    @classmethod
    def zero(cls, grid: PathGrid) -> "BrownianPath":
        return cls(grid, np.zeros(grid.n_points))

    @classmethod
    def from_function(cls, grid: PathGrid, func) -> "BrownianPath":
        return cls(grid, np.asarray(func(grid.nodes), dtype=float))


def make_rng(seed: int, stream: int = 0, *keys: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream, *keys)``; streams never overlap."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(stream), *map(int, keys)))
    return np.random.Generator(np.random.Philox(ss))


def sample_path(grid: PathGrid, seed: int, stream: int = 0) -> BrownianPath:
    rng = make_rng(seed, stream)
    values = np.empty(grid.n_points)
    values[0] = 0.0
    np.cumsum(rng.standard_normal(grid.n_cells) * math.sqrt(grid.step), out=values[1:])
    return BrownianPath(grid, values, seed=int(seed), stream=int(stream))


def add_drift(path: BrownianPath, drift: DriftProfile) -> BrownianPath:
    """Return ``B + int_0^. V``; breakpoints past the path end are clipped."""
    if drift.breakpoints[0] < 0:
        raise ValueError("drift breakpoints must start at or after 0")
    if drift.breakpoints[0] > path.grid.length:
        raise ValueError("drift profile starts beyond the path domain")
    values = path.values + drift.cumulative(path.grid.nodes)
    return BrownianPath(path.grid, values, seed=path.seed, drift_applied=drift, stream=path.stream)


def _bump(y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    inside = np.abs(y) < 1
    out[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2))
    return out


def mollify(path: BrownianPath, epsilon: float) -> BrownianPath:
    """Convolve with a C-infinity bump supported on (-epsilon, epsilon).

    The path is extended by reflection at both ends before the discrete
    convolution. With ``epsilon == step`` only the centre weight survives and
    the path is returned unchanged.
    """
    h = path.step
    if epsilon < h * (1 - 1e-12):
        raise ValueError(f"epsilon {epsilon} is below the grid step {h}")
    m = int(math.floor(epsilon / h + 1e-9))
    offsets = np.arange(-m, m + 1) * h
    w = _bump(offsets / epsilon)
    w /= w.sum()
    m_eff = int(np.max(np.nonzero(w)[0])) - m
    w = w[m - m_eff : m + m_eff + 1]
    if m_eff == 0:
        smoothed = path.values.copy()
    else:
        if m_eff >= path.grid.n_points:
            raise ValueError("epsilon exceeds the path domain")
        padded = np.pad(path.values, m_eff, mode="reflect")
        smoothed = np.convolve(padded, w[::-1], mode="valid")
    return BrownianPath(
        path.grid, smoothed, seed=path.seed, drift_applied=path.drift_applied,
        stream=path.stream, meta={**path.meta, "mollified": float(epsilon)},
    )


def increment_max(path: BrownianPath, a: float, b: float) -> float:
    """``max |B(x) - B(a)|`` over grid nodes in ``[a, b]``."""
    if not b > a:
        raise ValueError(f"empty or reversed interval [{a}, {b}]")
    if a < -1e-12 or b > path.grid.length * (1 + _REL_GRID_TOL):
        raise ValueError("interval outside the path domain")
    h = path.step
    lo = int(math.ceil(a / h - 1e-9))
    hi = int(math.floor(b / h + 1e-9))
    base = float(path.value_at(a))
    if hi < lo:
        return 0.0
    return float(np.max(np.abs(path.values[lo : hi + 1] - base)))


def girsanov_log_weight(path: BrownianPath, drift: DriftProfile) -> float:
    """``-sum_i V_i (B(x_i) - B(x_{i-1})) + 1/2 int V^2``.

    ``B`` at breakpoints is read off the piecewise-linear interpolant, which
    makes the stochastic sum exact for step integrands. Evaluated on a drifted
    path ``B~ + int V`` this is ``log dP/dQ``; evaluated on ``B~`` itself,
    ``exp(-weight)`` is the exponential martingale.
    """
    bp = drift.breakpoints
    if bp[-1] > path.grid.length * (1 + _REL_GRID_TOL):
        raise ValueError("drift profile extends beyond the path domain")
    if drift.is_zero():
        return 0.0
    jumps = np.diff(path.value_at(bp))
    return float(-np.dot(drift.levels, jumps) + 0.5 * drift.energy())


def cell_drift(path_grid: PathGrid, drift: DriftProfile) -> np.ndarray:
    """Drift mass ``int_{cell j} V`` for each grid cell."""
    return np.diff(drift.cumulative(path_grid.nodes))


def grid_log_weight(path: BrownianPath, drift: DriftProfile) -> float:
    """Exact Gaussian likelihood ratio of the grid increments.

    For a path whose increments are ``X_j = dB_j + d_j`` with ``d_j`` the drift
    mass of cell ``j``, this is ``log dP/dQ = sum(-X_j d_j + d_j^2 / 2) / h``.
    It differs from :func:`girsanov_log_weight` only through the quadratic term
    in cells that straddle a breakpoint (Jensen gap of order ``h``).
    """
    d = cell_drift(path.grid, drift)
    if not np.any(d):
        return 0.0
    return float(np.sum(-path.increments * d + 0.5 * d * d) / path.step)


def write_path_csv(path: BrownianPath, target) -> None:
    """Header row ``h,x_max,seed``, then one nodal value per row."""
    own = isinstance(target, (str, Path))
    fh = open(target, "w", newline="") if own else target
    try:
        w = csv.writer(fh)
        w.writerow(["h", "x_max", "seed"])
        w.writerow([f"{path.step:.17g}", f"{path.grid.length:.17g}", "" if path.seed is None else path.seed])
        w.writerow(["value"])
        for v in path.values:
            w.writerow([f"{v:.17g}"])
    finally:
        if own:
            fh.close()


def read_path_csv(source) -> BrownianPath:
    text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
    rows = list(csv.reader(io.StringIO(text)))
    h, x_max, seed = rows[1]
    values = np.array([float(r[0]) for r in rows[3:] if r])
    return BrownianPath(PathGrid(float(h), float(x_max)), values, seed=int(seed) if seed else None)
