"""Riccati explosion counting for the stochastic Airy and Hill operators.

The Riccati variable ``f = g'/g`` solves ``f' = c(x) - f^2 + sigma B'`` with
``c(x) = x - lam`` (AIRY) or ``c = -lam`` (FLAT) and ``sigma = 2/sqrt(beta)``.
Rather than integrate ``f`` through its blow-ups, the solver integrates the
linear pair ``(g, g')``:

* between grid nodes ``g'' = c g`` with ``c`` frozen at the cell midpoint,
  propagated exactly (power series / trig / hyperbolic form);
* at each interior node the noise acts as a kick ``g' += sigma * dW_j g`` with
  ``dW_j`` the average of the two adjacent path increments.

An explosion of ``f`` (to -inf, restart at +inf) is exactly a sign change of
``g``. Both pieces of the step map are monotone on the projective line, so
the comparison and ordering properties of the continuous flow hold exactly
for the discrete scheme as well. The initial value ``f(a) = +inf`` is the
state ``(g, g') = (0, 1)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numba as nb
import numpy as np

from .brownian import BrownianPath
from .rate import Partition

SAO_MARGIN = 10.0
MONITOR_WINDOW = 5.0
DEFAULT_M = 1e4


class PotentialKind(str, Enum):
    AIRY = "airy"
    FLAT = "flat"


class TailMonitorWarning(RuntimeWarning):
    """Explosions or a dip below -M were seen past the truncation point."""


# ----------------------------------------------------------------------------
# kernels


@nb.njit(cache=True, nogil=True)
def _propagator(c, tau):
    """Entries ``(C, S, cS)`` of the exact flow of ``g'' = c g`` over ``tau``."""
    a = c * tau * tau
    if abs(a) < 0.05:
        C = 1.0 + a * (1.0 / 2 + a * (1.0 / 24 + a * (1.0 / 720 + a * (1.0 / 40320 + a / 3628800.0))))
        S = tau * (1.0 + a * (1.0 / 6 + a * (1.0 / 120 + a * (1.0 / 5040 + a * (1.0 / 362880 + a / 39916800.0)))))
    elif c > 0:
        k = math.sqrt(c)
        C = math.cosh(k * tau)
        S = math.sinh(k * tau) / k
    else:
        k = math.sqrt(-c)
        C = math.cos(k * tau)
        S = math.sin(k * tau) / k
    return C, S, c * S


@nb.njit(cache=True, nogil=True)
def _crossing_fraction(g, dg, c, h):
    """Fraction of the cell at which ``g`` vanishes (secant start, Newton polish)."""
    C, S, cS = _propagator(c, h)
    g1 = C * g + S * dg
    frac = g / (g - g1) if g != g1 else 1.0
    for _ in range(3):
        tau = frac * h
        C, S, cS = _propagator(c, tau)
        gv = C * g + S * dg
        dv = cS * g + C * dg
        if dv == 0.0:
            break
        step = gv / dv / h
        frac -= step
        if abs(step) < 1e-14:
            break
    return min(max(frac, 1e-15), 1.0)


@nb.njit(cache=True, nogil=True)
def riccati_core(incr, i0, n_main, n_monitor, h, sigma, lam, airy, g, dg,
                 times, cells, node_cnt, node_val, M):
    """Integrate ``n_main + n_monitor`` cells starting at node ``i0``.

    ``incr[j]`` is the path increment over cell ``j``. Explosion times/cells
    are written to ``times``/``cells`` when those arrays are non-empty, and the
    per-node (count, f) state for the first ``n_main`` cells to
    ``node_cnt``/``node_val`` when non-empty.

    Returns ``(count_main, count_monitor, g, dg, min_f_monitor, status)`` with
    status 0 on success and 1 if a non-finite value appeared.
    """
    n_total = n_main + n_monitor
    rec_t = times.shape[0] > 0
    rec_n = node_cnt.shape[0] > 0
    count_main = 0
    count_mon = 0
    min_f = np.inf
    sign = 1.0 if (g > 0.0 or (g == 0.0 and dg > 0.0)) else -1.0
    half_sigma = 0.5 * sigma
    Cf, Sf, cSf = _propagator(-lam, h)
    if rec_n:
        node_cnt[0] = 0
        node_val[0] = dg / g if g != 0.0 else np.inf
    for j in range(n_total):
        ci = i0 + j
        if j > 0:
            dg += half_sigma * (incr[ci - 1] + incr[ci]) * g
        if airy:
            c = (ci + 0.5) * h - lam
            C, S, cS = _propagator(c, h)
        else:
            c = -lam
            C, S, cS = Cf, Sf, cSf
        gn = C * g + S * dg
        dgn = cS * g + C * dg
        crossed = False
        if gn == 0.0:
            crossed = True
            new_sign = 1.0 if dgn > 0.0 else -1.0
        elif (gn > 0.0) != (sign > 0.0):
            crossed = True
            new_sign = -sign
        if crossed:
            total = count_main + count_mon
            if rec_t and total < times.shape[0]:
                frac = _crossing_fraction(g, dg, c, h) if g != 0.0 else 1.0
                times[total] = (ci + frac) * h
                cells[total] = ci
            if j < n_main:
                count_main += 1
            else:
                count_mon += 1
            sign = new_sign
        g, dg = gn, dgn
        if not (math.isfinite(g) and math.isfinite(dg)):
            return count_main, count_mon, g, dg, min_f, 1
        mag = abs(g) + abs(dg)
        if mag > 1e100 or mag < 1e-100:
            g /= mag
            dg /= mag
        if j >= n_main:
            if g != 0.0:
                f = dg / g
                if f < min_f:
                    min_f = f
        elif rec_n:
            node_cnt[j + 1] = count_main
            node_val[j + 1] = dg / g if g != 0.0 else np.inf
    return count_main, count_mon, g, dg, min_f, 0


_EMPTY_F = np.empty(0)
_EMPTY_I = np.empty(0, dtype=np.int64)


@nb.njit(cache=True, nogil=True)
def sao_counts_kernel(incr, h, sigma, lams, margin, n_monitor, M, out_counts, out_flags):
    """``count_sao`` for each entry of ``lams`` on one path (no recording)."""
    empty_f = np.empty(0)
    empty_i = np.empty(0, dtype=np.int64)
    for k in range(lams.shape[0]):
        lam = lams[k]
        n_main = int(math.ceil((max(lam, 0.0) + margin) / h - 1e-9))
        cm, cmon, g, dg, min_f, status = riccati_core(
            incr, 0, n_main, n_monitor, h, sigma, lam, True, 0.0, 1.0,
            empty_f, empty_i, empty_i, empty_f, M)
        out_counts[k] = cm + cmon
        flag = 0
        if cmon > 0 or min_f < -M:
            flag |= 1
        if status != 0:
            flag |= 2
        out_flags[k] = flag


@nb.njit(cache=True, nogil=True)
def hill_counts_kernel(incr, i0, n_cells, h, sigma, lams, out_counts):
    """Dirichlet-start FLAT counts on cells ``i0 .. i0+n_cells-1`` for each lambda."""
    empty_f = np.empty(0)
    empty_i = np.empty(0, dtype=np.int64)
    for k in range(lams.shape[0]):
        cm, cmon, g, dg, min_f, status = riccati_core(
            incr, i0, n_cells, 0, h, sigma, lams[k], False, 0.0, 1.0,
            empty_f, empty_i, empty_i, empty_f, np.inf)
        out_counts[k] = cm if status == 0 else -1


# ----------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class RiccatiConfig:
    beta: float
    lam: float
    potential_kind: PotentialKind = PotentialKind.AIRY
    interval: Optional[tuple[float, float]] = None
    initial_value: float = math.inf
    M: float = DEFAULT_M
    step: Optional[float] = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.M >= 100:
            raise ValueError("explosion threshold M must be at least 100")
        if math.isnan(self.initial_value) or self.initial_value == -math.inf:
            raise ValueError("initial value must be finite or +inf")
        object.__setattr__(self, "potential_kind", PotentialKind(self.potential_kind))

    @property
    def sigma(self) -> float:
        return 2.0 / math.sqrt(self.beta)


@dataclass(frozen=True)
class RiccatiTrace:
    explosion_times: np.ndarray
    count: int
    terminal_value: float
    lam: float
    explosion_cells: np.ndarray
    node_counts: Optional[np.ndarray] = None
    node_values: Optional[np.ndarray] = None
    node_x: Optional[np.ndarray] = None

    def states(self) -> list[tuple[int, float]]:
        """Lexicographic states ``(-explosions so far, f)`` at every node."""
        if self.node_counts is None:
            raise ValueError("trace was solved without record_nodes=True")
        return list(zip((-self.node_counts).tolist(), self.node_values.tolist()))


def _check_resolution(h: float, lam_max: float) -> None:
    # at most one sign change of g per cell requires h * sqrt(lam) well below pi
    if h * math.sqrt(max(lam_max, 0.0)) >= math.pi / 2:
        raise ValueError(f"step {h} too coarse for lambda {lam_max}: need h*sqrt(lambda) < pi/2")


def _node_range(path: BrownianPath, a: float, b: float) -> tuple[int, int]:
    if not b > a:
        raise ValueError(f"empty or reversed interval ({a}, {b}]")
    ia = path.grid.index_of(a)
    ib = path.grid.index_of(b)
    return ia, ib


def _initial_state(f0: float) -> tuple[float, float]:
    return (0.0, 1.0) if f0 == math.inf else (1.0, float(f0))


def solve_riccati(path: BrownianPath, config: RiccatiConfig, record_nodes: bool = False) -> RiccatiTrace:
    """Integrate over ``config.interval`` and record each explosion time."""
    h = path.step
    if config.step is not None and abs(config.step - h) > 1e-12 * h:
        raise ValueError("the solver steps on the path grid; config.step must equal the path step")
    a, b = config.interval if config.interval is not None else (0.0, path.grid.length)
    ia, ib = _node_range(path, a, b)
    airy = config.potential_kind is PotentialKind.AIRY
    lam_max = config.lam - (ia * h if airy else 0.0)
    _check_resolution(h, lam_max)
    n = ib - ia
    times = np.empty(n)
    cells = np.empty(n, dtype=np.int64)
    node_cnt = np.empty(n + 1, dtype=np.int64) if record_nodes else _EMPTY_I
    node_val = np.empty(n + 1) if record_nodes else _EMPTY_F
    g, dg = _initial_state(config.initial_value)
    cm, _, g, dg, _, status = riccati_core(
        np.ascontiguousarray(path.increments), ia, n, 0, h, config.sigma, float(config.lam), airy,
        g, dg, times, cells, node_cnt, node_val, config.M)
    if status != 0:
        raise FloatingPointError(f"Riccati integration produced a non-finite value before x = {b}")
    terminal = dg / g if g != 0.0 else math.inf
    return RiccatiTrace(
        explosion_times=times[:cm].copy(), count=int(cm), terminal_value=float(terminal),
        lam=float(config.lam), explosion_cells=cells[:cm].copy(),
        node_counts=node_cnt if record_nodes else None,
        node_values=node_val if record_nodes else None,
        node_x=np.arange(ia, ib + 1) * h if record_nodes else None,
    )


def sao_cells(lam: float, h: float, margin: float = SAO_MARGIN) -> int:
    """Number of cells up to ``x_stop(lam) = max(lam, 0) + margin``."""
    return int(math.ceil((max(lam, 0.0) + margin) / h - 1e-9))


def required_length(lam_max: float, margin: float = SAO_MARGIN, monitor: float = MONITOR_WINDOW) -> float:
    """Path length needed for SAO counts up to ``lam_max``."""
    return max(lam_max, 0.0) + margin + monitor


def _sao_scan(path: BrownianPath, beta: float, lams: np.ndarray, M: float = DEFAULT_M):
    h = path.step
    lams = np.ascontiguousarray(lams, dtype=float)
    if lams.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    lam_max = float(np.max(lams))
    _check_resolution(h, lam_max)
    n_mon = int(math.ceil(MONITOR_WINDOW / h - 1e-9))
    if sao_cells(lam_max, h) + n_mon > path.grid.n_cells:
        raise ValueError(
            f"path too short: counting up to lambda = {lam_max} needs length "
            f"{required_length(lam_max)}, path has {path.grid.length}")
    counts = np.empty(lams.size, dtype=np.int64)
    flags = np.empty(lams.size, dtype=np.int64)
    sao_counts_kernel(np.ascontiguousarray(path.increments), h, 2.0 / math.sqrt(beta), lams,
                      SAO_MARGIN, n_mon, M, counts, flags)
    if np.any(flags & 2):
        raise FloatingPointError("Riccati integration produced a non-finite value")
    return counts, flags


def count_sao(path: BrownianPath, beta: float, lam: float, return_flag: bool = False):
    """Number of SAO eigenvalues ``<= lam`` (explosions on ``[0, x_stop + monitor]``)."""
    counts, flags = _sao_scan(path, beta, np.array([float(lam)]))
    flagged = bool(flags[0])
    if return_flag:
        return int(counts[0]), flagged
    if flagged:
        warnings.warn(f"tail monitor triggered at lambda = {lam}", TailMonitorWarning, stacklevel=2)
    return int(counts[0])


def count_hill(path: BrownianPath, beta: float, lam: float, interval: tuple[float, float]) -> int:
    """Dirichlet Hill-operator count on ``(a, b]`` (FLAT solve from ``f(a) = +inf``)."""
    return int(count_hill_many(path, beta, np.array([float(lam)]), interval)[0])


def count_hill_many(path: BrownianPath, beta: float, lams, interval: tuple[float, float]) -> np.ndarray:
    lams = np.ascontiguousarray(np.atleast_1d(lams), dtype=float)
    h = path.step
    ia, ib = _node_range(path, *interval)
    _check_resolution(h, float(np.max(lams)))
    out = np.empty(lams.size, dtype=np.int64)
    hill_counts_kernel(np.ascontiguousarray(path.increments), ia, ib - ia, h, 2.0 / math.sqrt(beta), lams, out)
    if np.any(out < 0):
        raise FloatingPointError("Riccati integration produced a non-finite value")
    return out


def snap_partition(partition: Partition, h: float) -> Partition:
    """Round partition points to grid nodes (needed for coupled Hill solves)."""
    idx = np.unique(np.round(partition.points / h).astype(np.int64))
    return Partition(idx * h)


def localized_counts(path: BrownianPath, beta: float, lam: float, partition: Partition,
                     return_flag: bool = False):
    """Explosions of one SAO solve bucketed by ``(x_{i-1}, x_i]`` plus a final ``(x_m, inf)`` bucket.

    Bucketing uses the grid cell in which each explosion happens, so partition
    points must be grid nodes (see :func:`snap_partition`).
    """
    h = path.step
    _check_resolution(h, lam)
    n_mon = int(math.ceil(MONITOR_WINDOW / h - 1e-9))
    n_main = sao_cells(lam, h)
    if n_main + n_mon > path.grid.n_cells:
        raise ValueError("path too short for this lambda")
    node_idx = np.array([path.grid.index_of(p) for p in partition.points], dtype=np.int64)
    n_total = n_main + n_mon
    times = np.empty(n_total)
    cells = np.empty(n_total, dtype=np.int64)
    cm, cmon, _, _, min_f, status = riccati_core(
        np.ascontiguousarray(path.increments), 0, n_main, n_mon, h, 2.0 / math.sqrt(beta), float(lam), True,
        0.0, 1.0, times, cells, _EMPTY_I, _EMPTY_F, DEFAULT_M)
    if status != 0:
        raise FloatingPointError("Riccati integration produced a non-finite value")
    cells = cells[: cm + cmon]
    # cell c lies in (x_c, x_{c+1}]; it belongs to bucket i when node_idx[i-1] <= c < node_idx[i]
    buckets = np.bincount(np.searchsorted(node_idx, cells, side="right") - 1, minlength=partition.n_buckets)
    flagged = bool(cmon > 0 or min_f < -DEFAULT_M)
    if return_flag:
        return buckets, flagged
    if flagged:
        warnings.warn(f"tail monitor triggered at lambda = {lam}", TailMonitorWarning, stacklevel=2)
    return buckets


def monotone_lambda_scan(path: BrownianPath, beta: float, lambdas: Sequence[float], return_flags: bool = False):
    """``count_sao`` on an ascending grid of ``lambda`` values for one path."""
    lams = np.asarray(lambdas, dtype=float)
    if lams.ndim != 1 or np.any(np.diff(lams) < 0):
        raise ValueError("lambdas must be a sorted 1-D array")
    counts, flags = _sao_scan(path, beta, lams)
    if np.any(np.diff(counts) < 0):
        # cannot happen for the exact discrete flow unless the truncation was too short
        flags = flags | np.concatenate([[0], (np.diff(counts) < 0).astype(np.int64)])
    if return_flags:
        return counts, flags.astype(bool)
    if np.any(flags):
        warnings.warn("tail monitor triggered during lambda scan", TailMonitorWarning, stacklevel=2)
    return counts


def write_traces_csv(traces: Sequence[RiccatiTrace], target) -> None:
    """Rows ``lambda,explosion_time`` followed by one summary comment line."""
    import csv
    from pathlib import Path

    own = isinstance(target, (str, Path))
    fh = open(target, "w", newline="") if own else target
    try:
        w = csv.writer(fh)
        w.writerow(["lambda", "explosion_time"])
        for tr in traces:
            for x in tr.explosion_times:
                w.writerow([f"{tr.lam:.17g}", f"{x:.17g}"])
        total = sum(tr.count for tr in traces)
        fh.write(f"# summary: n_lambda={len(traces)} total_explosions={total} "
                 f"counts={';'.join(str(tr.count) for tr in traces)}\n")
    finally:
        if own:
            fh.close()
