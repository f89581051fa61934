"""Monte Carlo estimation of ``G = E[exp(-L sum_k w_t(lambda_k - t^{2/3} zeta))]``.

``lambda_k`` are the eigenvalues of the stochastic Airy operator. The sum over
eigenvalues is evaluated from Riccati explosion counts,

    sum_k w_t(lambda_k - s) = -int N(mu + s) w_t'(mu) d mu,     s = t^{2/3} zeta,

on a coarse ``mu`` grid whose jump cells are bisected until each cell's
share of the integral is below ``jump_tol``. The tilted estimator samples
``B = B~ + int V`` with the piecewise-constant drift of
:func:`airy_ldp.rate.tilt_profile` and reweights by the exact likelihood
ratio of the grid increments.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from . import cost
from .brownian import (BrownianPath, DriftProfile, PathGrid, add_drift, grid_log_weight, make_rng,
                       sample_path)
from .oracle import discretize, truncated_eigensum
from .rate import ModelParams, check_alpha, localization_partition, scaled_rate, tilt_profile
from .riccati import MONITOR_WINDOW, SAO_MARGIN, _check_resolution, riccati_core, sao_counts_kernel

import numba as nb


class Mode(str, Enum):
    PLAIN = "plain"
    TILTED = "tilted"


@dataclass(frozen=True)
class Quadrature:
    """Window ``[lo, hi]`` for the centred variable ``mu = lambda - t^{2/3} zeta``.

    ``None`` entries are filled from ``t``: ``lo`` starts at ``lambda = -6``
    and is pushed down until the count vanishes; ``hi = 15 t^{-1/3}``.
    """

    lo: Optional[float] = None
    hi: Optional[float] = None
    n_nodes: int = 32

    def __post_init__(self):
        if self.n_nodes < 16:
            raise ValueError("n_nodes must be at least 16")
        if self.lo is not None and self.hi is not None and not self.lo < self.hi:
            raise ValueError("quadrature needs lo < hi")


@dataclass(frozen=True)
class EstimatorConfig:
    params: ModelParams = field(default_factory=ModelParams)
    t: float = 1.0
    alpha: float = 1.0 / 6.0
    n_samples: int = 1000
    mode: Mode = Mode.TILTED
    lambda_quadrature: Quadrature = field(default_factory=Quadrature)
    riccati_step: float = 0.01
    seed: int = 0
    threads: int = 1
    jump_tol: float = 5e-5

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.t > 0:
            raise ValueError("t must be positive")
        check_alpha(self.alpha)
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if not self.riccati_step > 0:
            raise ValueError("riccati_step must be positive")
        if not self.jump_tol > 0:
            raise ValueError("jump_tol must be positive")

    @property
    def shift(self) -> float:
        return self.t ** (2.0 / 3.0) * self.params.zeta

    @property
    def mu_lo(self) -> float:
        q = self.lambda_quadrature
        return q.lo if q.lo is not None else -6.0 - self.shift

    @property
    def mu_hi(self) -> float:
        q = self.lambda_quadrature
        return q.hi if q.hi is not None else 15.0 * self.t ** (-1.0 / 3.0)

    def path_grid(self) -> PathGrid:
        h = self.riccati_step
        lam_max = self.mu_hi + self.shift
        length = max(lam_max, 0.0) + SAO_MARGIN + MONITOR_WINDOW + 2 * h
        return PathGrid(h, h * math.ceil(length / h))

    def drift(self) -> DriftProfile:
        if self.mode is Mode.PLAIN:
            return DriftProfile.zero()
        return tilt_profile(self.t, self.alpha, self.params)


@dataclass
class StatisticResult:
    value: float
    flags: int = 0
    n_solves: int = 0
    mu_lo: float = 0.0
    count_hi: int = 0


FLAG_TAIL = 1
FLAG_NONFINITE = 2
FLAG_LO = 4
FLAG_UNSORTED = 8


@nb.njit(cache=True, nogil=True)
def _counts_no_monitor(incr, h, sigma, lams, margin, out):
    empty_f = np.empty(0)
    empty_i = np.empty(0, dtype=np.int64)
    for k in range(lams.shape[0]):
        lam = lams[k]
        n_main = int(math.ceil((max(lam, 0.0) + margin) / h - 1e-9))
        cm, cmon, g, dg, min_f, status = riccati_core(
            incr, 0, n_main, 0, h, sigma, lam, True, 0.0, 1.0, empty_f, empty_i, empty_i, empty_f, np.inf)
        out[k] = cm if status == 0 else -1


class _Counter:
    """SAO counts ``N(mu + s)`` for one path; the coarse scan runs the tail monitor."""

    def __init__(self, path: BrownianPath, beta: float, shift: float):
        self.incr = np.ascontiguousarray(path.increments)
        self.h = path.step
        self.sigma = 2.0 / math.sqrt(beta)
        self.shift = shift
        self.n_solves = 0
        self.flags = 0
        self.n_mon = int(math.ceil(MONITOR_WINDOW / self.h - 1e-9))

    def monitored(self, mu: np.ndarray) -> np.ndarray:
        lams = np.ascontiguousarray(mu + self.shift)
        counts = np.empty(lams.size, dtype=np.int64)
        flags = np.empty(lams.size, dtype=np.int64)
        sao_counts_kernel(self.incr, self.h, self.sigma, lams, SAO_MARGIN, self.n_mon, 1e4, counts, flags)
        self.n_solves += lams.size
        if np.any(flags & 1):
            self.flags |= FLAG_TAIL
        if np.any(flags & 2):
            self.flags |= FLAG_NONFINITE
        return counts

    def plain(self, mu: np.ndarray) -> np.ndarray:
        lams = np.ascontiguousarray(mu + self.shift)
        out = np.empty(lams.size, dtype=np.int64)
        _counts_no_monitor(self.incr, self.h, self.sigma, lams, SAO_MARGIN, out)
        self.n_solves += lams.size
        if np.any(out < 0):
            self.flags |= FLAG_NONFINITE
        return out


def _statistic(path: BrownianPath, config: EstimatorConfig) -> StatisticResult:
    t, s = config.t, config.shift
    hi = config.mu_hi
    lo = config.mu_lo
    n_nodes = config.lambda_quadrature.n_nodes
    counter = _Counter(path, config.params.beta, s)
    # push lo down until the count vanishes there
    c_lo = counter.plain(np.array([lo]))[0]
    tries = 0
    while c_lo > 0 and tries < 20:
        lo -= 5.0 + (hi - lo)
        c_lo = counter.plain(np.array([lo]))[0]
        tries += 1
    flags = 0 if c_lo == 0 else FLAG_LO
    mu = np.linspace(lo, hi, n_nodes)
    counts = counter.monitored(mu)
    if np.any(np.diff(counts) < 0):
        flags |= FLAG_UNSORTED
    # active jump cells: (a, b, N(a), N(b))
    jumps = np.nonzero(np.diff(counts) > 0)[0]
    a = mu[jumps]
    b = mu[jumps + 1]
    na = counts[jumps].astype(float)
    nb_ = counts[jumps + 1].astype(float)
    done_a, done_b, done_dn = [], [], []
    tol = config.jump_tol
    for _ in range(64):
        if a.size == 0:
            break
        share = (nb_ - na) * (cost.w_t(a, t) - cost.w_t(b, t))
        fine = share <= tol
        done_a.append(a[fine])
        done_b.append(b[fine])
        done_dn.append((nb_ - na)[fine])
        a, b, na, nb_ = a[~fine], b[~fine], na[~fine], nb_[~fine]
        if a.size == 0:
            break
        m = 0.5 * (a + b)
        nm = counter.plain(m).astype(float)
        nm = np.clip(nm, na, nb_)
        left = nm > na
        right = nb_ > nm
        a = np.concatenate([a[left], m[right]])
        b = np.concatenate([m[left], b[right]])
        na, nb_ = np.concatenate([na[left], nm[right]]), np.concatenate([nm[left], nb_[right]])
    if a.size:
        done_a.append(a)
        done_b.append(b)
        done_dn.append(nb_ - na)
    if done_a:
        aa = np.concatenate(done_a)
        bb = np.concatenate(done_b)
        dn = np.concatenate(done_dn)
        value = float(np.sum(dn * cost.w_t(0.5 * (aa + bb), t)))
    else:
        value = 0.0
    # eigenvalues below lo: none (verified); at lo itself the count is already included
    value += float(counts[0]) * float(cost.w_t(lo, t))
    return StatisticResult(value, flags | counter.flags, counter.n_solves, lo, int(counts[-1]))


def spectral_statistic(path: BrownianPath, config: EstimatorConfig, detail: bool = False):
    """``sum_k w_t(lambda_k - t^{2/3} zeta)`` over eigenvalues up to ``hi + t^{2/3} zeta``."""
    need = config.mu_hi + config.shift
    _check_resolution(path.step, need - min(0.0, config.mu_lo))
    if path.grid.length < max(need, 0.0) + SAO_MARGIN + MONITOR_WINDOW:
        raise ValueError(f"path of length {path.grid.length} too short for lambda up to {need}")
    res = _statistic(path, config)
    return res if detail else res.value


def weyl_tail_estimate(config: EstimatorConfig) -> float:
    """Expected contribution of eigenvalues above the window, from the Weyl density ``sqrt(lambda)/pi``.

    Used as a reported remainder, not added to the statistic.
    """
    t, s = config.t, config.shift
    f = lambda mu: math.sqrt(max(mu + s, 0.0)) / math.pi * cost.w_t(mu, t)
    val, _ = integrate.quad(f, config.mu_hi, np.inf, limit=200)
    return float(val)


@dataclass
class MomentReport:
    log_estimate: float
    std_error_log: float
    n_samples: int
    per_sample_log_terms: np.ndarray
    normalized: float
    ess: float
    mode: Mode
    t: float
    log_weights: Optional[np.ndarray] = None
    statistics: Optional[np.ndarray] = None
    flags: list = field(default_factory=list)
    n_flagged_samples: int = 0
    tail_estimate: float = 0.0

    @property
    def reliable(self) -> bool:
        return not self.flags

    def summary(self) -> dict:
        return {
            "mode": self.mode.value, "t": self.t, "n": self.n_samples, "log_G": self.log_estimate,
            "t2_log_G": self.normalized, "stderr": self.std_error_log, "ess": self.ess,
            "flags": list(self.flags), "n_flagged_samples": self.n_flagged_samples,
            "tail_estimate": self.tail_estimate,
        }


def aggregate_log_mean(log_terms: np.ndarray) -> tuple[float, float]:
    """``log mean exp(log_terms)`` and its delta-method standard error (max-shifted throughout)."""
    lt = np.asarray(log_terms, dtype=float)
    n = lt.size
    if n == 0 or not np.any(np.isfinite(lt)):
        return -math.inf, math.nan
    m = np.max(lt)
    w = np.exp(lt - m)
    mean = float(np.mean(w))
    log_est = m + math.log(mean)
    if n < 2:
        return log_est, math.nan
    se = float(np.std(w, ddof=1)) / math.sqrt(n) / mean
    return log_est, se


def effective_sample_size(log_weights: np.ndarray) -> float:
    lw = np.asarray(log_weights, dtype=float)
    return float(np.exp(2 * logsumexp(lw) - logsumexp(2 * lw)))


def _sample_terms(config: EstimatorConfig, indices: np.ndarray, drift: DriftProfile, grid: PathGrid):
    L = config.params.L
    out_terms = np.empty(indices.size)
    out_lw = np.empty(indices.size)
    out_stat = np.empty(indices.size)
    out_flags = np.empty(indices.size, dtype=np.int64)
    tilted = not drift.is_zero()
    for k, i in enumerate(indices):
        path = sample_path(grid, config.seed, int(i))
        lw = 0.0
        if tilted:
            path = add_drift(path, drift)
            lw = grid_log_weight(path, drift)
        res = _statistic(path, config)
        out_stat[k] = res.value
        out_lw[k] = lw
        out_terms[k] = lw - L * res.value
        out_flags[k] = res.flags
    return out_terms, out_lw, out_stat, out_flags


def _run(config: EstimatorConfig) -> MomentReport:
    grid = config.path_grid()
    _check_resolution(grid.step, config.mu_hi + config.shift + 5.0 + config.shift)
    drift = config.drift()
    n = config.n_samples
    idx = np.arange(n)
    threads = max(1, int(config.threads))
    if threads == 1 or n < 2 * threads:
        terms, lw, stat, flags = _sample_terms(config, idx, drift, grid)
    else:
        chunks = np.array_split(idx, threads * 4)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda c: _sample_terms(config, c, drift, grid), chunks))
        terms, lw, stat, flags = (np.concatenate([p[j] for p in parts]) for j in range(4))
    log_est, se = aggregate_log_mean(terms)
    report_flags = []
    if n < 2:
        report_flags.append("std_error_undefined")
    if not math.isfinite(log_est):
        report_flags.append("all_samples_underflow")
    n_flagged = int(np.count_nonzero(flags))
    if n_flagged:
        report_flags.append(f"statistic_flags:{n_flagged}")
    ess = effective_sample_size(lw) if config.mode is Mode.TILTED else float(n)
    if config.mode is Mode.TILTED and ess < 10:
        report_flags.append("low_ess")
    return MomentReport(
        log_estimate=log_est, std_error_log=se, n_samples=n, per_sample_log_terms=terms,
        normalized=log_est / config.t**2, ess=ess, mode=config.mode, t=config.t,
        log_weights=lw, statistics=stat, flags=report_flags, n_flagged_samples=n_flagged,
        tail_estimate=weyl_tail_estimate(config),
    )


def estimate_plain(config: EstimatorConfig) -> MomentReport:
    return _run(replace(config, mode=Mode.PLAIN))


def estimate_tilted(config: EstimatorConfig) -> MomentReport:
    return _run(replace(config, mode=Mode.TILTED))


def estimate(config: EstimatorConfig) -> MomentReport:
    return _run(config)


def convergence_scan(configs: Sequence[EstimatorConfig]) -> list[dict]:
    """One tilted estimate per config (ascending ``t``); rows carry the LDP target."""
    ts = [c.t for c in configs]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("configs must have strictly increasing t")
    rows = []
    for c in configs:
        rep = estimate_tilted(c)
        p = c.params
        rows.append({
            "t": c.t, "alpha": c.alpha, "beta": p.beta, "L": p.L, "zeta": p.zeta, "mode": rep.mode.value,
            "n": rep.n_samples, "log_G": rep.log_estimate, "t2_log_G": rep.normalized,
            "stderr": rep.std_error_log, "ess": rep.ess, "target": -scaled_rate(p),
            "flags": ";".join(rep.flags),
        })
    return rows


@dataclass
class DiagnosticReport:
    value: float
    std_error: float
    per_interval_log: np.ndarray
    joint_log: float
    shuffled_joint_log: float
    joint_std_error: float
    shuffled_std_error: float


def lower_bound_diagnostic(config: EstimatorConfig, h: Optional[float] = None,
                           shuffle_seed: int = 1) -> DiagnosticReport:
    """``t^-2 sum_i log E[exp(-t^{1/3} L sum_n (t^{2/3} zeta - x_i - lambda_n(H_{I_i}))_+)]``.

    Each interval ``I_i = (x_{i-1}, x_i]``, ``i = 1..i_*``, gets its own
    independent Dirichlet Hill samples (the law only depends on ``|I_i|``).
    Also returns the joint estimate ``log E[prod_i ...]`` under the original
    and a shuffled pairing of per-interval samples.
    """
    t, L, beta = config.t, config.params.L, config.params.beta
    n = config.n_samples
    part = localization_partition(t, config.alpha, config.params.zeta).points
    width = t**config.alpha
    step = config.riccati_step if h is None else h
    n_cells = max(4, round(width / step))
    grid = PathGrid(width / n_cells, width)
    tau = t ** (1.0 / 3.0)
    logs = np.empty((part.size - 1, n))
    for i in range(1, part.size):
        r = config.shift - part[i]
        for j in range(n):
            rng = make_rng(config.seed, j, i, 7)
            vals = np.concatenate([[0.0], np.cumsum(rng.standard_normal(grid.n_cells) * math.sqrt(grid.step))])
            path = BrownianPath(grid, vals)
            op = discretize(path, beta, (0.0, width), grid.step)
            logs[i - 1, j] = -tau * L * truncated_eigensum(op, r)
    per = np.array([aggregate_log_mean(row)[0] for row in logs])
    ses = np.array([aggregate_log_mean(row)[1] for row in logs])
    joint, joint_se = aggregate_log_mean(np.sum(logs, axis=0))
    rng = np.random.default_rng(shuffle_seed)
    shuffled = np.stack([rng.permutation(row) for row in logs])
    sh, sh_se = aggregate_log_mean(np.sum(shuffled, axis=0))
    return DiagnosticReport(
        value=float(np.sum(per)) / t**2, std_error=float(np.sqrt(np.nansum(ses**2))) / t**2,
        per_interval_log=per, joint_log=joint, shuffled_joint_log=sh,
        joint_std_error=joint_se, shuffled_std_error=sh_se,
    )


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
