"""Finite-difference spectral oracle for Hill, Airy and Laplace operators.

All three boundary conditions come from one quadratic form on the vertex grid
``x_j = a + j h``:

    Q(u) = sum_cells (u_{j+1} - u_j)^2 / h + sum_j m_j p_j u_j^2

with lumped masses ``m_j = h`` (``h/2`` at the two ends) and the white-noise
potential lumped to nodes, ``m_j p_j = sigma/2 * (J_{j+1} - J_{j-1})``, i.e.
half of each adjacent cell increment. Neumann uses every node, periodic
identifies the two end nodes and Dirichlet removes them. The form domains are
nested exactly as in the continuum, so Dirichlet/periodic interlacing and the
Neumann <= periodic <= Dirichlet ordering hold exactly for the matrices, and
inserting discrete Fourier vectors into the periodic form reproduces the
potential average ``sigma * (J(b) - J(a)) / l`` exactly.

Counting uses LDL^T inertia (Sturm sequence); the periodic corner is handled
by bordering the open chain. Eigenvalues come from bisection on the count and
a Rayleigh-quotient polish from inverse iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numba as nb
import numpy as np

from .brownian import BrownianPath, mollify

SQRT2 = math.sqrt(2.0)


class BC(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    PERIODIC = "periodic"


class LinearTerm(str, Enum):
    NONE = "none"
    X = "x"


# ----------------------------------------------------------------------------
# kernels


@nb.njit(cache=True, nogil=True)
def _count_open(d, e, lam):
    """Negative pivots of ``T - lam`` for an open tridiagonal chain; -1 on a zero pivot."""
    n = d.shape[0]
    q = d[0] - lam
    if q == 0.0:
        return -1
    cnt = 1 if q < 0.0 else 0
    for j in range(1, n):
        q = d[j] - lam - e[j - 1] * e[j - 1] / q
        if q == 0.0:
            return -1
        if q < 0.0:
            cnt += 1
    return cnt


@nb.njit(cache=True, nogil=True)
def _count_periodic(d, e, corner, lam):
    """Inertia of the cyclic matrix through the bordered (Schur complement) form.

    With ``A11`` the leading open chain and border ``b`` (corner at the top,
    last off-diagonal at the bottom), the count is the negative pivots of
    ``A11 - lam`` plus one if ``a - lam - b^T (A11 - lam)^{-1} b < 0``.
    """
    n = d.shape[0]
    m = n - 1
    q = d[0] - lam
    if q == 0.0:
        return -1
    cnt = 1 if q < 0.0 else 0
    z = corner + (e[0] if m == 1 else 0.0)
    quad = z * z / q
    for j in range(1, m):
        l = e[j - 1] / q
        q = d[j] - lam - l * e[j - 1]
        if q == 0.0:
            return -1
        if q < 0.0:
            cnt += 1
        bj = e[m - 1] if j == m - 1 else 0.0
        z = bj - l * z
        quad += z * z / q
    schur = d[m] - lam - quad
    if schur == 0.0:
        return -1
    if schur < 0.0:
        cnt += 1
    return cnt


@nb.njit(cache=True, nogil=True)
def _count(d, e, corner, periodic, lam):
    if periodic:
        return _count_periodic(d, e, corner, lam)
    return _count_open(d, e, lam)


@nb.njit(cache=True, nogil=True)
def _robust_count(d, e, corner, periodic, lam):
    c = _count(d, e, corner, periodic, lam)
    tries = 0
    while c < 0 and tries < 8:
        lam = lam + 1e-12 * max(1.0, abs(lam)) * (tries + 1)
        c = _count(d, e, corner, periodic, lam)
        tries += 1
    return c


@nb.njit(cache=True, nogil=True)
def _bisect_lowest(d, e, corner, periodic, k, lo, hi, abstol, rtol):
    lower = np.full(k, lo)
    upper = np.full(k, hi)
    for i in range(k):
        if i > 0 and lower[i] < lower[i - 1]:
            lower[i] = lower[i - 1]
        it = 0
        while upper[i] - lower[i] > max(abstol, rtol * max(abs(lower[i]), abs(upper[i]))) and it < 200:
            mid = 0.5 * (lower[i] + upper[i])
            c = _robust_count(d, e, corner, periodic, mid)
            if c < 0:
                break
            if c >= i + 1:
                for ii in range(i, min(c, k)):
                    if mid < upper[ii]:
                        upper[ii] = mid
            else:
                lower[i] = mid
            for ii in range(max(c, i + 1), k):
                if mid > lower[ii]:
                    lower[ii] = mid
            it += 1
    return lower, upper


@nb.njit(cache=True, nogil=True)
def _solve_open(d, e, shift, rhs):
    """Solve ``(T - shift) x = rhs`` for an open chain (LDL^T without pivoting)."""
    n = d.shape[0]
    q = np.empty(n)
    z = np.empty(n)
    tiny = 1e-300
    q[0] = d[0] - shift
    if q[0] == 0.0:
        q[0] = tiny
    z[0] = rhs[0]
    for j in range(1, n):
        l = e[j - 1] / q[j - 1]
        q[j] = d[j] - shift - l * e[j - 1]
        if q[j] == 0.0:
            q[j] = tiny
        z[j] = rhs[j] - l * z[j - 1]
    x = np.empty(n)
    x[n - 1] = z[n - 1] / q[n - 1]
    for j in range(n - 2, -1, -1):
        x[j] = z[j] / q[j] - e[j] / q[j] * x[j + 1]
    return x


@nb.njit(cache=True, nogil=True)
def _solve(d, e, corner, periodic, shift, rhs):
    if not periodic:
        return _solve_open(d, e, shift, rhs)
    n = d.shape[0]
    m = n - 1
    d1 = d[:m].copy()
    e1 = e[: m - 1].copy()
    b = np.zeros(m)
    b[0] += corner
    b[m - 1] += e[m - 1]
    y1 = _solve_open(d1, e1, shift, rhs[:m].copy())
    y2 = _solve_open(d1, e1, shift, b)
    s = d[m] - shift - np.dot(b, y2)
    if s == 0.0:
        s = 1e-300
    xm = (rhs[m] - np.dot(b, y1)) / s
    x = np.empty(n)
    x[:m] = y1 - y2 * xm
    x[m] = xm
    return x


@nb.njit(cache=True, nogil=True)
def _matvec(d, e, corner, periodic, v):
    n = d.shape[0]
    out = d * v
    out[:-1] += e * v[1:]
    out[1:] += e * v[:-1]
    if periodic:
        out[0] += corner * v[n - 1]
        out[n - 1] += corner * v[0]
    return out


@nb.njit(cache=True, nogil=True)
def _polish(d, e, corner, periodic, lower, upper, iters):
    """Inverse iteration at the bracket midpoints; returns Rayleigh quotients and residuals."""
    k = lower.shape[0]
    n = d.shape[0]
    theta = np.empty(k)
    resid = np.empty(k)
    for i in range(k):
        shift = 0.5 * (lower[i] + upper[i])
        v = np.empty(n)
        for j in range(n):
            v[j] = 1.0 + 0.1 * math.sin(1.0 + 7.0 * j + 3.0 * i)
        v /= np.linalg.norm(v)
        for _ in range(iters):
            v = _solve(d, e, corner, periodic, shift, v)
            nv = np.linalg.norm(v)
            if not math.isfinite(nv) or nv == 0.0:
                break
            v /= nv
        av = _matvec(d, e, corner, periodic, v)
        th = np.dot(v, av)
        theta[i] = th
        resid[i] = np.linalg.norm(av - th * v)
    return theta, resid


# ----------------------------------------------------------------------------
# operators


@dataclass(frozen=True)
class TridiagonalOperator:
    diag: np.ndarray
    offdiag: np.ndarray
    corner: Optional[float]
    h: float
    bc: BC
    interval: tuple[float, float]
    nodes: np.ndarray = field(repr=False)

    def __post_init__(self):
        bc = BC(self.bc)
        object.__setattr__(self, "bc", bc)
        if (bc is BC.PERIODIC) != (self.corner is not None):
            raise ValueError("periodic operators need a corner entry; others must not have one")
        if self.offdiag.shape != (self.diag.size - 1,):
            raise ValueError("offdiag must have one entry fewer than diag")

    @property
    def size(self) -> int:
        return self.diag.size

    @property
    def periodic(self) -> bool:
        return self.bc is BC.PERIODIC

    @property
    def gershgorin(self) -> tuple[float, float]:
        r = np.zeros(self.size)
        r[:-1] += np.abs(self.offdiag)
        r[1:] += np.abs(self.offdiag)
        if self.periodic:
            r[0] += abs(self.corner)
            r[-1] += abs(self.corner)
        return float(np.min(self.diag - r)), float(np.max(self.diag + r))

    @property
    def scale(self) -> float:
        lo, hi = self.gershgorin
        return max(1.0, abs(lo), abs(hi))

    def _args(self):
        return self.diag, self.offdiag, 0.0 if self.corner is None else float(self.corner), self.periodic

    def dense(self) -> np.ndarray:
        a = np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        if self.periodic:
            a[0, -1] += self.corner
            a[-1, 0] += self.corner
        return a

    def quadratic_form(self, v: np.ndarray) -> complex:
        """``h * v^H A v`` (the discrete form in the h-weighted inner product)."""
        v = np.asarray(v)
        d, e, c, per = self._args()
        av = d * v
        av[:-1] += e * v[1:]
        av[1:] += e * v[:-1]
        if per:
            av[0] += c * v[-1]
            av[-1] += c * v[0]
        return self.h * np.vdot(v, av)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    n_computed: int
    bc: BC
    residual_bound: float
    brackets: np.ndarray = field(repr=False, default=None)

    def to_rows(self) -> list[tuple[int, float, str]]:
        return [(i + 1, float(v), self.bc.value) for i, v in enumerate(self.eigenvalues)]


def _potential_nodes(source, interval, h, n_cells) -> np.ndarray:
    """Nodal values of ``J`` on the interval's vertex grid."""
    a, _ = interval
    if source is None:
        return np.zeros(n_cells + 1)
    if isinstance(source, BrownianPath):
        ph = source.step
        stride = round(h / ph)
        if stride < 1 or abs(stride * ph - h) > 1e-9 * h:
            raise ValueError(f"h = {h} must be a multiple of the path step {ph}")
        i0 = source.grid.index_of(a)
        idx = i0 + stride * np.arange(n_cells + 1)
        if idx[-1] >= source.grid.n_points:
            raise ValueError("interval extends beyond the path domain")
        return source.values[idx]
    if callable(source):
        return np.asarray(source(a + h * np.arange(n_cells + 1)), dtype=float)
    arr = np.asarray(source, dtype=float)
    if arr.shape != (n_cells + 1,):
        raise ValueError(f"potential needs {n_cells + 1} nodal values, got {arr.shape}")
    return arr


def discretize(source: Union[BrownianPath, np.ndarray, None], beta: float, interval: tuple[float, float],
               h: Optional[float] = None, bc: BC = BC.DIRICHLET,
               linear_term: LinearTerm = LinearTerm.NONE) -> TridiagonalOperator:
    """Matrix of ``-d^2/dx^2 + (2/sqrt(beta)) J'(x) [+ x]`` on ``interval``.

    ``source`` supplies ``J``: a path (sampled every ``h / path.step`` nodes),
    an array of nodal values, a callable, or ``None`` for ``J = 0``.
    """
    bc = BC(bc)
    linear_term = LinearTerm(linear_term)
    a, b = map(float, interval)
    if not b > a:
        raise ValueError("interval must have positive length")
    if h is None:
        h = source.step if isinstance(source, BrownianPath) else 1e-3
    n = round((b - a) / h)
    if n < 2 or abs(n * h - (b - a)) > 1e-9 * (b - a):
        raise ValueError(f"h = {h} does not divide the interval ({a}, {b}]")
    sigma = 2.0 / math.sqrt(beta)
    J = _potential_nodes(source, (a, b), h, n)
    dJ = np.diff(J)
    x = a + h * np.arange(n + 1)
    inv_h2 = 1.0 / (h * h)
    # lumped nodal potential p_j (before dividing by the node mass)
    lumped = np.empty(n + 1)
    lumped[1:-1] = 0.5 * sigma * (dJ[:-1] + dJ[1:])
    lumped[0] = 0.5 * sigma * dJ[0]
    lumped[-1] = 0.5 * sigma * dJ[-1]
    lin = x if linear_term is LinearTerm.X else np.zeros(n + 1)
    if bc is BC.DIRICHLET:
        diag = 2 * inv_h2 + lumped[1:-1] / h + lin[1:-1]
        off = np.full(n - 2, -inv_h2)
        return TridiagonalOperator(diag, off, None, h, bc, (a, b), x[1:-1])
    if bc is BC.PERIODIC:
        if n < 3:
            raise ValueError("periodic discretization needs at least 3 cells")
        pot = lumped[:-1].copy()
        pot[0] += lumped[-1]
        diag = 2 * inv_h2 + pot / h + lin[:-1]
        off = np.full(n - 1, -inv_h2)
        return TridiagonalOperator(diag, off, -inv_h2, h, bc, (a, b), x[:-1])
    # Neumann: symmetric scaling by the lumped masses (h/2 at both ends)
    diag = 2 * inv_h2 + lumped / h + lin
    diag[0] = 2 * inv_h2 + lumped[0] / (h / 2) + lin[0]
    diag[-1] = 2 * inv_h2 + lumped[-1] / (h / 2) + lin[-1]
    off = np.full(n, -inv_h2)
    off[0] = off[-1] = -SQRT2 * inv_h2
    return TridiagonalOperator(diag, off, None, h, bc, (a, b), x)


def eigen_count(op: TridiagonalOperator, lam: float) -> int:
    """Number of eigenvalues below ``lam`` (inertia of ``A - lam``)."""
    d, e, c, per = op._args()
    cnt = _count(d, e, c, per, float(lam))
    if cnt < 0:
        cnt = _robust_count(d, e, c, per, float(lam) + 1e-12 * max(1.0, abs(lam)))
        if cnt < 0:
            raise ArithmeticError(f"repeated zero pivots near lambda = {lam}")
    return int(cnt)


def lowest_eigenvalues(op: TridiagonalOperator, k: int, rtol: float = 1e-14, polish: bool = True) -> Spectrum:
    if not 1 <= k <= op.size:
        raise ValueError(f"k = {k} outside 1..{op.size}")
    d, e, c, per = op._args()
    lo, hi = op.gershgorin
    abstol = 8 * np.finfo(float).eps * op.scale
    lower, upper = _bisect_lowest(d, e, c, per, int(k), lo, hi, abstol, rtol)
    mid = 0.5 * (lower + upper)
    resid = 0.5 * (upper - lower)
    if polish:
        theta, r = _polish(d, e, c, per, lower, upper, 2)
        slack = abstol + 1e-12 * np.maximum(1.0, np.abs(mid))
        ok = (theta >= lower - slack) & (theta <= upper + slack) & np.isfinite(r)
        mid = np.where(ok, theta, mid)
        resid = np.where(ok, np.maximum(r, resid), resid)
    order = np.argsort(mid, kind="stable")
    return Spectrum(mid[order], int(k), op.bc, float(np.max(resid)), np.stack([lower, upper], axis=1))


def all_eigenvalues_below(op: TridiagonalOperator, r: float) -> np.ndarray:
    n = eigen_count(op, r)
    if n == 0:
        return np.zeros(0)
    return lowest_eigenvalues(op, n).eigenvalues


def truncated_eigensum(op: TridiagonalOperator, r: float) -> float:
    """``sum_n (r - lambda_n)_+``."""
    ev = all_eigenvalues_below(op, r)
    return float(np.sum(np.maximum(r - ev, 0.0)))


def fourier_level(n: np.ndarray, length: float) -> np.ndarray:
    """``lambda*_n = (2 pi floor(n/2) / l)^2`` for ``n = 1, 2, ...``."""
    return (2 * math.pi * np.floor(np.asarray(n) / 2) / length) ** 2


def flat_bound_rhs(r: float, b_avg: float, beta: float, interval_length: float, n_max: int) -> float:
    """``sum_{n <= n_max} (r - sigma b_avg - lambda*_n)_+`` (the flat-potential eigensum)."""
    sigma = 2.0 / math.sqrt(beta)
    n = np.arange(1, n_max + 1)
    terms = r - sigma * b_avg - fourier_level(n, interval_length)
    if n_max >= 1 and terms[-1] > 0:
        raise ValueError(f"n_max = {n_max} too small: last term {terms[-1]:.4g} is still positive")
    if n_max == 0 and r - sigma * b_avg > 0:
        raise ValueError("n_max = 0 too small")
    return float(np.sum(np.maximum(terms, 0.0)))


def flat_n_max(r: float, b_avg: float, beta: float, interval_length: float) -> int:
    """Smallest ``n_max`` that makes :func:`flat_bound_rhs` complete."""
    s = r - 2.0 / math.sqrt(beta) * b_avg
    if s <= 0:
        return 1
    k = math.floor(math.sqrt(s) * interval_length / (2 * math.pi))
    return 2 * k + 3


# ----------------------------------------------------------------------------
# executable spectral inequalities


@dataclass
class CheckReport:
    passed: bool
    margins: np.ndarray
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.passed)

    def to_json(self) -> dict:
        return {"passed": bool(self.passed), "min_margin": float(np.min(self.margins)) if self.margins.size else None,
                **{k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.details.items()}}


def interlacing_chain(lower_bc: np.ndarray, upper_bc: np.ndarray, tol: float = 1e-8) -> CheckReport:
    """Check ``l_1 <= u_1 <= l_2 <= u_2 <= ...``; ``lower_bc`` may hold one extra entry."""
    n = upper_bc.size
    chain = []
    for i in range(n):
        chain += [lower_bc[i], upper_bc[i]]
    if lower_bc.size > n:
        chain.append(lower_bc[n])
    chain = np.array(chain)
    scale = np.maximum(1.0, np.abs(chain))
    gaps = np.diff(chain) / np.maximum(scale[1:], scale[:-1])
    return CheckReport(bool(np.all(gaps >= -tol)), gaps, {"chain": chain})


def check_interlacing(path: BrownianPath, beta: float, interval: tuple[float, float], epsilon: float, n: int,
                      h: Optional[float] = None, tol: float = 1e-8, swap: bool = False) -> CheckReport:
    """Periodic/Dirichlet interlacing for the first ``n`` eigenvalues of the mollified path.

    ``swap=True`` exchanges the roles of the two boundary conditions (a
    negative control: the chain then fails).
    """
    smooth = mollify(path, epsilon) if epsilon is not None else path
    per = lowest_eigenvalues(discretize(smooth, beta, interval, h, BC.PERIODIC), n + 1).eigenvalues
    dir_ = lowest_eigenvalues(discretize(smooth, beta, interval, h, BC.DIRICHLET), n).eigenvalues
    rep = interlacing_chain(dir_, per[:n], tol) if swap else interlacing_chain(per, dir_, tol)
    rep.details.update({"periodic": per, "dirichlet": dir_, "swapped": swap})
    return rep


def boundary_ordering(path: BrownianPath, beta: float, interval: tuple[float, float], epsilon: Optional[float] = None,
                      h: Optional[float] = None, tol: float = 1e-8) -> CheckReport:
    """``lambda_1(Neumann) <= lambda_1(periodic) <= lambda_1(Dirichlet)``."""
    smooth = mollify(path, epsilon) if epsilon is not None else path
    vals = np.array([lowest_eigenvalues(discretize(smooth, beta, interval, h, bc), 1).eigenvalues[0]
                     for bc in (BC.NEUMANN, BC.PERIODIC, BC.DIRICHLET)])
    gaps = np.diff(vals) / np.maximum(1.0, np.abs(vals[1:]))
    return CheckReport(bool(np.all(gaps >= -tol)), gaps, {"neumann": vals[0], "periodic": vals[1], "dirichlet": vals[2]})


def _nodal_j(source, interval, h):
    a, b = interval
    n = round((b - a) / h)
    return _potential_nodes(source, interval, h, n)


def comparison_bound_check(J1, J2, beta: float, interval: tuple[float, float], kappa: float, n: int,
                           h: Optional[float] = None, tol: float = 1e-8) -> CheckReport:
    """Check ``lambda_n(H1) <= (k+1)^3/k^3 lambda_n(H2) + (k+1)^2/k^3 U2^2 + k^2 U12^2``.

    ``H_i = -d^2 + (2/sqrt(beta)) J_i'`` with Dirichlet conditions; the sup
    norms are taken of the scaled functions ``(2/sqrt(beta)) J``, with ``J2``
    recentred at the left endpoint (constants do not change ``H_i``).
    """
    if h is None:
        h = next((s.step for s in (J1, J2) if isinstance(s, BrownianPath)), 1e-3)
    sigma = 2.0 / math.sqrt(beta)
    j1 = _nodal_j(J1, interval, h)
    j2 = _nodal_j(J2, interval, h)
    u2 = sigma * np.max(np.abs(j2 - j2[0]))
    diff = j1 - j2
    u12 = sigma * np.max(np.abs(diff - diff[0]))
    l1 = lowest_eigenvalues(discretize(j1, beta, interval, h), n).eigenvalues
    l2 = lowest_eigenvalues(discretize(j2, beta, interval, h), n).eigenvalues
    k = float(kappa)
    rhs = (k + 1) ** 3 / k**3 * l2 + ((k + 1) ** 2 / k**3 * u2**2 + k**2 * u12**2)
    # the proof's sharper coefficient 1 + (k+1)/k^3 also bounds lambda_n(H1) when lambda_n(H2) < 0
    rhs_sharp = (1 + (k + 1) / k**3) * l2 + ((k + 1) ** 2 / k**3 * u2**2 + k**2 * u12**2)
    margins = (rhs - l1) / np.maximum(1.0, np.abs(rhs))
    return CheckReport(bool(np.all(margins >= -tol)), margins,
                       {"lambda1": l1, "lambda2": l2, "rhs": rhs, "rhs_sharp": rhs_sharp, "U2": u2, "U12": u12,
                        "kappa": k})


def fourier_vectors(op: TridiagonalOperator, m: int) -> np.ndarray:
    """Orthonormal (h-weighted) discrete exponentials ``f_1 = 1/sqrt(l)``, ``f_{2k}, f_{2k+1} = e^{+-2 pi i k x / l} / sqrt(l)``."""
    if op.bc is not BC.PERIODIC:
        raise ValueError("Fourier vectors need a periodic operator")
    a, b = op.interval
    length = b - a
    x = op.nodes - a
    out = np.empty((m, op.size), dtype=complex)
    for idx in range(m):
        n = idx + 1
        k = n // 2
        sgn = 1.0 if n % 2 == 0 else -1.0
        out[idx] = np.exp(sgn * 2j * math.pi * k * x / length) / math.sqrt(length)
    return out


def eigensum_variational_check(op_periodic: TridiagonalOperator, m: int, b_avg: float, beta: float,
                               tol: float = 1e-8) -> CheckReport:
    """``sum_{n<=m} lambda_n <= sum_{n<=m} Q(f_n) <= sum_{n<=m} (lambda*_n + sigma b_avg)``.

    The middle term uses the discrete Fourier family; the outer inequality is
    the continuum bound (``4/h^2 sin^2(pi k/N) <= (2 pi k / l)^2``).
    """
    if m == 0:
        return CheckReport(True, np.zeros(1), {"lhs": 0.0, "fourier": 0.0, "rhs": 0.0})
    if m > op_periodic.size:
        raise ValueError("m exceeds the operator dimension")
    a, b = op_periodic.interval
    sigma = 2.0 / math.sqrt(beta)
    lhs = float(np.sum(lowest_eigenvalues(op_periodic, m).eigenvalues))
    vecs = fourier_vectors(op_periodic, m)
    mid = float(sum(op_periodic.quadratic_form(v).real for v in vecs))
    rhs = float(np.sum(fourier_level(np.arange(1, m + 1), b - a) + sigma * b_avg))
    scale = max(1.0, abs(rhs))
    margins = np.array([(mid - lhs) / scale, (rhs - mid) / scale])
    return CheckReport(bool(np.all(margins >= -tol)), margins, {"lhs": lhs, "fourier": mid, "rhs": rhs})


def flat_domination_check(op_periodic: TridiagonalOperator, r: float, b_avg: float, beta: float,
                          m_max: int = 10, tol: float = 1e-8) -> CheckReport:
    """Truncated periodic eigensum versus the flat Fourier bound.

    For each ``m = 0..m_max`` the partial sums satisfy
    ``sum_{n<=m} (r - lambda_n) >= sum_{n<=m} (r - sigma b - lambda*_n)``; the
    positive-part sums then obey ``sum (r - lambda_n)_+ >= sum (r - sigma b - lambda*_n)_+``.
    """
    a, b = op_periodic.interval
    length = b - a
    sigma = 2.0 / math.sqrt(beta)
    n_max = max(m_max, flat_n_max(r, b_avg, beta, length))
    ev = lowest_eigenvalues(op_periodic, min(n_max, op_periodic.size)).eigenvalues
    flat = r - sigma * b_avg - fourier_level(np.arange(1, ev.size + 1), length)
    partial_ev = np.concatenate([[0.0], np.cumsum(r - ev)])[: m_max + 1]
    partial_flat = np.concatenate([[0.0], np.cumsum(flat)])[: m_max + 1]
    scale = np.maximum(1.0, np.abs(partial_flat))
    margins_m = (partial_ev - partial_flat) / scale
    total_ev = truncated_eigensum(op_periodic, r)
    total_flat = flat_bound_rhs(r, b_avg, beta, length, n_max)
    margin_total = (total_ev - total_flat) / max(1.0, abs(total_flat))
    margins = np.concatenate([margins_m, [margin_total]])
    return CheckReport(bool(np.all(margins >= -tol)), margins,
                       {"eigensum": total_ev, "flat_bound": total_flat, "r": r, "b_avg": b_avg})


def weyl_constant() -> float:
    return 2.0 / (3.0 * math.pi)


def airy_counts(lambda_grid, h: float = 5e-3, margin: float = 10.0) -> np.ndarray:
    """``N(lam, -d^2/dx^2 + x)`` on ``[0, max(lam) + margin]`` with Dirichlet ends."""
    lams = np.asarray(lambda_grid, dtype=float)
    x_max = max(float(np.max(lams)), 0.0) + margin
    x_max = h * math.ceil(x_max / h - 1e-9)
    op = discretize(None, 2.0, (0.0, x_max), h, BC.DIRICHLET, LinearTerm.X)
    return np.array([eigen_count(op, lam) for lam in lams], dtype=np.int64)


def airy_count_bound_check(lambda_grid, slack: float = 0.1, h: float = 5e-3, margin: float = 10.0,
                           lambda_min: float = 0.0) -> CheckReport:
    """``N(lam, A) <= c lam^{3/2}`` with ``c = (1 + slack) * 2/(3 pi)`` for ``lam >= lambda_min``.

    Also reports ``sup N / lam^{3/2}`` over the whole grid, which exceeds the
    Weyl constant near the first eigenvalues where the count jumps from 0 to 1.
    """
    lams = np.asarray(lambda_grid, dtype=float)
    if np.any(lams < 0):
        raise ValueError("lambda grid must be non-negative")
    counts = airy_counts(lams, h, margin)
    c = (1 + slack) * weyl_constant()
    bound = c * lams**1.5
    sel = lams >= lambda_min
    margins = (bound - counts)[sel]
    pos = lams > 0
    ratio = np.max(counts[pos] / lams[pos] ** 1.5) if np.any(pos) else 0.0
    monotone = bool(np.all(np.diff(counts[np.argsort(lams)]) >= 0))
    return CheckReport(bool(np.all(margins >= 0)) and monotone, margins,
                       {"counts": counts, "constant": c, "sup_ratio": float(ratio), "monotone": monotone})


def write_spectrum_csv(spectra, target) -> None:
    """Rows ``index,eigenvalue,bc``."""
    import csv
    from pathlib import Path

    if isinstance(spectra, Spectrum):
        spectra = [spectra]
    own = isinstance(target, (str, Path))
    fh = open(target, "w", newline="") if own else target
    try:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue", "bc"])
        for sp in spectra:
            for i, v, bc in sp.to_rows():
                w.writerow([i, f"{v:.17g}", bc])
    finally:
        if own:
            fh.close()
