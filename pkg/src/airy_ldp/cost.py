"""Soft-threshold cost w_t and the double-exponential proxy.

``w_t(lam) = log(1 + exp(-t**(1/3) * lam))`` is a smoothed version of
``t**(1/3) * max(-lam, 0)``. Every consumer goes through this module so the
overflow-safe branches live in one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class CostParams:
    t: float

    def __post_init__(self):
        if not (self.t > 0 and math.isfinite(self.t)):
            raise ValueError(f"t must be positive and finite, got {self.t}")

    @property
    def scale(self) -> float:
        return self.t ** (1.0 / 3.0)


def _scale(t) -> float:
    return CostParams(float(t)).scale


def w_t(lam, t):
    """Stable ``log(1 + exp(-t^{1/3} lam))`` (scalar or array)."""
    u = _scale(t) * np.asarray(lam, dtype=float)
    # log1p(exp(-u)) for u >= 0, -u + log1p(exp(u)) otherwise
    out = np.where(u >= 0, np.log1p(np.exp(-np.abs(u))), -u + np.log1p(np.exp(-np.abs(u))))
    return out if out.ndim else float(out)


def w_t_deriv(lam, t):
    """Derivative in ``lam``: ``-t^{1/3} * sigmoid(-t^{1/3} lam)``."""
    s = _scale(t)
    out = -s * expit(-s * np.asarray(lam, dtype=float))
    return out if out.ndim else float(out)


def w_t_excess(lam, t):
    """``w_t(lam) - t^{1/3} max(-lam, 0)``, which equals ``log1p(exp(-|u|))``."""
    u = _scale(t) * np.asarray(lam, dtype=float)
    out = np.log1p(np.exp(-np.abs(u)))
    return out if out.ndim else float(out)


def log_double_exp(x, b):
    """``log F(x) = -b e^x`` for ``F(x) = exp(-b e^x)``."""
    b = np.asarray(b, dtype=float)
    if not np.all(b > 0):
        raise ValueError(f"b must be positive, got {b}")
    out = -b * np.exp(np.asarray(x, dtype=float))
    return out if out.ndim else float(out)


def double_exp_proxy(x, b):
    """``F(x) = exp(-b e^x)``; underflows to 0 for large x (use log_double_exp there)."""
    out = np.exp(log_double_exp(x, b))
    return out if np.ndim(out) else float(out)


def sandwich_bounds(x, delta, t, b):
    """Check both sides of the double-exponential sandwich at shift ``delta * t``.

    Returns a pair of boolean arrays for
    ``F(x + delta t) <= 1{x<0} + exp(-b e^{delta t})`` and
    ``F(x - delta t) >= exp(-b e^{-delta t}) 1{x<0}``.
    The comparisons run in the probability domain since all terms lie in [0, 1].
    """
    x = np.asarray(x, dtype=float)
    shift = np.asarray(delta, dtype=float) * np.asarray(t, dtype=float)
    ind = (x < 0).astype(float)
    upper = double_exp_proxy(x + shift, b) <= ind + np.exp(log_double_exp(shift, b))
    lower = double_exp_proxy(x - shift, b) >= np.exp(log_double_exp(-shift, b)) * ind
    return upper, lower
