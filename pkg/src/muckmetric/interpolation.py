"""Interpolation of weighted norms along geometric weight paths.

Given endpoint norms K0 on L^p(w0) and K1 on L^p(w1), the norm on the
interpolated measure with density w0^(1-t) w1^t is at most K0^(1-t) K1^t.
`stein_weiss_check` measures all three norms and reports the slack.

`factorize` inverts the geometric path: W = (w/w0)^(1/t) * w0 recovers the
far endpoint from w = w0^(1-t) W^t, and d_*(W, w0) = d_*(w, w0)/t exactly by
homogeneity of the BMO norm.  `t_of_delta` and `continuity_upper_bound`
assemble the resulting norm-continuity estimate
gamma^(1-t) (c F([W]))^t with t proportional to delta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError, RangeError
from .weights import (
    CharacteristicReport,
    Weight,
    ap_characteristic,
    normalize_weight,
)
from .operators import NormEstimate, czo_bound_F, weighted_l2_norm, weighted_lp_norm

_EXP_GUARD = 700.0


@dataclass(frozen=True)
class InterpolationParams:
    """Exponents along the interpolation path at parameter t.

    1/p_t = (1-t)/p0 + t/p1 (same for q_t); s and r locate the interpolated
    measures: s = t p_t / p1, r = t q_t / q1.
    """

    p0: float
    p1: float
    q0: float
    q1: float
    t: float
    p_t: float
    q_t: float
    s: float
    r: float


def interpolation_params(
    p0: float, p1: float, q0: float, q1: float, t: float
) -> InterpolationParams:
    for name, value in (("p0", p0), ("p1", p1), ("q0", q0), ("q1", q1)):
        if not value >= 1:
            raise ParameterError(f"exponent {name} must be >= 1, got {value}")
    if not 0.0 <= t <= 1.0:
        raise RangeError(f"t must lie in [0,1], got {t}")
    p_t = 1.0 / ((1.0 - t) / p0 + t / p1)
    q_t = 1.0 / ((1.0 - t) / q0 + t / q1)
    return InterpolationParams(
        p0=p0,
        p1=p1,
        q0=q0,
        q1=q1,
        t=t,
        p_t=p_t,
        q_t=q_t,
        s=t * p_t / p1,
        r=t * q_t / q1,
    )


def interpolated_weight(w0: Weight, w1: Weight, s: float) -> Weight:
    """Density w0^(1-s) w1^s of the interpolated measure; not normalized."""
    if w0.grid != w1.grid:
        raise ParameterError("weights live on different grids")
    if not 0.0 <= s <= 1.0:
        raise RangeError(f"s must lie in [0,1], got {s}")
    return Weight(w0.grid, w0.values ** (1.0 - s) * w1.values**s)


@dataclass(frozen=True)
class SteinWeissReport:
    measured: float
    bound: float
    slack: float
    k0: float
    k1: float
    converged: bool


def stein_weiss_check(
    op,
    w0: Weight,
    w1: Weight,
    p: float,
    t: float,
    tol: float = 1e-8,
    budget: int = 4000,
) -> SteinWeissReport:
    """Measure the interpolated norm against the endpoint bound K0^(1-t) K1^t.

    Diagonal instance (both endpoint exponents equal p), so the interpolated
    measure sits at s = t.  ``slack = bound - measured``; the inequality
    holds when slack >= -tol.
    """
    if not p > 1:
        raise ParameterError(f"requires p > 1, got {p}")
    if not 0.0 <= t <= 1.0:
        raise RangeError(f"t must lie in [0,1], got {t}")

    def norm_of(weight: Weight) -> NormEstimate:
        if p == 2 and op.linear:
            return weighted_l2_norm(op, weight)
        return weighted_lp_norm(op, weight, p, budget=budget)

    est0 = norm_of(w0)
    est1 = norm_of(w1)
    mid = norm_of(interpolated_weight(w0, w1, t))
    bound = est0.value ** (1.0 - t) * est1.value**t
    return SteinWeissReport(
        measured=mid.value,
        bound=bound,
        slack=bound - mid.value,
        k0=est0.value,
        k1=est1.value,
        converged=est0.converged and est1.converged and mid.converged,
    )


@dataclass(frozen=True)
class FactorizationResult:
    """w = w0^(1-t) W^t with the measured bound chain for the far endpoint."""

    W: Weight
    t: float
    characteristic_of_W: CharacteristicReport
    bound_chain: tuple[float, float, float]


def factorize(
    w: Weight,
    w0: Weight,
    t: float,
    p: float = 2.0,
    gamma: float = 1.0,
    c: float = 1.0,
) -> FactorizationResult:
    """Far endpoint W = (w/w0)^(1/t) w0 of the geometric path through w.

    ``gamma`` is the caller's norm at w0 and ``c`` the operator's fitted
    bound constant; the chain records (gamma, c*F([W]), gamma^(1-t)(c F)^t).
    """
    if w.grid != w0.grid:
        raise ParameterError("weights live on different grids")
    if not 0.0 < t <= 1.0:
        raise RangeError(f"t must lie in (0,1], got {t}")
    log_ratio = np.log(w.values) - np.log(w0.values)
    exponent = log_ratio / t + np.log(w0.values)
    spread = exponent - exponent.mean()
    if np.max(np.abs(spread), initial=0.0) > _EXP_GUARD:
        raise RangeError(f"t = {t} too small for this pair: overflow in (w/w0)^(1/t)")
    big = normalize_weight(Weight(w.grid, np.exp(spread)))
    char = ap_characteristic(big, p)
    shape = czo_bound_F(p, max(char.value, 1.0))
    final = continuity_upper_bound(gamma, c, shape, t)
    return FactorizationResult(
        W=big,
        t=t,
        characteristic_of_W=char,
        bound_chain=(gamma, c * shape, final),
    )


def t_of_delta(delta: float, c0: float = 0.25) -> float:
    """The interpolation parameter t = delta/c0 used by the bound chain."""
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if not c0 > 0:
        raise ParameterError(f"c0 must be positive, got {c0}")
    t = delta / c0
    if not 0.0 < t <= 1.0:
        raise RangeError(f"t = delta/c0 = {t} falls outside (0,1]")
    return t


def continuity_upper_bound(gamma: float, c: float, F_of_W: float, t: float) -> float:
    """The log-linear bound gamma^(1-t) (c F_of_W)^t."""
    for name, value in (("gamma", gamma), ("c", c), ("F_of_W", F_of_W)):
        if not value > 0:
            raise ParameterError(f"{name} must be positive, got {value}")
    if not 0.0 <= t <= 1.0:
        raise RangeError(f"t must lie in [0,1], got {t}")
    return gamma ** (1.0 - t) * (c * F_of_W) ** t
