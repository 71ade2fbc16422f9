"""Runnable experiments: continuity of the norm map, the sqrt-delta BMO
bound, sharpness proxies on the circle, the non-completeness demonstration,
and the algebraic property checks.

Weight families are a base weight plus unit-BMO log directions g; members
are base * exp(s g).  Scaling in s is exact for metric targets
(d_*(member, base) = s) and monotone enough for characteristic targets,
which are hit by bisection to 1% of the target excess.

Sweep rows are independent and evaluated through a thread pool capped by the
MUCK_THREADS environment variable; results are gathered in submission order,
so output never depends on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, FitError, ParameterError, RangeError, SearchError
from .grid import Grid, GridFunction
from .weights import (
    BmoFunction,
    Weight,
    a1_characteristic,
    ap_characteristic,
    ainfty_characteristic,
    bmo_norm,
    d_star,
    dual_weight,
    exp_weight,
    holder_interpolant,
    log_power_profile,
    normalize_weight,
    unit_weight,
)
from .operators import weighted_l2_norm, weighted_lp_norm


def worker_count(items: int) -> int:
    """Thread-pool width: min(items, cpu count), capped by MUCK_THREADS."""
    env = os.environ.get("MUCK_THREADS")
    if env is not None:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ConfigError(f"MUCK_THREADS must be an integer, got {env!r}") from exc
        if cap < 1:
            raise ConfigError(f"MUCK_THREADS must be >= 1, got {cap}")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(items, cap))


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Order-preserving map over independent work items."""
    items = list(items)
    workers = worker_count(len(items))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class WeightFamily:
    """A base weight with named unit-BMO log directions."""

    kind: str
    base: Weight
    directions: tuple[tuple[str, GridFunction], ...]

    def member(self, direction: int, scale: float) -> Weight:
        """base * exp(scale * g); d_*(member, base) = |scale| exactly."""
        _, g = self.directions[direction]
        log_vals = np.log(self.base.values) + scale * g.values
        log_vals -= log_vals.mean()
        return Weight(self.base.grid, np.exp(log_vals), normalized=True)


def _unit_direction(f: BmoFunction, shifted: bool) -> GridFunction:
    scale = bmo_norm(f, shifted=shifted).value
    if scale <= 0:
        raise ParameterError("direction has zero BMO norm (constant)")
    return GridFunction(f.grid, f.values / scale)


def exp_bmo_direction(
    base: Weight, f: BmoFunction, name: str = "direction", shifted: bool = False
) -> WeightFamily:
    """Single-direction family base * exp(s f / ||f||_*)."""
    if base.grid != f.grid:
        raise ParameterError("direction and base live on different grids")
    return WeightFamily("exp-bmo", base, ((name, _unit_direction(f, shifted)),))


def haar_direction(grid: Grid, kind: str) -> BmoFunction:
    """Named unit-BMO step directions used by the continuity experiments.

    "half": +1 on [0,1/2), -1 on [1/2,1).  "half-neg": the negative.
    "quarter": +1 on [0,1/4), -1 on [1/4,1/2), 0 on [1/2,1).
    """
    n = grid.cells
    values = np.zeros(n)
    if kind == "half":
        values[: n // 2] = 1.0
        values[n // 2 :] = -1.0
    elif kind == "half-neg":
        values[: n // 2] = -1.0
        values[n // 2 :] = 1.0
    elif kind == "quarter":
        if grid.levels < 2:
            raise ParameterError("quarter direction needs at least 2 levels")
        values[: n // 4] = 1.0
        values[n // 4 : n // 2] = -1.0
    else:
        raise ParameterError(f"unknown direction kind {kind!r}")
    return GridFunction(grid, values)


def log_distance_profile(grid: Grid) -> BmoFunction:
    """Exact cell means of log d(x), d(x) = min(x, 1-x), symmetric on [0,1)."""
    half = grid.cells // 2
    left = log_power_profile(grid).values[:half]
    return GridFunction(grid, np.concatenate([left, left[::-1]]))


def power_circle_family(grid: Grid, shifted: bool = False) -> WeightFamily:
    """Powers of the distance to {0, 1} ~ a circle point, both signs."""
    psi = _unit_direction(log_distance_profile(grid), shifted)
    neg = GridFunction(grid, -psi.values)
    return WeightFamily(
        "power-circle",
        unit_weight(grid),
        (("power+", psi), ("power-", neg)),
    )


def random_cells_family(
    base: Weight, seed: int, amplitude: float = 1.0, count: int = 8,
    shifted: bool = False,
) -> WeightFamily:
    """Seeded random log directions: uniform cells, one smoothing pass."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    directions = []
    for i in range(count):
        log_vals = rng.uniform(-amplitude, amplitude, base.grid.cells)
        pairs = log_vals.reshape(-1, 2).mean(axis=1)
        log_vals = np.repeat(pairs, 2)
        log_vals -= log_vals.mean()
        f = GridFunction(base.grid, log_vals)
        directions.append((f"random{i}", _unit_direction(f, shifted)))
    return WeightFamily("random-cells", base, tuple(directions))


def scale_to_characteristic(
    fam: WeightFamily,
    direction: int,
    char_of: Callable[[Weight], float],
    target_excess: float,
    rel_tol: float = 0.01,
) -> tuple[float, float]:
    """Find s with char(member(s)) - 1 within rel_tol of target_excess.

    Assumes char(member(s)) is continuous and increasing in s >= 0 with
    char(member(0)) = char(base); raises SearchError when the target excess
    is below the base's or cannot be bracketed.
    """
    if not target_excess > 0:
        raise ParameterError(f"target excess must be positive, got {target_excess}")
    target = 1.0 + target_excess
    if char_of(fam.base) > target:
        raise SearchError(
            f"base characteristic already exceeds target {target:g}"
        )
    lo, hi = 0.0, 1.0
    for _ in range(60):
        try:
            if char_of(fam.member(direction, hi)) >= target:
                break
        except RangeError:
            break
        lo = hi
        hi *= 2.0
    else:
        raise SearchError("could not bracket the characteristic target")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        excess = char_of(fam.member(direction, mid)) - 1.0
        if abs(excess - target_excess) <= rel_tol * target_excess:
            return mid, 1.0 + excess
        if excess < target_excess:
            lo = mid
        else:
            hi = mid
    raise SearchError("characteristic bisection did not reach 1% of the target")


@dataclass(frozen=True)
class ContinuityRow:
    delta_target: float
    d_star_actual: float
    char_ap: float
    norm: float
    gap: float
    flagged: bool = False


@dataclass(frozen=True)
class ContinuityResult:
    rows: tuple[ContinuityRow, ...]
    operator: str
    p: float
    base_norm: float


def continuity_sweep(
    op,
    w0: Weight,
    fam: WeightFamily,
    deltas: Sequence[float],
    p: float,
    shifted: bool = False,
    norm_tol: float = 1e-10,
    budget: int = 4000,
    max_iterations: int = 100_000,
) -> ContinuityResult:
    """Norm gap versus metric distance along the family's first direction."""
    deltas = [float(d) for d in deltas]
    if any(d < 0 for d in deltas):
        raise ParameterError("deltas must be nonnegative")
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ParameterError("deltas must be strictly increasing")
    if w0.grid != fam.base.grid or not np.array_equal(w0.values, fam.base.values):
        raise ParameterError("family base must equal the sweep's base weight")

    def norm_of(weight: Weight):
        if p == 2 and op.linear:
            return weighted_l2_norm(op, weight, tol=norm_tol,
                                    max_iterations=max_iterations)
        return weighted_lp_norm(op, weight, p, budget=budget, tol=norm_tol)

    base_est = norm_of(w0)

    def row_for(delta: float) -> ContinuityRow:
        if delta == 0.0:
            char = ap_characteristic(w0, p, shifted=shifted).value
            return ContinuityRow(0.0, 0.0, char, base_est.value, 0.0,
                                 flagged=not base_est.converged)
        member = fam.member(0, delta)
        est = norm_of(member)
        return ContinuityRow(
            delta_target=delta,
            d_star_actual=d_star(member, w0, shifted=shifted),
            char_ap=ap_characteristic(member, p, shifted=shifted).value,
            norm=est.value,
            gap=est.value - base_est.value,
            flagged=not est.converged,
        )

    rows = parallel_map(row_for, deltas)
    rows.sort(key=lambda r: r.d_star_actual)
    return ContinuityResult(tuple(rows), op.tag, p, base_est.value)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]


def rate_fit(res: ContinuityResult) -> RateFit:
    """Least-squares fit of log(gap) against log(d_star) over usable rows."""
    rows = [r for r in res.rows if not r.flagged and r.gap > 1e-13]
    if len(rows) < 4:
        raise FitError(
            f"rate fit needs at least 4 unflagged rows with positive gap, "
            f"have {len(rows)}"
        )
    x = np.log([r.d_star_actual for r in rows])
    y = np.log([r.gap for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    total = y - y.mean()
    ss_tot = float(total @ total)
    r_squared = 1.0 if ss_tot == 0 else 1.0 - float(residuals @ residuals) / ss_tot
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=max(0.0, min(1.0, r_squared)),
        window=(float(np.exp(x.min())), float(np.exp(x.max()))),
    )


@dataclass(frozen=True)
class Theorem2Row:
    delta: float
    ainfty_minus_1: float
    bmo_of_log: float
    ratio_to_32sqrt: float
    flagged: bool = False


@dataclass(frozen=True)
class Theorem2Result:
    rows: tuple[Theorem2Row, ...]
    max_ratio: float

    @property
    def violations(self) -> int:
        return sum(1 for r in self.rows if not r.flagged and r.ratio_to_32sqrt > 1)


def theorem2_sweep(
    deltas: Sequence[float], generator: WeightFamily, shifted: bool = False
) -> Theorem2Result:
    """BMO norm of log w against 32 sqrt(delta) at prescribed A_inf excess.

    Each row rescales one generator direction until [w]_{A_inf} = 1 + delta
    (to 1% of delta) and compares ||log w||_* with 32 sqrt of the achieved
    excess, so the scaling slack cannot flip the comparison.
    """
    deltas = [float(d) for d in deltas]
    if any(not 0 < d < 1 for d in deltas):
        raise ParameterError("deltas must lie in (0,1)")

    def char_of(w: Weight) -> float:
        return ainfty_characteristic(w, shifted=shifted).value

    def row_for(item: tuple[int, float]) -> Theorem2Row:
        index, delta = item
        direction = index % len(generator.directions)
        try:
            scale, achieved = scale_to_characteristic(
                generator, direction, char_of, delta
            )
        except SearchError:
            return Theorem2Row(delta, math.nan, math.nan, math.nan, flagged=True)
        member = generator.member(direction, scale)
        oscillation = bmo_norm(member.log(), shifted=shifted).value
        excess = achieved - 1.0
        return Theorem2Row(
            delta=delta,
            ainfty_minus_1=excess,
            bmo_of_log=oscillation,
            ratio_to_32sqrt=oscillation / (32.0 * math.sqrt(excess)),
        )

    rows = parallel_map(row_for, list(enumerate(deltas)))
    usable = [r.ratio_to_32sqrt for r in rows if not r.flagged]
    return Theorem2Result(tuple(rows), max(usable) if usable else math.nan)


@dataclass(frozen=True)
class SharpnessResult:
    best_weight_id: str
    gap: float
    d_star: float
    char: float


def sharpness_search(
    op,
    delta: float,
    fam: WeightFamily,
    budget: int,
    shifted: bool = False,
    norm_tol: float = 1e-10,
) -> SharpnessResult:
    """Largest norm gap over family members with [w]_{A_2} <= 1 + delta.

    Each direction is rescaled to put the member on the constraint boundary
    (gaps grow with the characteristic along a direction), then one weighted
    norm is evaluated per member; the base norm also costs one evaluation.
    ``budget`` caps the total number of norm evaluations.
    """
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0,1), got {delta}")
    if budget < 1:
        raise ParameterError(f"budget must be >= 1, got {budget}")

    def char_of(w: Weight) -> float:
        return ap_characteristic(w, 2.0, shifted=shifted).value

    base_char = char_of(fam.base)
    if base_char > 1.0 + delta:
        raise SearchError(
            f"no feasible member: base characteristic {base_char:g} exceeds "
            f"{1.0 + delta:g}"
        )
    base_est = weighted_l2_norm(op, fam.base, tol=norm_tol)
    evaluations = 1
    best = SharpnessResult("base", 0.0, 0.0, base_char)
    for index, (name, _) in enumerate(fam.directions):
        if evaluations >= budget:
            break
        try:
            # aim 1% inside the ball so the rescale tolerance can never
            # push the member past the hard constraint 1 + delta
            scale, achieved = scale_to_characteristic(
                fam, index, char_of, 0.99 * delta
            )
        except SearchError:
            continue
        member = fam.member(index, scale)
        est = weighted_l2_norm(op, member, tol=norm_tol)
        evaluations += 1
        gap = est.value - base_est.value
        if gap > best.gap:
            best = SharpnessResult(
                best_weight_id=name,
                gap=gap,
                d_star=d_star(member, fam.base, shifted=shifted),
                char=achieved,
            )
    return best


@dataclass(frozen=True)
class NoncompletenessRow:
    n: int
    r: float
    d_star_to_next: float
    a1_char: float


@dataclass(frozen=True)
class NoncompletenessResult:
    rows: tuple[NoncompletenessRow, ...]
    profile_bmo: float
    max_proportionality_error: float

    @property
    def a1_ratio(self) -> float:
        return self.rows[-1].a1_char / self.rows[0].a1_char


def noncompleteness_demo(
    r_values: Sequence[float], grid: Grid, shifted: bool = False
) -> NoncompletenessResult:
    """Power-profile weights marching toward the non-integrable exponent -1.

    Every weight is exp(r * psi) for the common log-density profile psi, so
    d_*(w_n, w_m) = |r_n - r_m| ||psi||_* holds exactly; the returned
    proportionality error is the worst pairwise deviation from that line.
    The A_1 characteristics grow as r decreases while the mutual distances
    shrink: a d_*-Cauchy-like sequence leaving every A_1 ball.
    """
    r_values = [float(r) for r in r_values]
    if not r_values:
        raise ParameterError("need at least one exponent")
    margin = -1.0 + 2.0 ** -grid.levels
    for r in r_values:
        if not margin < r < 0:
            raise ParameterError(
                f"exponent {r} outside ({margin:g}, 0): too singular for "
                f"a grid of {grid.levels} levels"
            )
    if any(b > a for a, b in zip(r_values, r_values[1:])):
        raise ParameterError("exponents must be decreasing")
    psi = log_power_profile(grid)
    profile_bmo = bmo_norm(psi, shifted=shifted).value
    members = [exp_weight(psi, r) for r in r_values]
    distances = {}
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            distances[i, j] = d_star(members[i], members[j], shifted=shifted)
    error = max(
        (
            abs(dist - abs(r_values[i] - r_values[j]) * profile_bmo)
            for (i, j), dist in distances.items()
        ),
        default=0.0,
    )
    rows = []
    for i, r in enumerate(r_values):
        rows.append(
            NoncompletenessRow(
                n=i + 1,
                r=r,
                d_star_to_next=distances.get((i, i + 1), math.nan),
                a1_char=a1_characteristic(members[i], shifted=shifted).value,
            )
        )
    return NoncompletenessResult(tuple(rows), profile_bmo, error)


def convexity_check(
    u: Weight, v: Weight, t: float, p: float, shifted: bool = False
) -> tuple[float, float, bool]:
    """Geometric interpolation never beats the endpoint characteristics."""
    if not 0.0 <= t <= 1.0:
        raise RangeError(f"t must lie in [0,1], got {t}")
    if not p >= 1:
        raise ParameterError(f"p must be >= 1, got {p}")

    def char_of(w: Weight) -> float:
        if p == 1:
            return a1_characteristic(w, shifted=shifted).value
        return ap_characteristic(w, p, shifted=shifted).value

    lhs = char_of(holder_interpolant(u, v, t))
    rhs = char_of(u) ** t * char_of(v) ** (1.0 - t)
    return lhs, rhs, lhs <= rhs + 1e-10


def duality_check(
    w: Weight, p: float, shifted: bool = False
) -> tuple[float, float, bool]:
    """[w^(1-p')]_{A_p'} against ([w]_{A_p})^(p'-1): exact per interval."""
    if not p > 1:
        raise ParameterError(f"p must be > 1, got {p}")
    conjugate = p / (p - 1.0)
    lhs = ap_characteristic(dual_weight(w, p), conjugate, shifted=shifted).value
    rhs = ap_characteristic(w, p, shifted=shifted).value ** (conjugate - 1.0)
    return lhs, rhs, abs(lhs - rhs) <= 1e-9 * rhs
