"""Muckenhoupt characteristics, BMO-type norms, and the d_* metric on weights.

Definitions (all suprema over the grid's interval family, dyadic by default,
optionally dyadic plus half-shifted; ties broken by canonical order):

    [w]_{A_p}   = max_I (avg_I w) * (avg_I w^{1-p'})^(p-1),  p' = p/(p-1)
    [w]_{A_1}   = max_x (M w)(x) / w(x),  M the family maximal operator
    [w]_{A_inf} = max_I (avg_I w) / exp(avg_I log w)
    ||f||_*     = max_I avg_I |f - avg_I f|          (BMO norm)
    blo(f)      = max_I (avg_I f - min_{cells in I} f)
    d_*(u, v)   = || log u - log v ||_*

Weights are strictly positive cell functions.  Proportional weights are the
same point of the metric space; the canonical representative has geometric
mean one over [0,1) ("normalized").  All characteristics are invariant under
scaling, so they are well defined on classes.

Interval maxima are computed level by level with vectorized block means; the
reported witness is re-evaluable through the prefix-table ``average`` path
and agrees with the reported value to a few ulp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError, RangeError
from .grid import (
    Grid,
    GridFunction,
    Interval,
    LevelBlock,
    average,
    family_blocks,
    grid_function,
)

# A BMO-norm argument is just a finite real cell function.
BmoFunction = GridFunction

FAMILY_DYADIC = "dyadic"
FAMILY_SHIFTED = "dyadic+shifted"

# Exponent guard: stay well inside float64 range when exponentiating.
_EXP_GUARD = 700.0


def _family_name(shifted: bool) -> str:
    return FAMILY_SHIFTED if shifted else FAMILY_DYADIC


class Weight:
    """Strictly positive cell values on a dyadic grid; immutable."""

    __slots__ = ("grid", "values", "normalized", "_function", "_log_function")

    def __init__(self, grid: Grid, values, normalized: bool = False) -> None:
        arr = np.asarray(values, dtype=np.float64).copy()
        if arr.shape != (grid.cells,):
            raise ParameterError(
                f"expected {grid.cells} cell values, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
            raise ParameterError("weight values must be finite and > 0")
        if normalized:
            geo = float(np.mean(np.log(arr)))
            if abs(math.expm1(geo)) > 1e-12:
                raise ParameterError(
                    f"normalized weight has geometric mean exp({geo:g}) != 1"
                )
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr
        self.normalized = normalized
        self._function = None
        self._log_function = None

    def as_function(self) -> GridFunction:
        if self._function is None:
            self._function = GridFunction(self.grid, self.values)
        return self._function

    def log(self) -> GridFunction:
        if self._log_function is None:
            self._log_function = GridFunction(self.grid, np.log(self.values))
        return self._log_function

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Weight):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    def __hash__(self) -> None:
        raise TypeError("Weight is not hashable")


def make_weight(grid: Grid, values) -> Weight:
    return Weight(grid, values)


def unit_weight(grid: Grid) -> Weight:
    """The constant weight 1, the base point of the metric space."""
    return Weight(grid, np.ones(grid.cells), normalized=True)


def normalize_weight(w: Weight) -> Weight:
    """The geometric-mean-one representative of w's proportionality class."""
    if w.normalized:
        return w
    log_vals = np.log(w.values)
    log_vals -= log_vals.mean()
    return Weight(w.grid, np.exp(log_vals), normalized=True)


def _require_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise ParameterError("arguments live on different grids")


@dataclass(frozen=True)
class CharacteristicReport:
    """A supremum-type quantity with the interval attaining it.

    ``value`` is the max over the stated family; ``witness`` is the first
    interval in canonical order attaining it (for A_1, the deepest interval
    realizing the maximal average at the arg-max cell).
    """

    kind: str
    value: float
    witness: Interval
    family: str
    p: Optional[float] = None


def _max_over_family(grid: Grid, shifted: bool, block_values):
    best = -math.inf
    witness = None
    for blk in family_blocks(grid, shifted):
        vals = block_values(blk)
        row = int(np.argmax(vals))
        top = float(vals[row])
        if top > best:
            best = top
            witness = blk.interval(row)
    return best, witness


def ap_characteristic(w: Weight, p: float, shifted: bool = False) -> CharacteristicReport:
    """[w]_{A_p} over the interval family, with its witness interval."""
    if not p > 1:
        raise ParameterError(f"A_p characteristic requires p > 1, got {p}")
    dual_exponent = 1.0 - p / (p - 1.0)
    dual = w.values**dual_exponent

    def block_values(blk: LevelBlock) -> np.ndarray:
        w_means = blk.view(w.values).mean(axis=1)
        dual_means = blk.view(dual).mean(axis=1)
        return w_means * dual_means ** (p - 1.0)

    value, witness = _max_over_family(w.grid, shifted, block_values)
    return CharacteristicReport("ap", value, witness, _family_name(shifted), p=p)


def ainfty_characteristic(w: Weight, shifted: bool = False) -> CharacteristicReport:
    """[w]_{A_inf}: arithmetic over geometric interval means."""
    log_vals = w.log().values

    def block_values(blk: LevelBlock) -> np.ndarray:
        w_means = blk.view(w.values).mean(axis=1)
        log_means = blk.view(log_vals).mean(axis=1)
        return w_means * np.exp(-log_means)

    value, witness = _max_over_family(w.grid, shifted, block_values)
    return CharacteristicReport("ainfty", value, witness, _family_name(shifted))


def a1_characteristic(w: Weight, shifted: bool = False) -> CharacteristicReport:
    """[w]_{A_1} = max_x (Mw)(x)/w(x) over the family maximal function.

    The witness is the deepest family interval whose average realizes Mw at
    the arg-max cell; on that interval the cell value at the arg-max cell is
    also the minimum, so value = (avg_I w)/(min_I w) holds on the witness.
    """
    n = w.grid.cells
    best_avg = np.full(n, -math.inf)
    best_level = np.full(n, -1, dtype=np.int64)
    best_shifted = np.zeros(n, dtype=bool)
    for blk in family_blocks(w.grid, shifted):
        means = blk.view(w.values).mean(axis=1)
        sl = slice(blk.start, blk.start + blk.rows * blk.width)
        expanded = np.repeat(means, blk.width)
        take = (expanded > best_avg[sl]) | (
            (expanded == best_avg[sl]) & (blk.level > best_level[sl])
        )
        best_avg[sl] = np.where(take, expanded, best_avg[sl])
        best_level[sl] = np.where(take, blk.level, best_level[sl])
        best_shifted[sl] = np.where(take, blk.shifted, best_shifted[sl])
    ratios = best_avg / w.values
    cell = int(np.argmax(ratios))
    level = int(best_level[cell])
    if best_shifted[cell]:
        width = n >> level
        index = (cell - (width >> 1)) // width
        witness = Interval(level, int(index), shifted=True)
    else:
        witness = Interval(level, cell >> (w.grid.levels - level))
    return CharacteristicReport(
        "a1", float(ratios[cell]), witness, _family_name(shifted)
    )


def bmo_norm(f: BmoFunction, shifted: bool = False) -> CharacteristicReport:
    """||f||_*: the largest mean oscillation over the family."""
    if np.iscomplexobj(f.values):
        raise ParameterError("BMO norm is defined for real cell functions")

    def block_values(blk: LevelBlock) -> np.ndarray:
        rows = blk.view(f.values)
        means = rows.mean(axis=1)
        return np.abs(rows - means[:, None]).mean(axis=1)

    value, witness = _max_over_family(f.grid, shifted, block_values)
    return CharacteristicReport("bmo", value, witness, _family_name(shifted))


def blo_constant(f: BmoFunction, shifted: bool = False) -> CharacteristicReport:
    """Largest (interval mean minus interval min) over the family."""
    if np.iscomplexobj(f.values):
        raise ParameterError("BLO constant is defined for real cell functions")

    def block_values(blk: LevelBlock) -> np.ndarray:
        rows = blk.view(f.values)
        return rows.mean(axis=1) - rows.min(axis=1)

    value, witness = _max_over_family(f.grid, shifted, block_values)
    return CharacteristicReport("blo", value, witness, _family_name(shifted))


def d_star(u: Weight, v: Weight, shifted: bool = False) -> float:
    """The metric d_*(u,v) = ||log u - log v||_* on weight classes."""
    _require_same_grid(u, v)
    diff = GridFunction(u.grid, u.log().values - v.log().values)
    return bmo_norm(diff, shifted=shifted).value


# Per-interval re-evaluators; these go through the prefix-table ``average``
# path, independent of the block scan that found the witness.


def ap_on(w: Weight, interval: Interval, p: float) -> float:
    if not p > 1:
        raise ParameterError(f"A_p requires p > 1, got {p}")
    dual_exponent = 1.0 - p / (p - 1.0)
    dual = grid_function(w.grid, w.values**dual_exponent)
    return average(w.as_function(), interval) * average(dual, interval) ** (p - 1.0)


def ainfty_on(w: Weight, interval: Interval) -> float:
    return average(w.as_function(), interval) * math.exp(
        -average(w.log(), interval)
    )


def a1_on(w: Weight, interval: Interval) -> float:
    start, stop = interval.cell_span(w.grid)
    return average(w.as_function(), interval) / float(w.values[start:stop].min())


def oscillation_on(f: BmoFunction, interval: Interval) -> float:
    mean = average(f, interval)
    dev = GridFunction(f.grid, np.abs(f.values - mean))
    return average(dev, interval)


def blo_on(f: BmoFunction, interval: Interval) -> float:
    start, stop = interval.cell_span(f.grid)
    return average(f, interval) - float(f.values[start:stop].min())


# Constructors.


def power_cell_means(alpha: float, grid: Grid) -> np.ndarray:
    """Exact means of x^alpha over the cells, before any normalization.

    Cell [a,b) has mean (b^(a+1) - a^(a+1)) / ((alpha+1)(b-a)); the first
    cell's mean is finite for every alpha > -1.  The difference is formed in
    extended precision because adjacent powers nearly cancel deep in [0,1).
    """
    if not alpha > -1:
        raise ParameterError(
            f"power weight needs alpha > -1 for an integrable density, got {alpha}"
        )
    edges = np.arange(grid.cells + 1, dtype=np.longdouble) / grid.cells
    powers = edges ** (np.longdouble(alpha) + 1)
    means = np.diff(powers) * (grid.cells / (np.longdouble(alpha) + 1))
    return means.astype(np.float64)


def power_weight(alpha: float, grid: Grid) -> Weight:
    """The weight with cell values the exact means of x^alpha, normalized."""
    return normalize_weight(Weight(grid, power_cell_means(alpha, grid)))


def log_power_profile(grid: Grid) -> BmoFunction:
    """Exact cell means of log x: the common log-density of all power weights.

    The mean of log over [a,b) is (b(log b - 1) - a(log a - 1))/(b-a), with
    the a=0 limit log b - 1.  Exponentiating r times this profile gives a
    family whose pairwise d_* distances are exactly proportional to |dr|.
    """
    edges = np.arange(grid.cells + 1, dtype=np.float64) / grid.cells
    antideriv = np.zeros(grid.cells + 1)
    antideriv[1:] = edges[1:] * (np.log(edges[1:]) - 1.0)
    return GridFunction(grid, np.diff(antideriv) * grid.cells)


def exp_weight(f: BmoFunction, lam: float) -> Weight:
    """The normalized weight e^(lam * f)."""
    if np.iscomplexobj(f.values):
        raise ParameterError("exp_weight requires a real exponent function")
    exponent = lam * f.values
    if np.max(np.abs(exponent), initial=0.0) > _EXP_GUARD:
        raise RangeError(f"exp_weight overflow: |lambda*f| exceeds {_EXP_GUARD:g}")
    centered = exponent - exponent.mean()
    if np.max(np.abs(centered), initial=0.0) > _EXP_GUARD:
        raise RangeError("exp_weight overflow after centering")
    return Weight(f.grid, np.exp(centered), normalized=True)


def holder_interpolant(u: Weight, v: Weight, t: float) -> Weight:
    """The normalized geometric interpolant u^t v^(1-t)."""
    _require_same_grid(u, v)
    if not 0.0 <= t <= 1.0:
        raise RangeError(f"interpolation parameter t must lie in [0,1], got {t}")
    log_vals = t * u.log().values + (1.0 - t) * v.log().values
    log_vals -= log_vals.mean()
    return Weight(u.grid, np.exp(log_vals), normalized=True)


def dual_weight(w: Weight, p: float) -> Weight:
    """The normalized dual w^(1-p'), the A_{p'} partner of w."""
    if not p > 1:
        raise ParameterError(f"dual weight requires p > 1, got {p}")
    exponent = 1.0 - p / (p - 1.0)
    log_vals = exponent * w.log().values
    log_vals -= log_vals.mean()
    return Weight(w.grid, np.exp(log_vals), normalized=True)


def weight_ratio(w: Weight, w0: Weight) -> Weight:
    """Cell-wise w/w0 as a weight (not normalized)."""
    _require_same_grid(w, w0)
    return Weight(w.grid, w.values / w0.values)


def normalize_mean_ratio(w: Weight, w0: Weight, interval: Interval) -> Weight:
    """Scale w so that the mean of w/w0 over the interval is exactly one."""
    _require_same_grid(w, w0)
    ratio = grid_function(w.grid, w.values / w0.values)
    scale = 1.0 / average(ratio, interval)
    return Weight(w.grid, scale * w.values)


def lemma_gap_check(w: Weight, w0: Weight, interval: Interval) -> tuple[float, float]:
    """Quadratic-distance lower bound against the relative A_2 excess.

    With avg_I(w/w0) = 1, returns
        lhs = avg_I(w0/w) + 1 - 2 avg_I sqrt(w0/w)
        rhs = [w/w0]_{A_2} - 1
    and the inequality lhs <= rhs holds for every such pair.
    """
    _require_same_grid(w, w0)
    inv_ratio = w0.values / w.values
    ratio_fn = grid_function(w.grid, 1.0 / inv_ratio)
    if abs(average(ratio_fn, interval) - 1.0) > 1e-9:
        raise ParameterError(
            "lemma_gap_check requires avg_I(w/w0) = 1; "
            "apply normalize_mean_ratio first"
        )
    lhs = (
        average(grid_function(w.grid, inv_ratio), interval)
        + 1.0
        - 2.0 * average(grid_function(w.grid, np.sqrt(inv_ratio)), interval)
    )
    rhs = ap_characteristic(weight_ratio(w, w0), 2.0).value - 1.0
    return lhs, rhs


def gj_lambda_star(
    f: BmoFunction, c_max: float, shifted: bool = False, tol: float = 1e-6
) -> float:
    """Largest lambda with [e^(lambda f)]_{A_2} <= c_max, by bisection.

    Returns +inf when the constraint never binds (constant f, or the
    characteristic still below c_max at lambda = 1e6).  Absolute tolerance
    ``tol`` on the returned threshold.
    """
    if not c_max > 1:
        raise ParameterError(f"c_max must exceed 1, got {c_max}")
    if np.iscomplexobj(f.values):
        raise ParameterError("gj_lambda_star requires a real function")
    if np.all(f.values == f.values[0]):
        return math.inf

    def feasible(lam: float) -> bool:
        try:
            w = exp_weight(f, lam)
        except RangeError:
            return False
        return ap_characteristic(w, 2.0, shifted=shifted).value <= c_max

    cap = 1e6
    if feasible(cap):
        return math.inf
    lo, hi = 0.0, 1.0
    while feasible(hi):
        lo = hi
        hi *= 2.0
        if hi >= cap:
            hi = cap
            break
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def random_weight(grid: Grid, seed: int, amplitude: float = 1.0) -> Weight:
    """Reproducible non-degenerate weight: uniform log values, one smoothing.

    Log values are i.i.d. uniform in [-amplitude, amplitude]; each sibling
    pair is then replaced by its average so the deepest-level detail is zero.
    """
    if amplitude < 0:
        raise RangeError(f"amplitude must be >= 0, got {amplitude}")
    rng = np.random.default_rng(seed)
    log_vals = rng.uniform(-amplitude, amplitude, grid.cells)
    pairs = log_vals.reshape(-1, 2).mean(axis=1)
    log_vals = np.repeat(pairs, 2)
    log_vals -= log_vals.mean()
    return Weight(grid, np.exp(log_vals), normalized=True)


# Text serialization: bit-exact float64 round trip at 17 significant digits.


def save_weight(w: Weight, path) -> None:
    lines = [f"muckweight v1 levels={w.grid.levels} normalized={int(w.normalized)}"]
    lines.extend(format(v, ".17g") for v in w.values)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def load_weight(path) -> Weight:
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise ParameterError(f"{path}: empty weight file")
    fields = lines[0].split()
    if len(fields) != 4 or fields[0] != "muckweight" or fields[1] != "v1":
        raise ParameterError(f"{path}: not a muckweight v1 file")
    try:
        levels = int(fields[2].removeprefix("levels="))
        normalized = int(fields[3].removeprefix("normalized="))
    except ValueError as exc:
        raise ParameterError(f"{path}: malformed header: {lines[0]!r}") from exc
    grid = Grid(levels)
    body = [line for line in lines[1:] if line]
    if len(body) != grid.cells:
        raise ParameterError(
            f"{path}: expected {grid.cells} values, found {len(body)}"
        )
    values = np.array([float(line) for line in body])
    return Weight(grid, values, normalized=bool(normalized))
