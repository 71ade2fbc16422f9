"""Dyadic discretization of [0,1) and a uniform grid on the circle.

Conventions
-----------
A grid of depth ``N`` splits [0,1) into ``2**N`` half-open cells of width
``2**-N``; cell ``j`` is ``[j*2**-N, (j+1)*2**-N)``.  Dyadic intervals live at
levels ``l = 0..N``: the interval ``(l, k)`` is ``[k*2**-l, (k+1)*2**-l)`` and
covers cells ``k*2**(N-l) .. (k+1)*2**(N-l) - 1``.

Half-shifted intervals exist at levels ``l = 0..N-1``: member ``k`` is the
dyadic interval ``(l, k)`` translated right by half its length,
``[ (k+1/2)*2**-l, (k+3/2)*2**-l )``, clipped at 1.  The last member of each
level is clipped to half measure; the level-``l`` shifted members tile
``[2**-(l+1), 1)``.  A grid of depth N carries ``2**(N+1) - 1`` dyadic and
``2**N - 1`` shifted intervals.

Canonical enumeration order is all dyadic intervals by (level, index), then
all shifted intervals by (level, index).  Every supremum-type search in this
package breaks ties by that order.

Interval averages are exact arithmetic means of cell values.  Point queries
go through a prefix-sum table accumulated in extended precision, so sums over
short intervals deep in the grid keep full double accuracy (the parent
average equals the mean of its children's averages to a few ulp at any
supported depth).

On the circle, ``CircleGrid(M)`` samples [0,1) at ``M`` equispaced nodes with
``M`` a power of two; weights on the circle reuse the interval machinery via
``CircleGrid.as_grid``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union, overload

import numpy as np

from .errors import ParameterError, RangeError

MAX_LEVELS = 24


def _validate_levels(levels: int) -> None:
    if not isinstance(levels, (int, np.integer)):
        raise ParameterError(f"levels must be an integer, got {levels!r}")
    if not 1 <= levels <= MAX_LEVELS:
        raise RangeError(f"levels must lie in 1..{MAX_LEVELS}, got {levels}")


@dataclass(frozen=True)
class Grid:
    """Dyadic grid on [0,1) with ``2**levels`` cells."""

    levels: int

    def __post_init__(self) -> None:
        _validate_levels(self.levels)

    @property
    def cells(self) -> int:
        return 1 << self.levels

    @property
    def cell_width(self) -> float:
        return 2.0 ** -self.levels

    def cell_left_edges(self) -> np.ndarray:
        return np.arange(self.cells) * self.cell_width

    def cell_right_edges(self) -> np.ndarray:
        return np.arange(1, self.cells + 1) * self.cell_width


def make_grid(levels: int) -> Grid:
    """Grid of the given depth; levels must lie in 1..24."""
    return Grid(levels)


@dataclass(frozen=True)
class Interval:
    """A dyadic or half-shifted interval, identified by (level, index).

    ``shifted=False``: [index * 2**-level, (index+1) * 2**-level).
    ``shifted=True``: the same interval translated right by 2**-(level+1)
    and clipped at 1, so the last index of each level has half measure.
    """

    level: int
    index: int
    shifted: bool = False

    def __post_init__(self) -> None:
        if self.level < 0 or self.level > MAX_LEVELS:
            raise RangeError(f"interval level out of range: {self.level}")
        if not 0 <= self.index < (1 << self.level):
            raise ParameterError(
                f"interval index {self.index} invalid at level {self.level}"
            )

    @property
    def left(self) -> float:
        shift = 0.5 if self.shifted else 0.0
        return (self.index + shift) * 2.0 ** -self.level

    @property
    def right(self) -> float:
        shift = 0.5 if self.shifted else 0.0
        return min(1.0, (self.index + 1 + shift) * 2.0 ** -self.level)

    @property
    def measure(self) -> float:
        return self.right - self.left

    def children(self) -> tuple["Interval", "Interval"]:
        """Left and right dyadic halves; only dyadic intervals split."""
        if self.shifted:
            raise ParameterError("shifted intervals do not have dyadic children")
        if self.level >= MAX_LEVELS:
            raise RangeError("cannot split below the maximum supported depth")
        return (
            Interval(self.level + 1, 2 * self.index),
            Interval(self.level + 1, 2 * self.index + 1),
        )

    def cell_span(self, grid: Grid) -> tuple[int, int]:
        """Half-open cell index range [start, stop) covered on ``grid``."""
        depth = grid.levels - self.level
        if depth < 0 or (self.shifted and depth < 1):
            raise ParameterError(
                f"interval at level {self.level} (shifted={self.shifted}) "
                f"is too deep for a grid of {grid.levels} levels"
            )
        width = 1 << depth
        start = self.index * width
        if self.shifted:
            start += width >> 1
        stop = min(start + width, grid.cells)
        return start, stop


class IntervalFamily(Sequence[Interval]):
    """Immutable, lazily materialized canonical interval enumeration.

    Length is O(1); members are built on demand, so the full family is
    addressable even at depth 24 without allocating 2**25 objects.
    """

    def __init__(self, grid: Grid, shifted: bool):
        self._levels = grid.levels
        self._shifted = shifted
        self._dyadic_count = (1 << (grid.levels + 1)) - 1
        self._shifted_count = (1 << grid.levels) - 1 if shifted else 0

    def __len__(self) -> int:
        return self._dyadic_count + self._shifted_count

    @overload
    def __getitem__(self, pos: int) -> Interval: ...

    @overload
    def __getitem__(self, pos: slice) -> Sequence[Interval]: ...

    def __getitem__(self, pos: Union[int, slice]):
        if isinstance(pos, slice):
            return [self[i] for i in range(*pos.indices(len(self)))]
        if pos < 0:
            pos += len(self)
        if not 0 <= pos < len(self):
            raise IndexError(pos)
        if pos < self._dyadic_count:
            # Positions 0 .. 2**(N+1)-2 are dyadic; level l starts at 2**l - 1.
            level = (pos + 1).bit_length() - 1
            return Interval(level, pos - ((1 << level) - 1))
        rem = pos - self._dyadic_count
        level = (rem + 1).bit_length() - 1
        return Interval(level, rem - ((1 << level) - 1), shifted=True)

    def __iter__(self) -> Iterator[Interval]:
        for level in range(self._levels + 1):
            for index in range(1 << level):
                yield Interval(level, index)
        if self._shifted:
            for level in range(self._levels):
                for index in range(1 << level):
                    yield Interval(level, index, shifted=True)

    def position(self, interval: Interval) -> int:
        """Canonical position of ``interval`` in this family."""
        base = (1 << interval.level) - 1 + interval.index
        if not interval.shifted:
            return base
        if not self._shifted:
            raise ParameterError("family does not include shifted intervals")
        return self._dyadic_count + base


def dyadic_intervals(grid: Grid, shifted: bool = False) -> IntervalFamily:
    """All grid intervals in canonical order (dyadic, then shifted if asked)."""
    return IntervalFamily(grid, shifted)


class GridFunction:
    """Cell values of a function on a dyadic grid; immutable once built.

    Values are float64 by default; complex128 is accepted for circle-operator
    work.  All values must be finite.
    """

    __slots__ = ("grid", "values", "_prefix")

    def __init__(self, grid: Grid, values) -> None:
        arr = np.asarray(values)
        if arr.shape != (grid.cells,):
            raise ParameterError(
                f"expected {grid.cells} cell values, got shape {arr.shape}"
            )
        if np.iscomplexobj(arr):
            arr = arr.astype(np.complex128, copy=True)
        else:
            arr = arr.astype(np.float64, copy=True)
        if not np.all(np.isfinite(arr)):
            raise ParameterError("grid function values must be finite")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr
        self._prefix = None

    def _prefix_table(self) -> np.ndarray:
        # Extended-precision running sums; entry j is the sum of cells < j.
        if self._prefix is None:
            table = np.zeros(self.grid.cells + 1, dtype=np.longdouble)
            np.cumsum(self.values.astype(np.longdouble), out=table[1:])
            table.setflags(write=False)
            self._prefix = table
        return self._prefix

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridFunction):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    def __hash__(self) -> None:
        raise TypeError("GridFunction is not hashable")


def grid_function(grid: Grid, values) -> GridFunction:
    return GridFunction(grid, values)


def average(f: GridFunction, interval: Interval) -> float:
    """Exact mean of ``f`` over ``interval``, via the prefix table in O(1)."""
    start, stop = interval.cell_span(f.grid)
    table = f._prefix_table()
    total = table[stop] - table[start]
    return float(total / (stop - start))


@dataclass(frozen=True)
class LevelBlock:
    """A run of same-level family intervals viewed as rows of a matrix.

    Vectorized interval scans reshape the cell array into (rows, width)
    blocks, one per level (shifted levels contribute a main block and a
    clipped half-width tail block).
    """

    level: int
    shifted: bool
    first_index: int
    start: int
    rows: int
    width: int

    def view(self, cells: np.ndarray) -> np.ndarray:
        stop = self.start + self.rows * self.width
        return cells[self.start : stop].reshape(self.rows, self.width)

    def interval(self, row: int) -> Interval:
        return Interval(self.level, self.first_index + row, self.shifted)


def family_blocks(grid: Grid, shifted: bool) -> Iterator[LevelBlock]:
    """The interval family as level blocks, in canonical order."""
    n = grid.cells
    for level in range(grid.levels + 1):
        yield LevelBlock(level, False, 0, 0, 1 << level, n >> level)
    if shifted:
        for level in range(grid.levels):
            width = n >> level
            half = width >> 1
            rows = (1 << level) - 1
            if rows:
                yield LevelBlock(level, True, 0, half, rows, width)
            # Last member of the level is clipped at 1 to half width.
            yield LevelBlock(level, True, rows, half + rows * width, 1, half)


@dataclass(frozen=True)
class CircleGrid:
    """Uniform grid on the circle [0,1): ``points`` equispaced nodes.

    ``points`` must be a power of two and at least 4 so that the grid doubles
    as a dyadic interval grid for weight characteristics.
    """

    points: int

    def __post_init__(self) -> None:
        if not isinstance(self.points, (int, np.integer)):
            raise ParameterError(f"points must be an integer, got {self.points!r}")
        if self.points < 4 or self.points & (self.points - 1):
            raise RangeError(
                f"points must be a power of two >= 4, got {self.points}"
            )

    @property
    def levels(self) -> int:
        return self.points.bit_length() - 1

    def nodes(self) -> np.ndarray:
        return np.arange(self.points) / self.points

    def as_grid(self) -> Grid:
        """The interval grid whose cells are the circle's arcs."""
        return Grid(self.levels)


def make_circle(points: int) -> CircleGrid:
    """Circle grid with the given number of nodes (power of two, >= 4)."""
    return CircleGrid(points)
