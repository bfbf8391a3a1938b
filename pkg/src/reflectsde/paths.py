"""Time grids, dyadic partitions and reproducible Brownian paths on [0, 1].

Brownian increments are drawn from a counter-based Philox stream keyed by
``(seed, path_index)``, so regenerating a path is bit-identical and does not
depend on how many other paths were generated, in which order, or on how
work is spread over workers.

Increments are rounded to the fixed binary lattice ``2**-32`` before use.
All knot values, coarse increments and their sums are then integers in units
of the lattice spacing (far below 2**53 in magnitude), which makes increment
aggregation exact: coarse increments over any partition sum bit-exactly to
``B_1 - B_0``, and refining a dyadic partition splits each increment into two
parts whose float sum is exact. The distributional distortion of the
rounding is below 1.2e-10 per increment, orders of magnitude under Monte
Carlo resolution at any feasible path count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

#: spacing of the binary lattice Brownian increments are rounded to
INCREMENT_QUANTUM = 2.0**-32

_INV_QUANTUM = 2.0**32
_U53 = 2.0**-53


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing knots on [0, 1] with first knot 0 and last knot 1."""

    knots: np.ndarray

    def __post_init__(self):
        k = _readonly(self.knots)
        object.__setattr__(self, "knots", k)
        if k.ndim != 1 or k.size < 2:
            raise ValueError("a time grid needs at least two knots")
        if k[0] != 0.0 or k[-1] != 1.0:
            raise ValueError("time grid must start at 0 and end at 1")
        if not np.all(np.diff(k) > 0):
            raise ValueError("time grid knots must be strictly increasing")

    @property
    def n_intervals(self) -> int:
        return self.knots.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.knots)

    def index_of_time(self, t: float) -> int:
        """Knot index of time ``t``; raises if t is not a knot."""
        i = int(np.searchsorted(self.knots, t))
        if i >= self.knots.size or self.knots[i] != t:
            raise ValueError(f"t={t!r} is not a knot of this grid")
        return i


@dataclass(frozen=True)
class Partition:
    """A sub-grid of a fine grid, stored as knot indices into the fine grid."""

    fine: TimeGrid
    indices: np.ndarray

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        n = self.fine.n_intervals
        if idx.size < 2 or idx[0] != 0 or idx[-1] != n:
            raise ValueError("partition must span the whole grid")
        if not np.all(np.diff(idx) > 0):
            raise ValueError("partition indices must be strictly increasing")

    @property
    def knots(self) -> np.ndarray:
        return self.fine.knots[self.indices]

    @property
    def n_intervals(self) -> int:
        return self.indices.size - 1

    @property
    def mesh(self) -> float:
        return float(np.diff(self.knots).max())

    def index_of_time(self, t: float) -> int:
        """Partition-knot index of time ``t``; raises if t is not a knot."""
        k = self.knots
        i = int(np.searchsorted(k, t))
        if i >= k.size or k[i] != t:
            raise ValueError(f"t={t!r} is not a knot of this partition")
        return i


@dataclass(frozen=True)
class BrownianPath:
    """One Brownian path sampled on a fine grid.

    ``values[0] == 0`` and ``values[i+1] - values[i] == increments[i]``
    exactly, thanks to the lattice rounding described in the module
    docstring.
    """

    grid: TimeGrid
    values: np.ndarray
    increments: np.ndarray
    seed: int
    path_index: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        object.__setattr__(self, "increments", _readonly(self.increments))
        if self.values.size != self.grid.knots.size:
            raise ValueError("values must have one entry per knot")
        if self.values[0] != 0.0:
            raise ValueError("Brownian path must start at 0")

    @property
    def key(self) -> tuple[int, int]:
        return (self.seed, self.path_index)


def make_fine_grid(n_fine: int) -> TimeGrid:
    """Uniform grid with ``n_fine`` intervals on [0, 1]."""
    if n_fine < 2:
        raise ValueError(f"n_fine must be >= 2, got {n_fine}")
    knots = np.arange(n_fine + 1, dtype=np.float64) / n_fine
    knots[-1] = 1.0
    return TimeGrid(knots)


def make_dyadic_partition(level: int, fine: TimeGrid) -> Partition:
    """Dyadic partition with 2**level intervals, nested in ``fine``.

    Requires 2**level to divide the number of fine intervals so that every
    partition knot is a fine knot.
    """
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    n = fine.n_intervals
    pieces = 1 << level
    if n % pieces != 0:
        raise ValueError(
            f"dyadic level {level} (2^{level} = {pieces} intervals) does not "
            f"divide the fine resolution {n}"
        )
    step = n // pieces
    return Partition(fine, np.arange(0, n + 1, step, dtype=np.int64))


def brownian_increments(seed: int, path_index: int, dt: np.ndarray) -> np.ndarray:
    """Lattice-rounded N(0, dt) increments from the (seed, path_index) stream.

    Uniforms are 53-bit Philox draws mapped to (0, 1) and pushed through the
    inverse normal CDF, then scaled by sqrt(dt) and rounded to the increment
    lattice.
    """
    if seed < 0 or path_index < 0:
        raise ValueError("seed and path_index must be nonnegative")
    key = np.array([seed, path_index], dtype=np.uint64)
    gen = Generator(Philox(key=key))
    raw = gen.integers(0, 1 << 53, size=dt.size, dtype=np.uint64)
    u = (raw.astype(np.float64) + 0.5) * _U53
    z = ndtri(u)
    return np.rint(z * np.sqrt(dt) * _INV_QUANTUM) * INCREMENT_QUANTUM


def sample_brownian(seed: int, path_index: int, grid: TimeGrid) -> BrownianPath:
    """Sample the Brownian path keyed (seed, path_index) on ``grid``."""
    inc = brownian_increments(seed, path_index, grid.dt)
    values = np.empty(grid.knots.size)
    values[0] = 0.0
    np.cumsum(inc, out=values[1:])
    return BrownianPath(grid, values, inc, seed, path_index)


def coarse_increments(b: BrownianPath, pi: Partition) -> np.ndarray:
    """Brownian increments over the intervals of ``pi``.

    Each entry equals the exact sum of the fine increments it covers; the
    full array sums bit-exactly to ``B_1 - B_0``.
    """
    if pi.fine is not b.grid and not np.array_equal(pi.fine.knots, b.grid.knots):
        raise ValueError("partition is not nested in the path's grid")
    return np.diff(b.values[pi.indices])
