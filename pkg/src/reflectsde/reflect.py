"""Reflected SDE solver: one-point motion, flows over an initial-value
lattice, and the running-infimum cross-check of the accumulated local time.

The recursion is the projected Euler scheme in Ito form with drift
0.5 * sigma * sigma'. Projection keeps X >= 0 with exact step-level
complementarity (the local time only grows on steps whose projected landing
state is exactly 0), and for constant sigma the output coincides bit for bit
with the running-minimum reflection of the free Euler path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet, ito_drift
from .kernels import ObservedSolve, solve_observed_batch, solve_reflected_batch
from .paths import BrownianPath, TimeGrid


@dataclass(frozen=True)
class ReflectedPath:
    """State path X and local time L for one initial value.

    Invariants (all testable at knot level): X >= 0, L nondecreasing from 0,
    L only grows on steps landing exactly at 0, and X telescopes as
    x0 + sum sigma(X) dB + sum drift dt + L up to accumulated round-off.
    """

    grid: TimeGrid
    x0: float
    state: np.ndarray
    local_time: np.ndarray
    brownian_key: tuple[int, int]


@dataclass(frozen=True)
class FlowField:
    """Solutions from every lattice initial value, driven by one path."""

    grid: TimeGrid
    x_lattice: np.ndarray
    state: np.ndarray
    local_time: np.ndarray
    brownian_key: tuple[int, int]

    @property
    def spacing(self) -> float:
        return float(np.diff(self.x_lattice).max())

    def path(self, i: int) -> ReflectedPath:
        return ReflectedPath(
            self.grid,
            float(self.x_lattice[i]),
            self.state[i],
            self.local_time[i],
            self.brownian_key,
        )


def _uniform_dt(grid: TimeGrid) -> float:
    dt = grid.dt
    if dt.max() - dt.min() > 1e-15:
        raise ValueError("solver requires a uniform fine grid")
    return float(dt[0])


def solve_reflected(x0: float, c: CoefficientSet, b: BrownianPath) -> ReflectedPath:
    """Solve one reflected path from ``x0 >= 0`` along ``b``."""
    if x0 < 0:
        raise ValueError(f"x0 must be >= 0, got {x0}")
    dt = _uniform_dt(b.grid)
    X, L = solve_reflected_batch(
        np.array([x0], dtype=np.float64),
        b.increments[None, :],
        dt,
        c.kernel_code,
        c.kernel_param,
    )
    return ReflectedPath(b.grid, float(x0), X[0], L[0], b.key)


def solve_flow(x_lattice, c: CoefficientSet, b: BrownianPath) -> FlowField:
    """Solve one path per lattice point, all sharing the driving noise."""
    lat = np.ascontiguousarray(x_lattice, dtype=np.float64)
    if lat.ndim != 1 or lat.size < 1:
        raise ValueError("lattice must be a nonempty 1-d array")
    if np.any(np.diff(lat) <= 0):
        raise ValueError("lattice must be strictly increasing")
    dt = _uniform_dt(b.grid)
    db = np.broadcast_to(b.increments, (lat.size, b.increments.size))
    X, L = solve_reflected_batch(lat, db, dt, c.kernel_code, c.kernel_param)
    return FlowField(b.grid, lat, X, L, b.key)


def solve_observed(
    x_values, c: CoefficientSet, b: BrownianPath, obs_idx
) -> ObservedSolve:
    """Batch solve that records partition-knot snapshots only.

    Used by the study harness when full paths are not needed: returns state,
    local time, the left-point Ito sums of sigma(X) and the fine trapezoid
    integrals of (sigma * sigma')(X) and sigma(X), at the given knot indices.
    """
    xs = np.ascontiguousarray(x_values, dtype=np.float64)
    dt = _uniform_dt(b.grid)
    db = np.broadcast_to(b.increments, (xs.size, b.increments.size))
    return solve_observed_batch(xs, db, dt, c.kernel_code, c.kernel_param, obs_idx)


def bracket(lattice: np.ndarray, z: float) -> tuple[int, int, float]:
    """Indices of the lattice cell containing z and the interpolation weight."""
    if z < lattice[0] or z > lattice[-1]:
        raise ValueError(
            f"z={z!r} outside the lattice range [{lattice[0]}, {lattice[-1]}]"
        )
    i = int(np.searchsorted(lattice, z, side="right")) - 1
    if i >= lattice.size - 1:
        i = lattice.size - 2
    w = (z - lattice[i]) / (lattice[i + 1] - lattice[i])
    return i, i + 1, float(w)


def evaluate_flow_at(f: FlowField, z: float) -> ReflectedPath:
    """Path at initial value z, linear in x between bracketing lattice paths.

    A z equal to a lattice point returns that exact path.
    """
    lat = f.x_lattice
    exact = np.nonzero(lat == z)[0]
    if exact.size:
        return f.path(int(exact[0]))
    il, ir, w = bracket(lat, z)
    X = (1.0 - w) * f.state[il] + w * f.state[ir]
    L = (1.0 - w) * f.local_time[il] + w * f.local_time[ir]
    return ReflectedPath(f.grid, float(z), X, L, f.brownian_key)


def local_time_via_reflection(
    rp: ReflectedPath, c: CoefficientSet, b: BrownianPath
) -> np.ndarray:
    """Running-infimum representation of the local time.

    Rebuilds the free (unreflected) path from the already-solved state inside
    the integrands and takes minus the running minimum of its negative part.
    For constant sigma this reproduces the solver's L exactly; for state
    dependent sigma the gap is a self-consistency measure that shrinks with
    the step size.
    """
    dt = _uniform_dt(b.grid)
    X = rp.state
    drift = ito_drift(c, X[:-1]) * dt
    free = np.empty_like(X)
    free[0] = rp.x0
    np.cumsum(c.sigma(X[:-1]) * b.increments + drift, out=free[1:])
    free[1:] += rp.x0
    return -np.minimum.accumulate(np.minimum(free, 0.0))
