"""The deterministic one-sided reflection problem on [0, 1].

Given a sampled path y with y(0) >= 0, split it as x = y + k with x >= 0,
k nondecreasing, k(0) = 0 and k minimal. The minimal pusher has the closed
running-minimum form k_t = -min(0, inf_{s<=t} y_s), evaluated here at grid
knots in a single pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paths import TimeGrid


@dataclass(frozen=True)
class SkorohodPair:
    """Reflected path x and minimal pusher k on a common grid (x = y + k)."""

    grid: TimeGrid
    x: np.ndarray
    k: np.ndarray


def skorohod_map(y: np.ndarray, grid: TimeGrid) -> SkorohodPair:
    """Reflect ``y`` at 0 by the running-minimum construction.

    Whenever k increases between knots, the new running minimum is set at the
    right knot and x there is exactly 0, so the discrete complementarity sum
    below is exactly zero.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size != grid.knots.size:
        raise ValueError("y must be sampled on the grid knots")
    if y[0] < 0.0:
        raise ValueError(f"y(0) must be >= 0, got {y[0]!r}")
    k = -np.minimum.accumulate(np.minimum(y, 0.0))
    x = y + k
    return SkorohodPair(grid, x, k)


def pusher_leakage(x: np.ndarray, k: np.ndarray, band: float) -> tuple[float, float]:
    """Pusher mass carried while the state sits above ``band``.

    Returns ``(leaked, total)`` where ``leaked`` sums the increments of k
    over steps whose landing state ``x[i+1]`` exceeds ``band`` and ``total``
    is k at the final knot. For outputs of :func:`skorohod_map` and of the
    projected solver the leaked mass is exactly zero for any band >= 0; it
    becomes informative for paths assembled by interpolation, where pusher
    increments of one source path can land while the blended state is off the
    boundary.
    """
    dk = np.diff(k)
    leaked = float(dk[(dk > 0.0) & (x[1:] > band)].sum())
    return leaked, float(k[-1])


def default_band(sup_sigma: float, dt: float) -> float:
    """Complementarity reporting band for solver paths: 3 * ||sigma|| * sqrt(h)."""
    return 3.0 * sup_sigma * np.sqrt(dt)


def exact_input_band(y: np.ndarray) -> float:
    """Reporting band for exact (noise-free) inputs, at round-off scale."""
    return 1e-12 * (1.0 + float(np.abs(y).max()))
