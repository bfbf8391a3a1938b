"""Hot time-stepping kernels: numba and pure-NumPy twins.

The projected Euler recursion is sequential in time, so the NumPy versions
vectorise over the batch axis (initial values or paths) and loop over steps,
while the numba versions loop over both. Both twins perform the same
floating-point operations in the same order; tests assert bit equality.

Scheme, per step with state x, local time l and increment db:

    u = x + sigma(x) * db + (0.5 * sigma(x) * sigma'(x)) * dt
    if u < 0:  l += -u; x = 0        (projection deficit becomes local time)
    else:      x = u

The observed variant additionally carries the running left-point Ito sum of
sigma(X), the trapezoid integrals of (sigma * sigma')(X) and sigma(X), and
snapshots everything at a requested set of knot indices. This avoids storing
full paths when only partition-knot data is needed.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ._backend import NUMBA_ENABLED

__all__ = [
    "solve_reflected_batch",
    "solve_observed_batch",
    "ObservedSolve",
    "KERNEL_BACKEND",
]

KERNEL_BACKEND = "numba" if NUMBA_ENABLED else "numpy"


class ObservedSolve(NamedTuple):
    """Snapshots at the observation knots, one row per batch entry."""

    obs_idx: np.ndarray
    x: np.ndarray
    local_time: np.ndarray
    ito: np.ndarray
    quad: np.ndarray
    trap: np.ndarray


# ---------------------------------------------------------------------------
# pure-NumPy twins


def _sigma_np(x, code: int, param: float):
    if code == 0:
        return param, 0.0
    if code == 1:
        return x, 1.0
    if code == 2:
        return 2.0 + np.sin(x), np.cos(x)
    inv = 1.0 / (1.0 + np.maximum(x, 0.0))
    s = np.where(x < 0.0, 1.0 + x - x * x, 2.0 - inv)
    sp = np.where(x < 0.0, 1.0 - 2.0 * x, inv * inv)
    return s, sp


def _solve_full_np(x0s, db, dt, code, param, X, L):
    m, n = db.shape
    x = x0s.astype(np.float64).copy()
    l = np.zeros(m)
    X[:, 0] = x
    L[:, 0] = l
    for i in range(n):
        s, sp = _sigma_np(x, code, param)
        u = x + s * db[:, i] + (0.5 * s * sp) * dt
        neg = u < 0.0
        l = l + np.where(neg, -u, 0.0)
        x = np.where(neg, 0.0, u)
        X[:, i + 1] = x
        L[:, i + 1] = l


def _solve_obs_np(x0s, db, dt, code, param, obs_idx, Xo, Lo, ITO, QUAD, TRAP):
    m, n = db.shape
    half_dt = 0.5 * dt
    x = x0s.astype(np.float64).copy()
    l = np.zeros(m)
    ito = np.zeros(m)
    quad = np.zeros(m)
    trap = np.zeros(m)
    s, sp = _sigma_np(x, code, param)
    k = 0
    if obs_idx[0] == 0:
        Xo[:, 0] = x
        Lo[:, 0] = 0.0
        ITO[:, 0] = 0.0
        QUAD[:, 0] = 0.0
        TRAP[:, 0] = 0.0
        k = 1
    for i in range(n):
        f_old = s
        g_old = s * sp
        u = x + s * db[:, i] + (0.5 * g_old) * dt
        neg = u < 0.0
        l = l + np.where(neg, -u, 0.0)
        x = np.where(neg, 0.0, u)
        ito = ito + f_old * db[:, i]
        s, sp = _sigma_np(x, code, param)
        g_new = s * sp
        quad = quad + (g_old + g_new) * half_dt
        trap = trap + (f_old + s) * half_dt
        if k < obs_idx.size and obs_idx[k] == i + 1:
            Xo[:, k] = x
            Lo[:, k] = l
            ITO[:, k] = ito
            QUAD[:, k] = quad
            TRAP[:, k] = trap
            k += 1


# ---------------------------------------------------------------------------
# numba twins

if NUMBA_ENABLED:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _solve_full_nb(x0s, db, dt, code, param, X, L):  # pragma: no cover
        m, n = db.shape
        for r in range(m):
            x = x0s[r]
            l = 0.0
            X[r, 0] = x
            L[r, 0] = 0.0
            for i in range(n):
                if code == 0:
                    s = param
                    sp = 0.0
                elif code == 1:
                    s = x
                    sp = 1.0
                elif code == 2:
                    s = 2.0 + np.sin(x)
                    sp = np.cos(x)
                else:
                    if x < 0.0:
                        s = 1.0 + x - x * x
                        sp = 1.0 - 2.0 * x
                    else:
                        inv = 1.0 / (1.0 + x)
                        s = 2.0 - inv
                        sp = inv * inv
                u = x + s * db[r, i] + (0.5 * s * sp) * dt
                if u < 0.0:
                    l = l + -u
                    x = 0.0
                else:
                    x = u
                X[r, i + 1] = x
                L[r, i + 1] = l

    @njit(cache=True, nogil=True)
    def _solve_obs_nb(
        x0s, db, dt, code, param, obs_idx, Xo, Lo, ITO, QUAD, TRAP
    ):  # pragma: no cover
        m, n = db.shape
        half_dt = 0.5 * dt
        for r in range(m):
            x = x0s[r]
            l = 0.0
            ito = 0.0
            quad = 0.0
            trap = 0.0
            if code == 0:
                s = param
                sp = 0.0
            elif code == 1:
                s = x
                sp = 1.0
            elif code == 2:
                s = 2.0 + np.sin(x)
                sp = np.cos(x)
            else:
                if x < 0.0:
                    s = 1.0 + x - x * x
                    sp = 1.0 - 2.0 * x
                else:
                    inv = 1.0 / (1.0 + x)
                    s = 2.0 - inv
                    sp = inv * inv
            k = 0
            if obs_idx[0] == 0:
                Xo[r, 0] = x
                Lo[r, 0] = 0.0
                ITO[r, 0] = 0.0
                QUAD[r, 0] = 0.0
                TRAP[r, 0] = 0.0
                k = 1
            for i in range(n):
                f_old = s
                g_old = s * sp
                u = x + s * db[r, i] + (0.5 * g_old) * dt
                if u < 0.0:
                    l = l + -u
                    x = 0.0
                else:
                    x = u
                ito = ito + f_old * db[r, i]
                if code == 0:
                    s = param
                    sp = 0.0
                elif code == 1:
                    s = x
                    sp = 1.0
                elif code == 2:
                    s = 2.0 + np.sin(x)
                    sp = np.cos(x)
                else:
                    if x < 0.0:
                        s = 1.0 + x - x * x
                        sp = 1.0 - 2.0 * x
                    else:
                        inv = 1.0 / (1.0 + x)
                        s = 2.0 - inv
                        sp = inv * inv
                g_new = s * sp
                quad = quad + (g_old + g_new) * half_dt
                trap = trap + (f_old + s) * half_dt
                if k < obs_idx.shape[0] and obs_idx[k] == i + 1:
                    Xo[r, k] = x
                    Lo[r, k] = l
                    ITO[r, k] = ito
                    QUAD[r, k] = quad
                    TRAP[r, k] = trap
                    k += 1


# ---------------------------------------------------------------------------
# dispatchers


def _check_batch(x0s, db):
    x0s = np.ascontiguousarray(x0s, dtype=np.float64)
    db = np.asarray(db, dtype=np.float64)
    if x0s.ndim != 1 or db.ndim != 2 or db.shape[0] != x0s.size:
        raise ValueError("expected x0s of shape (m,) and db of shape (m, n)")
    if np.any(x0s < 0.0):
        bad = float(x0s[x0s < 0.0][0])
        raise ValueError(f"initial values must be >= 0, got {bad}")
    return x0s, db


def solve_reflected_batch(x0s, db, dt: float, code: int, param: float = 0.0):
    """Solve the projected Euler recursion for a batch of initial values.

    Returns full state and local-time paths of shape (m, n+1).
    """
    x0s, db = _check_batch(x0s, db)
    m, n = db.shape
    X = np.empty((m, n + 1))
    L = np.empty((m, n + 1))
    if NUMBA_ENABLED:
        _solve_full_nb(x0s, db, float(dt), code, float(param), X, L)
    else:
        _solve_full_np(x0s, db, float(dt), code, float(param), X, L)
    return X, L


def solve_observed_batch(x0s, db, dt: float, code: int, param: float, obs_idx):
    """Projected Euler with running integrals, snapshotted at ``obs_idx``.

    ``obs_idx`` must be strictly increasing knot indices into 0..n. The
    returned ``ito`` row holds the left-point sums of sigma(X) against the
    fine increments up to each observation knot, ``quad`` and ``trap`` the
    fine trapezoid integrals of (sigma * sigma')(X) and sigma(X).
    """
    x0s, db = _check_batch(x0s, db)
    obs_idx = np.ascontiguousarray(obs_idx, dtype=np.int64)
    m, n = db.shape
    if obs_idx.size == 0 or obs_idx[0] < 0 or obs_idx[-1] > n:
        raise ValueError("observation indices out of range")
    if np.any(np.diff(obs_idx) <= 0):
        raise ValueError("observation indices must be strictly increasing")
    shape = (m, obs_idx.size)
    Xo = np.empty(shape)
    Lo = np.empty(shape)
    ITO = np.empty(shape)
    QUAD = np.empty(shape)
    TRAP = np.empty(shape)
    if NUMBA_ENABLED:
        _solve_obs_nb(x0s, db, float(dt), code, float(param), obs_idx, Xo, Lo, ITO, QUAD, TRAP)
    else:
        _solve_obs_np(x0s, db, float(dt), code, float(param), obs_idx, Xo, Lo, ITO, QUAD, TRAP)
    return ObservedSolve(obs_idx, Xo, Lo, ITO, QUAD, TRAP)
