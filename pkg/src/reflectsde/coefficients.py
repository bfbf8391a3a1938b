"""Diffusion coefficient families and their validation.

Coefficients are named built-ins rather than parsed expressions; each carries
sigma together with its first two derivatives and declared Lipschitz
constants. The second derivative is not used by the solver itself but is
required by the error-decomposition diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# kernel dispatch codes, mirrored in kernels.py
CODE_CONSTANT = 0
CODE_LINEAR = 1
CODE_SIN = 2
CODE_SATURATING = 3


@dataclass(frozen=True)
class CoefficientSet:
    """sigma, sigma', sigma'' plus declared Lipschitz constants.

    ``lipschitz_bounds`` are for (sigma, sigma', sigma'') in that order, valid
    on the default validation window [-1, 50].
    """

    name: str
    sigma: Callable[[np.ndarray], np.ndarray]
    sigma_prime: Callable[[np.ndarray], np.ndarray]
    sigma_second: Callable[[np.ndarray], np.ndarray]
    lipschitz_bounds: tuple[float, float, float]
    kernel_code: int
    kernel_param: float = 0.0
    params: dict = field(default_factory=dict)

    def sup_norm(self, lo: float = 0.0, hi: float = 50.0, n: int = 4096) -> float:
        """max |sigma| on [lo, hi], evaluated on a lattice."""
        xs = np.linspace(lo, hi, n)
        return float(np.abs(self.sigma(xs)).max())


def ito_drift(c: CoefficientSet, x):
    """Drift of the Ito form of the reflected equation: 0.5 * sigma * sigma'."""
    return 0.5 * c.sigma(x) * c.sigma_prime(x)


def _saturating_sigma(x):
    # 2 - 1/(1+x) on x >= 0; quadratic C^2 extension below 0 keeps
    # sigma'' bounded and Lipschitz on the validation window.
    x = np.asarray(x, dtype=np.float64)
    return np.where(x < 0.0, 1.0 + x - x * x, 2.0 - 1.0 / (1.0 + np.maximum(x, 0.0)))


def _saturating_prime(x):
    x = np.asarray(x, dtype=np.float64)
    xp = np.maximum(x, 0.0)
    return np.where(x < 0.0, 1.0 - 2.0 * x, 1.0 / ((1.0 + xp) * (1.0 + xp)))


def _saturating_second(x):
    x = np.asarray(x, dtype=np.float64)
    xp = np.maximum(x, 0.0)
    return np.where(x < 0.0, -2.0, -2.0 / (1.0 + xp) ** 3)


BUILTIN_SIGMAS = ("constant", "linear", "sin", "saturating")


def make_coefficients(name: str, c: float = 1.0) -> CoefficientSet:
    """Construct a built-in coefficient family.

    * ``constant``: sigma = c (parameter ``c``), no drift, no derivatives.
    * ``linear``: sigma(x) = x; from x0 > 0 the boundary is never reached and
      the solution has the closed form exp(B_t) used as a test oracle.
    * ``sin``: sigma(x) = 2 + sin x, the smooth uniformly elliptic workhorse
      of the study suite.
    * ``saturating``: sigma(x) = 1 + x/(1+x) on x >= 0, extended below 0 so
      that sigma, sigma' and sigma'' stay Lipschitz.
    """
    if name == "constant":
        cc = float(c)
        return CoefficientSet(
            name="constant",
            sigma=lambda x, _c=cc: np.full_like(np.asarray(x, dtype=np.float64), _c),
            sigma_prime=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
            sigma_second=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
            lipschitz_bounds=(0.0, 0.0, 0.0),
            kernel_code=CODE_CONSTANT,
            kernel_param=cc,
            params={"c": cc},
        )
    if name == "linear":
        return CoefficientSet(
            name="linear",
            sigma=lambda x: np.asarray(x, dtype=np.float64) + 0.0,
            sigma_prime=lambda x: np.ones_like(np.asarray(x, dtype=np.float64)),
            sigma_second=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
            lipschitz_bounds=(1.0, 0.0, 0.0),
            kernel_code=CODE_LINEAR,
        )
    if name == "sin":
        return CoefficientSet(
            name="sin",
            sigma=lambda x: 2.0 + np.sin(x),
            sigma_prime=lambda x: np.cos(x),
            sigma_second=lambda x: -np.sin(x),
            lipschitz_bounds=(1.0, 1.0, 1.0),
            kernel_code=CODE_SIN,
        )
    if name == "saturating":
        return CoefficientSet(
            name="saturating",
            sigma=_saturating_sigma,
            sigma_prime=_saturating_prime,
            sigma_second=_saturating_second,
            lipschitz_bounds=(3.0, 2.0, 6.0),
            kernel_code=CODE_SATURATING,
        )
    raise ValueError(f"unknown sigma family {name!r}; choose from {BUILTIN_SIGMAS}")


@dataclass(frozen=True)
class CoefficientValidation:
    passed: bool
    worst_lipschitz_ratio: float
    worst_derivative_mismatch: float
    failures: tuple[str, ...]


def validate_coefficients(
    c: CoefficientSet,
    lo: float = -1.0,
    hi: float = 50.0,
    step: float = 1e-2,
    slack: float = 1.01,
    fd_step: float = 1e-5,
    fd_tol: float = 1e-6,
    max_reported: int = 5,
) -> CoefficientValidation:
    """Sweep a lattice checking Lipschitz bounds and derivative consistency.

    Lipschitz: for each of sigma, sigma', sigma'' the max slope between
    adjacent lattice points must not exceed the declared constant times
    ``slack``. Derivative consistency: the central difference of sigma at
    step ``fd_step`` must match sigma_prime within ``fd_tol * (1 + |sigma'|)``.
    """
    xs = np.arange(lo, hi + step / 2, step)
    failures: list[str] = []

    worst_ratio = 0.0
    fields = [
        ("sigma", c.sigma, c.lipschitz_bounds[0]),
        ("sigma_prime", c.sigma_prime, c.lipschitz_bounds[1]),
        ("sigma_second", c.sigma_second, c.lipschitz_bounds[2]),
    ]
    for label, f, bound in fields:
        v = np.asarray(f(xs), dtype=np.float64)
        slopes = np.abs(np.diff(v)) / np.diff(xs)
        m = float(slopes.max())
        ratio = m / bound if bound > 0 else (0.0 if m == 0.0 else np.inf)
        worst_ratio = max(worst_ratio, ratio)
        if m > bound * slack:
            where = xs[:-1][slopes > bound * slack][:max_reported]
            failures.append(
                f"{label}: slope {m:.6g} exceeds declared bound {bound:.6g} "
                f"near x in {np.round(where, 6).tolist()}"
            )

    fd = (c.sigma(xs + fd_step) - c.sigma(xs - fd_step)) / (2 * fd_step)
    sp = np.asarray(c.sigma_prime(xs), dtype=np.float64)
    mism = np.abs(fd - sp) / (1.0 + np.abs(sp))
    worst_mismatch = float(mism.max())
    if worst_mismatch > fd_tol:
        where = xs[mism > fd_tol][:max_reported]
        failures.append(
            f"sigma_prime: finite-difference mismatch {worst_mismatch:.3g} "
            f"exceeds {fd_tol:.1g} at x in {np.round(where, 6).tolist()}"
        )

    return CoefficientValidation(
        passed=not failures,
        worst_lipschitz_ratio=worst_ratio,
        worst_derivative_mismatch=worst_mismatch,
        failures=tuple(failures),
    )
