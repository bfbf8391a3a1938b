"""Run configuration: a flat ``key = value`` TOML file with one section per
study, validated against a fixed schema before any computation runs.

Unknown keys are rejected, every violation is collected (not just the
first), and the fully resolved configuration is echoed verbatim into every
report so that outputs are reproducible from the file alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .coefficients import BUILTIN_SIGMAS, CoefficientSet, make_coefficients

FORMAT_VERSION = "reflectsde-report-v1"

# fine grid must stay at least 2^6 times finer than the finest partition so
# trapezoid quadrature error never competes with partition-level effects
QUADRATURE_MARGIN = 6


class ConfigError(ValueError):
    """Carries every validation failure found in a config document."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


_RUN_DEFAULTS: dict[str, Any] = {
    "seed": 20260801,
    "n_fine": 65536,
    "workers": 1,
    "out_dir": "reports",
    "sigma": "sin",
    "sigma_c": 1.0,
}

_SIMULATE_DEFAULTS: dict[str, Any] = {
    "x0": 1.0,
    "path_index": 0,
}

_DECOMPOSE_DEFAULTS: dict[str, Any] = {
    "x0": 0.0,
    "path_index": 0,
    "level": 4,
    "t": 1.0,
}

_GAPS6 = [2.0**-k for k in range(1, 7)]

STUDY_DEFAULTS: dict[str, dict[str, Any]] = {
    "spatial": {
        "n_paths": 2000,
        "base_x": 0.0,
        "gaps": list(_GAPS6),
        "growth_x": [0.0, 1.0, 5.0, 20.0],
        "min_slope": 0.8,
        "min_r2": 0.95,
        "growth_ratio_max": 5.0,
    },
    "time": {
        "n_paths": 2000,
        "x0": 0.0,
        "s": 0.25,
        "gaps": [2.0**-k for k in range(2, 9)],
        "slope_lo": 0.4,
        "slope_hi": 0.6,
        "min_r2": 0.9,
    },
    "riemann": {
        "n_paths": 2000,
        "levels": [2, 3, 4, 5, 6, 7, 8],
        "x_values": [0.0, 1.0, 5.0],
        "min_slope": 0.2,
        "decomposition_paths": 200,
    },
    "two_point": {
        "n_paths": 2000,
        "base_x": 0.0,
        "gaps": list(_GAPS6),
        "levels": [2, 4, 6, 8],
        "min_slope": 0.4,
        "max_const_spread": 2.0,
        "min_slope_reference": 0.8,
    },
    "uniform": {
        "n_paths": 1000,
        "levels": [2, 3, 4, 5, 6, 7, 8],
        "lattice_max": 5.0,
        "lattice_dx": 0.0625,
        "max_final_ratio": 0.25,
        "trend_slack": 1.1,
    },
    "substitution": {
        "n_paths": 2000,
        "levels": [2, 3, 4, 5, 6, 7, 8],
        "lattice_max": 5.0,
        "lattice_dx": 0.0625,
        "dx_values": [0.25, 0.125, 0.0625],
        "z_kinds": ["abs_b1", "sup_b", "pos_b1_capped"],
        "z_const": 1.0,
        "truncation": 5.0,
        "max_final_ratio": 0.25,
        "min_dx_slope": 0.8,
        "max_leakage": 0.01,
        "band_coeff": 3.0,
    },
}

STUDY_NAMES = tuple(STUDY_DEFAULTS)

Z_KINDS = ("abs_b1", "sup_b", "pos_b1_capped", "const")


@dataclass(frozen=True)
class RunConfig:
    seed: int
    n_fine: int
    workers: int
    out_dir: str
    sigma: str
    sigma_c: float
    simulate: dict = field(default_factory=dict)
    decompose: dict = field(default_factory=dict)
    studies: dict = field(default_factory=dict)

    def coefficients(self) -> CoefficientSet:
        return make_coefficients(self.sigma, self.sigma_c)

    def echo(self) -> tuple[str, ...]:
        """Canonical resolved key=value lines, embedded in every report.

        Covers every key that can influence computed numbers; execution
        details (worker count, output directory) are excluded so outputs
        stay byte-identical across schedules.
        """
        lines = [
            f"run.{k} = {getattr(self, k)!r}"
            for k in _RUN_DEFAULTS
            if k not in ("workers", "out_dir")
        ]
        lines += [f"simulate.{k} = {self.simulate[k]!r}" for k in sorted(self.simulate)]
        lines += [f"decompose.{k} = {self.decompose[k]!r}" for k in sorted(self.decompose)]
        for s in STUDY_NAMES:
            lines += [f"study.{s}.{k} = {self.studies[s][k]!r}" for k in sorted(self.studies[s])]
        return tuple(lines)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _coerce(path: str, value, default, errors: list[str]):
    """Type-check a value against the default's type; return resolved value."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            errors.append(f"{path}: expected a boolean, got {value!r}")
            return default
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{path}: expected an integer, got {value!r}")
            return default
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{path}: expected a number, got {value!r}")
            return default
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            errors.append(f"{path}: expected a string, got {value!r}")
            return default
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            errors.append(f"{path}: expected a list, got {value!r}")
            return list(default)
        if default and isinstance(default[0], str):
            if not all(isinstance(v, str) for v in value):
                errors.append(f"{path}: expected a list of strings, got {value!r}")
                return list(default)
            return list(value)
        if default and isinstance(default[0], int) and not isinstance(default[0], bool):
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
                errors.append(f"{path}: expected a list of integers, got {value!r}")
                return list(default)
            return list(value)
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            errors.append(f"{path}: expected a list of numbers, got {value!r}")
            return list(default)
        return [float(v) for v in value]
    raise AssertionError(f"unhandled schema type for {path}")


def _resolve_table(
    name: str, raw: dict, defaults: dict[str, Any], errors: list[str]
) -> tuple[dict[str, Any], set[str]]:
    out = dict(defaults)
    user_keys = set()
    for key, value in raw.items():
        if key not in defaults:
            errors.append(f"{name}.{key}: unknown key")
            continue
        out[key] = _coerce(f"{name}.{key}", value, defaults[key], errors)
        user_keys.add(key)
    return out, user_keys


def _validate_semantics(
    run: dict, studies: dict, user_keys: dict, simulate: dict, errors: list[str]
):
    if run["seed"] < 0:
        errors.append("run.seed: must be >= 0")
    if run["workers"] < 1:
        errors.append("run.workers: must be >= 1")
    n_fine = run["n_fine"]
    fine_ok = n_fine >= 4 and _is_pow2(n_fine)
    if not fine_ok:
        errors.append(
            f"run.n_fine: {n_fine} is not a power of two >= 4; dyadic study "
            "partitions must nest exactly in the fine grid"
        )
    if run["sigma"] not in BUILTIN_SIGMAS:
        errors.append(
            f"run.sigma: unknown family {run['sigma']!r}; choose from {BUILTIN_SIGMAS}"
        )
    max_level = int(math.log2(n_fine)) - QUADRATURE_MARGIN if fine_ok else 0
    for sname, s in studies.items():
        if "levels" in s:
            if "levels" in user_keys[sname]:
                for lv in s["levels"]:
                    if lv < 1 or lv > max_level:
                        errors.append(
                            f"study.{sname}.levels: level {lv} outside [1, {max_level}] "
                            f"(fine grid 2^{int(math.log2(n_fine))} must be at least "
                            f"2^{QUADRATURE_MARGIN} times finer than the finest partition)"
                        )
            else:
                # default level lists shrink to what the grid admits; running
                # a study with no admissible level fails then, loudly
                s["levels"] = [lv for lv in s["levels"] if 1 <= lv <= max_level]
        if "n_paths" in s and s["n_paths"] < 2:
            errors.append(f"study.{sname}.n_paths: must be >= 2")
        for key in ("gaps", "dx_values"):
            if key in s and any(g <= 0 for g in s[key]):
                errors.append(f"study.{sname}.{key}: entries must be > 0")
        if "lattice_dx" in s:
            dx, top = s["lattice_dx"], s["lattice_max"]
            if dx <= 0 or top < 0:
                errors.append(f"study.{sname}: lattice_dx must be > 0 and lattice_max >= 0")
            elif abs(top / dx - round(top / dx)) > 1e-9:
                errors.append(
                    f"study.{sname}: lattice_dx {dx} must divide lattice_max {top}"
                )
        if "dx_values" in s:
            for dxv in s["dx_values"]:
                if abs(s["lattice_max"] / dxv - round(s["lattice_max"] / dxv)) > 1e-9:
                    errors.append(
                        f"study.{sname}.dx_values: {dxv} must divide lattice_max"
                    )
        if "z_kinds" in s:
            for zk in s["z_kinds"]:
                if zk not in Z_KINDS:
                    errors.append(
                        f"study.{sname}.z_kinds: unknown kind {zk!r}; choose from {Z_KINDS}"
                    )
            if not 0.0 <= s["z_const"] <= s["lattice_max"]:
                errors.append(
                    f"study.{sname}.z_const: must lie within the lattice [0, {s['lattice_max']}]"
                )
        if "s" in s and not 0.0 <= s["s"] < 1.0:
            errors.append(f"study.{sname}.s: base time must lie in [0, 1)")
        if "gaps" in s and "s" in s and any(s["s"] + g > 1.0 for g in s["gaps"]):
            errors.append(f"study.{sname}.gaps: s + gap must stay within [0, 1]")
        for key in ("base_x", "x0"):
            if key in s and s[key] < 0:
                errors.append(f"study.{sname}.{key}: must be >= 0")
    if simulate["x0"] < 0:
        errors.append("simulate.x0: must be >= 0")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML config document.

    Raises :class:`ConfigError` carrying every problem found. Missing keys
    take documented defaults; the result echoes all resolved values.
    """
    errors: list[str] = []
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"TOML syntax: {e}"]) from None

    known_top = {"run", "simulate", "decompose", "study"}
    for key in doc:
        if key not in known_top:
            errors.append(f"{key}: unknown section")

    run, _ = _resolve_table("run", doc.get("run", {}), _RUN_DEFAULTS, errors)
    simulate, _ = _resolve_table("simulate", doc.get("simulate", {}), _SIMULATE_DEFAULTS, errors)
    decompose, _ = _resolve_table("decompose", doc.get("decompose", {}), _DECOMPOSE_DEFAULTS, errors)

    study_doc = doc.get("study", {})
    if not isinstance(study_doc, dict):
        errors.append("study: expected per-study tables")
        study_doc = {}
    studies: dict[str, dict[str, Any]] = {}
    user_keys: dict[str, set[str]] = {}
    for sname, defaults in STUDY_DEFAULTS.items():
        raw = study_doc.get(sname, {})
        if not isinstance(raw, dict):
            errors.append(f"study.{sname}: expected a table")
            raw = {}
        studies[sname], user_keys[sname] = _resolve_table(f"study.{sname}", raw, defaults, errors)
    for sname in study_doc:
        if sname not in STUDY_DEFAULTS:
            errors.append(f"study.{sname}: unknown study (known: {', '.join(STUDY_NAMES)})")

    _validate_semantics(run, studies, user_keys, simulate, errors)
    if errors:
        raise ConfigError(errors)

    return RunConfig(
        seed=run["seed"],
        n_fine=run["n_fine"],
        workers=run["workers"],
        out_dir=run["out_dir"],
        sigma=run["sigma"],
        sigma_c=run["sigma_c"],
        simulate=simulate,
        decompose=decompose,
        studies=studies,
    )


def default_config() -> RunConfig:
    return parse_config("")
