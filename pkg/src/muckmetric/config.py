"""Run configuration: flat key=value files, flag overrides, validation.

Unknown keys and constraint violations raise ConfigError naming the key, so
a bad config never reaches the math layer.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Mapping, Optional

import numpy as np

from .errors import ConfigError, ParameterError
from .grid import Grid
from .weights import (
    Weight,
    load_weight,
    normalize_weight,
    power_weight,
    random_weight,
    unit_weight,
)

DEFAULT_DELTAS = tuple(float(d) for d in np.geomspace(1e-3, 0.2, 8))

# The default non-completeness exponents -1 + 2^-n, n = 1..6.
DEFAULT_EXPONENTS = tuple(-1.0 + 2.0**-n for n in range(1, 7))

_FAMILIES = ("dyadic", "dyadic+shifted")
_OPERATORS = ("martingale", "hilbert", "riesz", "maximal")
_KINDS = ("ap", "a1", "ainfty", "bmo", "blo")
_DIRECTIONS = ("quarter", "half", "half-neg", "random")


@dataclass(frozen=True)
class RunConfig:
    grid_levels: int = 10
    circle_points: int = 512
    interval_family: str = "dyadic"
    p: float = 2.0
    delta_grid: tuple[float, ...] = DEFAULT_DELTAS
    seed: int = 1234
    operator: str = "martingale"
    signs: str = "alternating"
    weight: str = "constant"
    weight2: str = "halves:2,1"
    direction: str = "quarter"
    exponents: tuple[float, ...] = DEFAULT_EXPONENTS
    output_dir: str = "."
    norm_tol: float = 1e-10
    char_tol: float = 1e-9
    budget: int = 2000
    max_iterations: int = 100_000
    trials: int = 50
    kind: str = "ap"
    c0: float = 0.25
    c_max: float = 2.0
    t: float = 0.5
    gamma: float = 1.0
    c_const: float = 1.0
    amplitude: float = 1.0
    svg: bool = False

    @property
    def shifted(self) -> bool:
        return self.interval_family == "dyadic+shifted"


def _parse_bool(key: str, raw) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_int(key: str, raw) -> int:
    try:
        return int(str(raw).strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc


def _parse_float(key: str, raw) -> float:
    try:
        return float(str(raw).strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc


def _parse_float_list(key: str, raw) -> tuple[float, ...]:
    if isinstance(raw, (tuple, list)):
        items = list(raw)
    else:
        items = [piece for piece in str(raw).split(",") if piece.strip()]
    if not items:
        raise ConfigError(f"{key}: expected a comma-separated list of numbers")
    return tuple(_parse_float(key, item) for item in items)


_PARSERS = {
    "grid_levels": _parse_int,
    "circle_points": _parse_int,
    "interval_family": lambda key, raw: str(raw).strip(),
    "p": _parse_float,
    "delta_grid": _parse_float_list,
    "seed": _parse_int,
    "operator": lambda key, raw: str(raw).strip(),
    "signs": lambda key, raw: str(raw).strip(),
    "weight": lambda key, raw: str(raw).strip(),
    "weight2": lambda key, raw: str(raw).strip(),
    "direction": lambda key, raw: str(raw).strip(),
    "exponents": _parse_float_list,
    "output_dir": lambda key, raw: str(raw).strip(),
    "norm_tol": _parse_float,
    "char_tol": _parse_float,
    "budget": _parse_int,
    "max_iterations": _parse_int,
    "trials": _parse_int,
    "kind": lambda key, raw: str(raw).strip(),
    "c0": _parse_float,
    "c_max": _parse_float,
    "t": _parse_float,
    "gamma": _parse_float,
    "c_const": _parse_float,
    "amplitude": _parse_float,
    "svg": _parse_bool,
}


def _validate(cfg: RunConfig) -> RunConfig:
    if not 1 <= cfg.grid_levels <= 24:
        raise ConfigError(f"grid_levels: must lie in 1..24, got {cfg.grid_levels}")
    if cfg.circle_points < 4 or cfg.circle_points & (cfg.circle_points - 1):
        raise ConfigError(
            f"circle_points: must be a power of two >= 4, got {cfg.circle_points}"
        )
    if cfg.interval_family not in _FAMILIES:
        raise ConfigError(
            f"interval_family: expected one of {_FAMILIES}, got {cfg.interval_family!r}"
        )
    if not cfg.p > 1:
        raise ConfigError(f"p: must exceed 1, got {cfg.p}")
    if not cfg.delta_grid or any(d < 0 for d in cfg.delta_grid):
        raise ConfigError("delta_grid: must be nonempty and nonnegative")
    if cfg.operator not in _OPERATORS:
        raise ConfigError(
            f"operator: expected one of {_OPERATORS}, got {cfg.operator!r}"
        )
    if cfg.kind not in _KINDS:
        raise ConfigError(f"kind: expected one of {_KINDS}, got {cfg.kind!r}")
    if cfg.direction not in _DIRECTIONS:
        raise ConfigError(
            f"direction: expected one of {_DIRECTIONS}, got {cfg.direction!r}"
        )
    if not cfg.norm_tol > 0:
        raise ConfigError(f"norm_tol: must be positive, got {cfg.norm_tol}")
    if not cfg.char_tol > 0:
        raise ConfigError(f"char_tol: must be positive, got {cfg.char_tol}")
    if cfg.budget < 1:
        raise ConfigError(f"budget: must be >= 1, got {cfg.budget}")
    if cfg.max_iterations < 1:
        raise ConfigError(f"max_iterations: must be >= 1, got {cfg.max_iterations}")
    if cfg.trials < 1:
        raise ConfigError(f"trials: must be >= 1, got {cfg.trials}")
    if not cfg.c0 > 0:
        raise ConfigError(f"c0: must be positive, got {cfg.c0}")
    if not cfg.c_max > 1:
        raise ConfigError(f"c_max: must exceed 1, got {cfg.c_max}")
    if not 0.0 <= cfg.t <= 1.0:
        raise ConfigError(f"t: must lie in [0,1], got {cfg.t}")
    if not cfg.gamma > 0:
        raise ConfigError(f"gamma: must be positive, got {cfg.gamma}")
    if not cfg.c_const > 0:
        raise ConfigError(f"c_const: must be positive, got {cfg.c_const}")
    if not cfg.amplitude > 0:
        raise ConfigError(f"amplitude: must be positive, got {cfg.amplitude}")
    return cfg


def _read_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    data = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        data[key.strip()] = value.strip()
    return data


def parse_config(path=None, overrides: Optional[Mapping] = None) -> RunConfig:
    """Config from an optional key=value file, with flag overrides on top."""
    merged = {}
    if path is not None:
        merged.update(_read_config_file(path))
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for key, raw in merged.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _PARSERS[key](key, raw)
    return _validate(RunConfig(**values))


def build_weight(spec: str, grid: Grid, seed: int) -> Weight:
    """Weight from a spec string.

    Forms: "constant"; "halves:A,B" (value A on [0,1/2), B on [1/2,1));
    "power:ALPHA"; "random:AMPLITUDE" (seeded); "file:PATH".
    All constructed weights are normalized.
    """
    name, _, arg = spec.partition(":")
    if name == "constant":
        return unit_weight(grid)
    if name == "halves":
        parts = arg.split(",")
        if len(parts) != 2:
            raise ConfigError(f"weight spec {spec!r}: need halves:A,B")
        try:
            a, b = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ConfigError(f"weight spec {spec!r}: non-numeric values") from exc
        if a <= 0 or b <= 0:
            raise ConfigError(f"weight spec {spec!r}: values must be positive")
        values = np.where(np.arange(grid.cells) < grid.cells // 2, a, b)
        return normalize_weight(Weight(grid, values))
    if name == "power":
        try:
            alpha = float(arg)
        except ValueError as exc:
            raise ConfigError(f"weight spec {spec!r}: non-numeric exponent") from exc
        try:
            return power_weight(alpha, grid)
        except ParameterError as exc:
            raise ConfigError(f"weight spec {spec!r}: {exc}") from exc
    if name == "random":
        try:
            amplitude = float(arg) if arg else 1.0
        except ValueError as exc:
            raise ConfigError(f"weight spec {spec!r}: non-numeric amplitude") from exc
        return random_weight(grid, seed, amplitude)
    if name == "file":
        if not arg:
            raise ConfigError(f"weight spec {spec!r}: missing path")
        w = load_weight(arg)
        if w.grid != grid:
            raise ConfigError(
                f"weight spec {spec!r}: file has {w.grid.levels} levels, "
                f"run uses {grid.levels}"
            )
        return w
    raise ConfigError(f"unknown weight spec {spec!r}")
