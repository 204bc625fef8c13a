"""Scenario and sweep documents: JSON in, validated objects out.

A scenario document describes one run or analysis:

    {
      "name": "optional label",
      "params": { ... the 14 rate constants ... },
      "grid": {"lengths": [2.0], "cells": [64]},
      "coefficients": {"a1": {"kind": "constant", "value": 0.1}, ... "a4"},
      "initial": {"kind": "constant" | "bump" | "mode" | "random", ...},
      "run": {"t_end": 2.0, "dt": null, "adaptive": true,
              "record_every": 1, "record_modes": [0, 1],
              "snapshot_times": [1.0]},
      "analysis": {"modes": 32}
    }

A sweep document wraps a base scenario with up to three parameter axes:

    {
      "name": "optional label",
      "base": { ... scenario ... },
      "axes": [{"param": "beta2", "values": [0.5, 1.0, 2.0]}, ...],
      "outputs": ["endemic_exists", "Z4.turing", ...]
    }

Validation errors carry the dotted path of the offending field.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .grid import Grid, CoefficientField
from .integrator import (
    BumpInit,
    ConstantInit,
    ModeInit,
    RandomInit,
    SimConfig,
)
from .model import ModelParams
from .stability import DiffusionMatrix
from .steady import all_steady_states

__all__ = [
    "ConfigError",
    "load_json",
    "parse_params",
    "parse_grid",
    "parse_coefficients",
    "parse_initial",
    "build_sim_config",
    "analysis_mode_count",
    "parse_sweep",
    "DEFAULT_MODE_COUNT",
]

DEFAULT_MODE_COUNT = 32

_COEFF_KEYS = ("a1", "a2", "a3", "a4")


class ConfigError(ValueError):
    """A scenario/sweep document failed validation at a named field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def load_json(path: str) -> dict:
    """Read a JSON document, reporting parse position on failure."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(path, f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}")
    if not isinstance(doc, dict):
        raise ConfigError(path, "top-level JSON value must be an object")
    return doc


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    return doc[key]


def _as_dict(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected an object, got {type(value).__name__}")
    return value


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not math.isfinite(float(value)):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    return float(value)


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _as_bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected true/false, got {value!r}")
    return value


def _as_list(value, path: str, length: int | None = None) -> list:
    if not isinstance(value, list):
        raise ConfigError(path, f"expected a list, got {type(value).__name__}")
    if length is not None and len(value) != length:
        raise ConfigError(path, f"expected {length} entries, got {len(value)}")
    return value


def _number_list(value, path: str, length: int | None = None) -> list:
    return [_as_number(v, f"{path}[{k}]") for k, v in
            enumerate(_as_list(value, path, length))]


def parse_params(doc: dict, path: str = "params") -> ModelParams:
    data = _as_dict(_require(doc, "params", ""), path)
    for key, value in data.items():
        _as_number(value, f"{path}.{key}")
    try:
        return ModelParams.from_dict(data)
    except ValueError as e:
        raise ConfigError(path, str(e)) from None


def parse_grid(doc: dict, path: str = "grid") -> Grid:
    data = _as_dict(_require(doc, "grid", ""), path)
    extra = sorted(set(data) - {"lengths", "cells"})
    if extra:
        raise ConfigError(path, f"unknown fields: {', '.join(extra)}")
    lengths = _number_list(_require(data, "lengths", path), f"{path}.lengths")
    cells = [_as_int(v, f"{path}.cells[{k}]")
             for k, v in enumerate(_as_list(_require(data, "cells", path), f"{path}.cells"))]
    try:
        return Grid(tuple(lengths), tuple(cells))
    except ValueError as e:
        raise ConfigError(path, str(e)) from None


def _parse_one_coefficient(spec, grid: Grid, path: str) -> CoefficientField:
    spec = _as_dict(spec, path)
    kind = _require(spec, "kind", path)
    try:
        if kind == "constant":
            return CoefficientField.constant(_as_number(_require(spec, "value", path),
                                                        f"{path}.value"))
        if kind == "cells":
            values = _number_list(_require(spec, "values", path), f"{path}.values")
            return CoefficientField.from_cells(grid, np.asarray(values))
        if kind == "profile":
            name = _require(spec, "profile", path)
            args = {k: v for k, v in spec.items() if k not in ("kind", "profile")}
            c = CoefficientField.from_profile(name, **args)
            c.materialize(grid)  # surfaces positivity violations now
            return c
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(path, str(e)) from None
    raise ConfigError(f"{path}.kind",
                      f"unknown coefficient kind {kind!r}; expected constant, cells, or profile")


def parse_coefficients(doc: dict, grid: Grid, path: str = "coefficients") -> tuple:
    data = _as_dict(_require(doc, "coefficients", ""), path)
    extra = sorted(set(data) - set(_COEFF_KEYS))
    if extra:
        raise ConfigError(path, f"unknown fields: {', '.join(extra)}")
    return tuple(
        _parse_one_coefficient(_require(data, key, path), grid, f"{path}.{key}")
        for key in _COEFF_KEYS
    )


def _resolve_base_state(spec: dict, params: ModelParams, path: str):
    has_base = "base" in spec
    has_state = "state" in spec
    if has_base == has_state:
        raise ConfigError(path, "give exactly one of 'base' (4 values) or 'state' (a tag)")
    if has_base:
        return _number_list(spec["base"], f"{path}.base", 4)
    tag = spec["state"]
    states = all_steady_states(params)
    for st in states:
        if st.tag == tag:
            return [float(v) for v in st.value]
    known = ", ".join(st.tag for st in states)
    raise ConfigError(f"{path}.state",
                      f"no steady state tagged {tag!r} for these parameters (found: {known})")


def parse_initial(doc: dict, params: ModelParams, path: str = "initial",
                  seed_override: int | None = None):
    spec = _as_dict(_require(doc, "initial", ""), path)
    kind = _require(spec, "kind", path)
    if kind == "constant":
        return ConstantInit(tuple(_number_list(_require(spec, "values", path),
                                               f"{path}.values", 4)))
    if kind == "bump":
        base = _number_list(_require(spec, "base", path), f"{path}.base", 4)
        amp = _number_list(_require(spec, "amplitude", path), f"{path}.amplitude", 4)
        center = spec.get("center")
        if center is not None:
            center = tuple(_number_list(center, f"{path}.center"))
        width = spec.get("width")
        if width is not None:
            width = _as_number(width, f"{path}.width")
        return BumpInit(tuple(base), tuple(amp), center, width)
    if kind == "mode":
        base = _resolve_base_state(spec, params, path)
        eps = _as_number(_require(spec, "epsilon", path), f"{path}.epsilon")
        mode = _as_int(_require(spec, "mode", path), f"{path}.mode")
        if mode < 0:
            raise ConfigError(f"{path}.mode", f"mode index must be >= 0, got {mode}")
        weights = spec.get("weights", [1.0, 1.0, 1.0, 1.0])
        weights = _number_list(weights, f"{path}.weights", 4)
        return ModeInit(tuple(base), eps, mode, tuple(weights))
    if kind == "random":
        low = _number_list(_require(spec, "low", path), f"{path}.low", 4)
        high = _number_list(_require(spec, "high", path), f"{path}.high", 4)
        seed = spec.get("seed", 0)
        seed = _as_int(seed, f"{path}.seed")
        if seed_override is not None:
            seed = seed_override
        return RandomInit(tuple(low), tuple(high), seed)
    raise ConfigError(f"{path}.kind",
                      f"unknown initial kind {kind!r}; expected constant, bump, mode, or random")


def build_sim_config(doc: dict, seed_override: int | None = None) -> SimConfig:
    """Assemble a SimConfig from a full scenario document."""
    params = parse_params(doc)
    grid = parse_grid(doc)
    coeffs = parse_coefficients(doc, grid)
    initial = parse_initial(doc, params, seed_override=seed_override)
    run = _as_dict(_require(doc, "run", ""), "run")
    extra = sorted(set(run) - {"t_end", "dt", "adaptive", "record_every",
                               "record_modes", "snapshot_times"})
    if extra:
        raise ConfigError("run", f"unknown fields: {', '.join(extra)}")
    t_end = _as_number(_require(run, "t_end", "run"), "run.t_end")
    dt = run.get("dt")
    if dt is not None:
        dt = _as_number(dt, "run.dt")
    adaptive = _as_bool(run.get("adaptive", True), "run.adaptive")
    record_every = _as_int(run.get("record_every", 1), "run.record_every")
    record_modes = [_as_int(v, f"run.record_modes[{k}]")
                    for k, v in enumerate(_as_list(run.get("record_modes", []),
                                                   "run.record_modes"))]
    snapshot_times = _number_list(run.get("snapshot_times", []), "run.snapshot_times")
    try:
        return SimConfig(
            grid=grid, params=params, coefficients=coeffs, initial=initial,
            t_end=t_end, dt=dt, adaptive=adaptive, record_every=record_every,
            record_modes=tuple(record_modes), snapshot_times=tuple(snapshot_times),
            name=str(doc.get("name", "run")),
        )
    except ValueError as e:
        raise ConfigError("run", str(e)) from None


def analysis_mode_count(doc: dict, override: int | None = None) -> int:
    if override is not None:
        if override < 1:
            raise ConfigError("--modes", f"mode count must be >= 1, got {override}")
        return override
    analysis = doc.get("analysis")
    if analysis is None:
        return DEFAULT_MODE_COUNT
    analysis = _as_dict(analysis, "analysis")
    count = analysis.get("modes", DEFAULT_MODE_COUNT)
    count = _as_int(count, "analysis.modes")
    if count < 1:
        raise ConfigError("analysis.modes", f"mode count must be >= 1, got {count}")
    return count


def diffusion_matrix(coeffs, path: str = "coefficients") -> DiffusionMatrix:
    try:
        return DiffusionMatrix.from_coefficients(coeffs)
    except ValueError as e:
        raise ConfigError(path, str(e)) from None


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

_AXIS_PARAMS = tuple(f.name for f in ModelParams.__dataclass_fields__.values())

_MAX_SWEEP_POINTS = 100_000


def parse_sweep(doc: dict):
    """Validate a sweep document; returns (base_doc, axes, outputs, name).

    axes is a list of (param_name, values) in document order; rows are
    generated lexicographically over those values.
    """
    base = _as_dict(_require(doc, "base", ""), "base")
    parse_params(base)  # validate eagerly so errors name the base fields
    # no axes at all is legal: the sweep degenerates to the base point
    axes_doc = _as_list(doc.get("axes", []), "axes")
    if len(axes_doc) > 3:
        raise ConfigError("axes", f"expected at most 3 axes, got {len(axes_doc)}")
    axes = []
    seen = set()
    for k, ax in enumerate(axes_doc):
        ax = _as_dict(ax, f"axes[{k}]")
        name = _require(ax, "param", f"axes[{k}]")
        if name not in _AXIS_PARAMS:
            raise ConfigError(f"axes[{k}].param",
                              f"unknown parameter {name!r}; expected one of {_AXIS_PARAMS}")
        if name in seen:
            raise ConfigError(f"axes[{k}].param", f"duplicate axis {name!r}")
        seen.add(name)
        values = _number_list(_require(ax, "values", f"axes[{k}]"), f"axes[{k}].values")
        if not values:
            raise ConfigError(f"axes[{k}].values", "axis needs at least one value")
        axes.append((name, values))
    npoints = 1
    for _, values in axes:
        npoints *= len(values)
    if npoints > _MAX_SWEEP_POINTS:
        raise ConfigError("axes", f"sweep has {npoints} points, limit is {_MAX_SWEEP_POINTS}")
    outputs = doc.get("outputs")
    if outputs is not None:
        outputs = [str(v) for v in _as_list(outputs, "outputs")]
    name = str(doc.get("name", "sweep"))
    return base, axes, outputs, name
