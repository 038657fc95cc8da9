"""Job configuration for the ``fdh`` command line tool.

A job file is JSON (``.json``) or TOML (anything else)::

    T = 1.0
    D = 5.5
    methods = ["closed_form", "h2", "minimax"]
    taps = 12
    grid_points = 1024
    output_dir = "out"

    [model]
    first_order = 0.1          # or: state_space = {A = [[...]], B = [[...]], C = [[...]]}

    [simulation]               # optional
    signal = "piecewise_regular"
    duration = 256.0
    oversample = 1000
    seed = 42

    [analysis]                 # optional
    omega_max = 31.4159        # default: 10 x Nyquist
    points = 2048

    [sweep]                    # optional
    d_values = [0.0, 0.25, 0.5, 0.75]
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from fdh.errors import FdhError, InvalidInputError
from fdh.lifting import DelaySpec, split_delay
from fdh.statespace import ContinuousStateSpace, first_order_lowpass

METHODS = ("closed_form", "h2", "minimax")
SIGNALS = ("zero", "step", "ramp", "sine", "piecewise_regular")


class ConfigError(FdhError):
    """Unreadable or invalid job configuration."""

    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class SimulationConfig:
    signal: str = "piecewise_regular"
    duration: float = 256.0
    oversample: int = 1000
    seed: int = 42
    omega: float = 0.05


@dataclass(frozen=True)
class JobConfig:
    model: ContinuousStateSpace
    omega_c: float | None
    T: float
    D: float
    methods: tuple
    taps: int = 12
    grid_points: int = 1024
    simulation: SimulationConfig | None = None
    omega_max: float | None = None
    analysis_points: int = 2048
    d_values: tuple = ()
    output_dir: Path = field(default_factory=lambda: Path("out"))

    @property
    def delay(self) -> DelaySpec:
        return split_delay(self.T, self.D)

    @property
    def nyquist(self) -> float:
        return math.pi / self.T


def _read_raw(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            m = re.search(r"line (\d+), column (\d+)", str(exc))
            line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
            raise ConfigError(f"invalid TOML: {str(exc).split(' (at')[0]}", line, col) from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a table/object at top level")
    return data


def _number(data: dict, key: str, where: str = "", *, required=True, default=None,
            positive=False, nonneg=False, integer=False):
    name = f"{where}{key}"
    if key not in data:
        if required:
            raise ConfigError(f"missing required field '{name}'")
        return default
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"field '{name}' must be a number, got {val!r}")
    if integer and int(val) != val:
        raise ConfigError(f"field '{name}' must be an integer, got {val!r}")
    if not math.isfinite(val):
        raise ConfigError(f"field '{name}' must be finite")
    if positive and not val > 0:
        raise ConfigError(f"field '{name}' must be > 0, got {val}")
    if nonneg and val < 0:
        raise ConfigError(f"field '{name}' must be >= 0, got {val}")
    return int(val) if integer else float(val)


def parse_config(data: dict, base_dir: Path | None = None) -> JobConfig:
    """Validate a raw config mapping, raising :class:`ConfigError` on the first problem."""
    model = data.get("model")
    if not isinstance(model, dict):
        raise ConfigError("missing required table 'model' (first_order or state_space)")
    omega_c = None
    if "first_order" in model:
        omega_c = _number(model, "first_order", "model.", positive=True)
        sys = first_order_lowpass(omega_c)
    elif "state_space" in model:
        ss = model["state_space"]
        if not isinstance(ss, dict) or not {"A", "B", "C"} <= set(ss):
            raise ConfigError("'model.state_space' needs A, B and C")
        try:
            sys = ContinuousStateSpace(ss["A"], ss["B"], ss["C"])
        except (InvalidInputError, ValueError, TypeError) as exc:
            raise ConfigError(f"'model.state_space' is invalid: {exc}") from exc
    else:
        raise ConfigError("'model' must define 'first_order' or 'state_space'")

    T = _number(data, "T", positive=True)
    D = _number(data, "D", nonneg=True)
    methods = data.get("methods", ["closed_form"])
    if isinstance(methods, str):
        methods = [methods]
    if not methods:
        raise ConfigError("field 'methods' must list at least one method")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r} in 'methods' (choose from {', '.join(METHODS)})")
    if "closed_form" in methods and omega_c is None:
        raise ConfigError("method 'closed_form' needs a first_order model")
    taps = _number(data, "taps", required=False, default=12, integer=True)
    if taps < 1:
        raise ConfigError(f"field 'taps' must be >= 1, got {taps}")
    grid_points = _number(data, "grid_points", required=False, default=1024, integer=True)
    if grid_points < 64:
        raise ConfigError(f"field 'grid_points' must be >= 64, got {grid_points}")

    simulation = None
    if "simulation" in data:
        s = data["simulation"]
        if not isinstance(s, dict):
            raise ConfigError("'simulation' must be a table")
        signal = s.get("signal", "piecewise_regular")
        if signal not in SIGNALS:
            raise ConfigError(f"unknown signal {signal!r} in 'simulation.signal'")
        duration = _number(s, "duration", "simulation.", positive=True)
        if duration < D:
            raise ConfigError(f"'simulation.duration' ({duration}) must be >= D ({D})")
        oversample = _number(s, "oversample", "simulation.", required=False, default=1000,
                             integer=True)
        if oversample < 2:
            raise ConfigError(f"'simulation.oversample' must be >= 2, got {oversample}")
        simulation = SimulationConfig(
            signal=signal, duration=duration, oversample=oversample,
            seed=_number(s, "seed", "simulation.", required=False, default=42, integer=True),
            omega=_number(s, "omega", "simulation.", required=False, default=0.05,
                          nonneg=True))

    analysis = data.get("analysis", {})
    if not isinstance(analysis, dict):
        raise ConfigError("'analysis' must be a table")
    omega_max = _number(analysis, "omega_max", "analysis.", required=False, positive=True)
    points = _number(analysis, "points", "analysis.", required=False, default=2048,
                     integer=True)
    if points < 2:
        raise ConfigError(f"'analysis.points' must be >= 2, got {points}")

    sweep = data.get("sweep", {})
    d_values = tuple(float(x) for x in sweep.get("d_values", ())) if isinstance(sweep, dict) else ()

    out = Path(data.get("output_dir", "out"))
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out
    return JobConfig(model=sys, omega_c=omega_c, T=T, D=D, methods=tuple(methods), taps=taps,
                     grid_points=grid_points, simulation=simulation, omega_max=omega_max,
                     analysis_points=points, d_values=d_values, output_dir=out)


def load_config(path) -> JobConfig:
    path = Path(path)
    return parse_config(_read_raw(path), base_dir=path.parent)
