"""
Configuration for the ``test`` and ``simulate`` commands.

Simulation experiments are described by INI-style ``.cfg`` files with the sections ``[experiment]``,
``[design]``, ``[model]`` and ``[effect]``. A parsed configuration can be written back as a complete,
self-contained file that reproduces the same numbers.
"""

import configparser
import io
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from lrst.errors import ConfigError, LrstError
from lrst.tools.trial_simulator.experiments import CONTROL_FRACTION, VARIANTS, ArmSizes
from lrst.tools.trial_simulator.model.placebo import (
    BAPI302_DELTA,
    EffectSpec,
    PlaceboModel,
    bapi302_placebo_model,
)
from lrst.utils.dataset import ColumnSchema, DirectionMap

logger = logging.getLogger(__name__)

BUNDLED_CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")
EXPERIMENT_KINDS = ("type1", "power")
MODEL_PRESETS = ("bapi302", "none")

SECTION_KEYS = {
    "experiment": {"kind", "name", "seed", "n_reps", "threads", "alpha", "variants"},
    "design": {"n_values", "arm_sizes", "control_fraction"},
    "model": {"preset", "rho_time", "rho_outcome", "random_effect_sd", "residual_sd", "visits", "outcomes"},
    "effect": {"delta", "accrual", "multipliers"},
}
# per-outcome keys such as ``mu.DAD``
MODEL_OUTCOME_KEYS = ("mu", "sd", "direction")


@dataclass(frozen=True)
class AnalysisConfig:
    input: str
    schema: ColumnSchema = field(default_factory=ColumnSchema)
    direction: DirectionMap = field(default_factory=DirectionMap)
    weights: str = "equal"
    alpha: float = 0.05
    out: Optional[str] = None
    fmt: str = "json"
    two_sided: bool = False
    drop_incomplete: bool = False
    baseline: Optional[str] = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}", key="--alpha")
        if self.fmt not in ("json", "text"):
            raise ConfigError(f"format must be 'json' or 'text', got '{self.fmt}'", key="--format")


@dataclass(frozen=True)
class SimulationConfig:
    kind: str
    model: PlaceboModel
    effect: EffectSpec
    name: str = "experiment"
    seed: int = 0
    n_reps: int = 1000
    threads: int = 1
    alphas: Tuple[float, ...] = (0.05, 0.1)
    variants: Tuple[str, ...] = VARIANTS
    n_values: Tuple[int, ...] = ()
    arm_sizes: Tuple[ArmSizes, ...] = ()
    control_fraction: float = CONTROL_FRACTION
    rho_values: Tuple[float, ...] = (0.5,)
    multipliers: Tuple[float, ...] = (1.0,)


def resolve_config_path(path: str) -> str:
    """Return ``path`` if it exists, else the bundled config of that name (e.g. ``type1_error.cfg``)."""
    if os.path.exists(path):
        return path
    bundled = os.path.join(BUNDLED_CONFIG_DIR, os.path.basename(path))
    if not os.path.splitext(bundled)[1]:
        bundled += ".cfg"
    if os.path.exists(bundled):
        return bundled
    raise FileNotFoundError(
        f"Config file not found: {path} (bundled configs: {sorted(os.listdir(BUNDLED_CONFIG_DIR))})"
    )


class _Reader:
    """Typed access to a parsed config that reports the section, key and line of a bad value."""

    def __init__(self, parser: configparser.ConfigParser, lines: List[str]):
        self.parser = parser
        self.lines = lines

    def line_of(self, section: str, key: str) -> Optional[int]:
        current = None
        for number, line in enumerate(self.lines, start=1):
            header = re.match(r"\s*\[([^\]]+)\]", line)
            if header:
                current = header.group(1).strip()
            elif current == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
                return number
        return None

    def error(self, message: str, section: str, key: Optional[str] = None) -> ConfigError:
        line = self.line_of(section, key) if key is not None else None
        return ConfigError(message, section=section, key=key, line=line)

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def get(self, section: str, key: str, convert: Callable, default=None):
        if not self.has(section, key):
            return default
        raw = self.parser.get(section, key).strip()
        try:
            return convert(raw)
        except (ValueError, TypeError) as e:
            raise self.error(f"invalid value '{raw}' ({e})", section, key)

    def get_list(self, section: str, key: str, convert: Callable, default=None):
        def parse(raw):
            items = [item.strip() for item in raw.split(",") if item.strip()]
            if not items:
                raise ValueError("empty list")
            return tuple(convert(item) for item in items)

        return self.get(section, key, parse, default)


def _arm_sizes(item: str) -> ArmSizes:
    n_x, n_y = item.split(":")
    return ArmSizes(int(n_x), int(n_y))


def _accrual(raw: str):
    if raw in ("linear", "constant"):
        return raw
    return tuple(float(x) for x in raw.split(",") if x.strip())


def _parse_model(reader: _Reader, rho_values: Tuple[float, ...]) -> PlaceboModel:
    section = "model"
    preset = reader.get(section, "preset", str, "bapi302")
    if preset not in MODEL_PRESETS:
        raise reader.error(f"preset must be one of {MODEL_PRESETS}, got '{preset}'", section, "preset")
    base = bapi302_placebo_model() if preset == "bapi302" else None

    visits = reader.get_list(section, "visits", str, base.visit_labels if base else None)
    outcomes = reader.get_list(section, "outcomes", str, base.outcome_labels if base else None)
    if visits is None or outcomes is None:
        raise reader.error("without a preset, 'visits' and 'outcomes' are required", section)

    columns = {name: [] for name in MODEL_OUTCOME_KEYS}
    for k, outcome in enumerate(outcomes):
        from_base = base is not None and outcome in base.outcome_labels and len(visits) == len(base.visit_labels)
        base_k = base.outcome_labels.index(outcome) if from_base else None
        for name in MODEL_OUTCOME_KEYS:
            key = f"{name}.{outcome}"
            if name == "direction":
                default = base.direction[base_k] if from_base else 1
                value = reader.get(section, key, int, default)
            else:
                default = tuple(getattr(base, name)[:, base_k]) if from_base else None
                value = reader.get_list(section, key, float, default)
                if value is None:
                    raise reader.error(f"missing '{key}' for outcome '{outcome}'", section)
                if len(value) != len(visits):
                    raise reader.error(f"expected {len(visits)} values, got {len(value)}", section, key)
            columns[name].append(value)

    rho_time = reader.get(section, "rho_time", float, base.rho_time if base else 0.6)
    random_effect_sd = reader.get(section, "random_effect_sd", float, base.random_effect_sd if base else 0.0)
    residual_sd = reader.get(section, "residual_sd", float, base.residual_sd if base else 1.0)
    try:
        return PlaceboModel(
            mu=np.array(columns["mu"]).T,
            sd=np.array(columns["sd"]).T,
            rho_time=rho_time,
            rho_outcome=rho_values[0],
            visit_labels=visits,
            outcome_labels=outcomes,
            direction=tuple(columns["direction"]),
            random_effect_sd=random_effect_sd,
            residual_sd=residual_sd,
        )
    except LrstError as e:
        raise reader.error(str(e), section)


def parse_simulation_config(path: str) -> SimulationConfig:
    """
    Parse a simulation ``.cfg`` file.

    Raises:
        ConfigError: On unknown sections or keys and on invalid values, naming section, key and line.
    """
    path = resolve_config_path(path)
    with open(path, encoding="utf-8") as f:
        text = f.read()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}", line=getattr(e, "lineno", None))
    reader = _Reader(parser, text.splitlines())

    for section in parser.sections():
        if section not in SECTION_KEYS:
            raise ConfigError(f"unknown section, expected one of {sorted(SECTION_KEYS)}", section=section)
        for key in parser.options(section):
            per_outcome = section == "model" and key.split(".", 1)[0] in MODEL_OUTCOME_KEYS and "." in key
            if key not in SECTION_KEYS[section] and not per_outcome:
                raise reader.error(f"unknown key, expected one of {sorted(SECTION_KEYS[section])}", section, key)

    kind = reader.get("experiment", "kind", str)
    if kind not in EXPERIMENT_KINDS:
        raise reader.error(f"kind must be one of {EXPERIMENT_KINDS}, got '{kind}'", "experiment", "kind")

    rho_values = reader.get_list("model", "rho_outcome", float, (0.5,))
    if kind == "type1" and len(rho_values) != 1:
        raise reader.error("a type1 experiment takes a single rho_outcome", "model", "rho_outcome")
    model = _parse_model(reader, rho_values)

    delta = reader.get_list("effect", "delta", float, BAPI302_DELTA if kind == "power" else None)
    if delta is None:
        delta = (0.0,) * model.shape[1]
    multipliers = reader.get_list("effect", "multipliers", float, (1.0,) if kind == "power" else (0.0,))
    try:
        effect = EffectSpec(delta=delta, accrual=reader.get("effect", "accrual", _accrual, "linear"))
        effect.shift(*model.shape)
        for m in multipliers:
            effect.with_multiplier(m)
    except LrstError as e:
        raise reader.error(str(e), "effect")

    n_values = reader.get_list("design", "n_values", int, ())
    arm_sizes = reader.get_list("design", "arm_sizes", _arm_sizes, ())
    if not n_values and not arm_sizes:
        raise reader.error("either 'n_values' or 'arm_sizes' is required", "design")

    variants = reader.get_list("experiment", "variants", str, VARIANTS)
    unknown = set(variants) - set(VARIANTS)
    if unknown:
        raise reader.error(f"unknown variant(s) {sorted(unknown)}", "experiment", "variants")

    return SimulationConfig(
        kind=kind,
        model=model,
        effect=effect,
        name=reader.get("experiment", "name", str, os.path.splitext(os.path.basename(path))[0]),
        seed=reader.get("experiment", "seed", int, 0),
        n_reps=reader.get("experiment", "n_reps", int, 1000),
        threads=reader.get("experiment", "threads", int, 1),
        alphas=reader.get_list("experiment", "alpha", float, (0.05, 0.1) if kind == "type1" else (0.05,)),
        variants=variants,
        n_values=n_values,
        arm_sizes=arm_sizes,
        control_fraction=reader.get("design", "control_fraction", float, CONTROL_FRACTION),
        rho_values=rho_values,
        multipliers=multipliers,
    )


def _join(values) -> str:
    return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in values)


def simulation_config_to_dict(config: SimulationConfig) -> Dict[str, Dict[str, str]]:
    """Every setting, defaults included, as ``{section: {key: value}}`` strings."""
    model = config.model
    sections = {
        "experiment": {
            "kind": config.kind,
            "name": config.name,
            "seed": str(config.seed),
            "n_reps": str(config.n_reps),
            "threads": str(config.threads),
            "alpha": _join(config.alphas),
            "variants": _join(config.variants),
        },
        "design": {"control_fraction": repr(config.control_fraction)},
        "model": {
            "preset": "none",
            "rho_time": repr(model.rho_time),
            "rho_outcome": _join(config.rho_values),
            "random_effect_sd": repr(model.random_effect_sd),
            "residual_sd": repr(model.residual_sd),
            "visits": _join(model.visit_labels),
            "outcomes": _join(model.outcome_labels),
        },
        "effect": {
            "delta": _join(float(d) for d in config.effect.delta),
            "accrual": config.effect.accrual
            if isinstance(config.effect.accrual, str)
            else _join(config.effect.accrual),
            "multipliers": _join(config.multipliers),
        },
    }
    if config.n_values:
        sections["design"]["n_values"] = _join(config.n_values)
    if config.arm_sizes:
        sections["design"]["arm_sizes"] = ", ".join(f"{s.n_x}:{s.n_y}" for s in config.arm_sizes)
    for k, outcome in enumerate(model.outcome_labels):
        sections["model"][f"mu.{outcome}"] = _join(float(v) for v in model.mu[:, k])
        sections["model"][f"sd.{outcome}"] = _join(float(v) for v in model.sd[:, k])
        sections["model"][f"direction.{outcome}"] = str(model.direction[k])
    return sections


def format_simulation_config(config: SimulationConfig) -> str:
    """The resolved configuration as ``.cfg`` text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_dict(simulation_config_to_dict(config))
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def write_simulation_config(config: SimulationConfig, path: str) -> str:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_simulation_config(config))
    return path
