"""Run configuration: JSON file plus flag overrides, strictly validated.

The config file is flat JSON whose keys mirror the engine's knobs
one-to-one (``top_k``, ``tree_depth``, ``max_nodes``, ...).  Unknown keys
are rejected so typos fail loudly.  Flags override file values; the
``SPECDEC_SEED`` environment variable is the seed fallback when neither
source sets one.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

from .action_space import CHUNK_SIZE, DimensionBounds
from .models import MAX_VOCAB_SIZE


class ConfigError(Exception):
    """Base class for configuration failures; carries a CLI exit code."""

    exit_code = 1


class ConfigFileError(ConfigError):
    """Config file missing or unreadable."""

    exit_code = 3


class ConfigParseError(ConfigError):
    """Config file is not well-formed JSON."""

    exit_code = 4


class ConfigValueError(ConfigError):
    """Config value out of range, wrong type, or unknown key."""

    exit_code = 5


DEFAULT_R_VALUES = (0, 3, 5, 9)
REPORT_FORMATS = ("json", "csv", "table")


@dataclass(frozen=True)
class RunConfig:
    vocab_size: int = 256
    dimension_bounds: DimensionBounds = field(default_factory=DimensionBounds)
    seed: int = 0
    agreement_p: float = 0.5
    noise_sigma: float = 6.0
    top_k: int = 8
    tree_depth: int = 4
    max_nodes: int = 50
    r_values: tuple[int, ...] = DEFAULT_R_VALUES
    per_dimension_r: tuple[int, ...] | None = None
    episodes: int = 50
    target_length: int = 70
    success_tolerance: int = 5
    verify_latency: float | None = None
    draft_latency: float | None = None
    measure_speedup: bool = False
    workers: int = 1
    report_positions: int = 7
    format: str = "table"
    out: str | None = None

    def validate(self) -> None:
        if not 2 <= self.vocab_size <= MAX_VOCAB_SIZE:
            raise ConfigValueError(f"vocab_size must be in [2, {MAX_VOCAB_SIZE}]")
        if not 1 <= self.top_k <= self.vocab_size:
            raise ConfigValueError(
                f"top_k must be in [1, vocab_size={self.vocab_size}], got {self.top_k}"
            )
        if self.tree_depth < 1:
            raise ConfigValueError("tree_depth must be >= 1")
        if self.max_nodes < 1:
            raise ConfigValueError("max_nodes must be >= 1")
        if not 0.0 <= self.agreement_p <= 1.0:
            raise ConfigValueError("agreement_p must be in [0, 1]")
        if self.noise_sigma <= 0.0:
            raise ConfigValueError("noise_sigma must be positive")
        if not self.r_values:
            raise ConfigValueError("r_values must list at least one threshold")
        if any(r < 0 for r in self.r_values):
            raise ConfigValueError("relaxation thresholds must be >= 0")
        if self.per_dimension_r is not None:
            if len(self.per_dimension_r) != CHUNK_SIZE:
                raise ConfigValueError(f"per_dimension_r must list {CHUNK_SIZE} thresholds")
            if any(t < 0 for t in self.per_dimension_r):
                raise ConfigValueError("per-dimension thresholds must be >= 0")
        if self.episodes < 1:
            raise ConfigValueError("episodes must be >= 1")
        if self.target_length < 1 or self.target_length % CHUNK_SIZE != 0:
            raise ConfigValueError(
                f"target_length must be a positive multiple of {CHUNK_SIZE} "
                f"(whole action frames), got {self.target_length}"
            )
        if self.success_tolerance < 0:
            raise ConfigValueError("success_tolerance must be >= 0")
        if self.verify_latency is not None and self.verify_latency <= 0.0:
            raise ConfigValueError("verify_latency must be positive when set")
        if self.draft_latency is not None and self.draft_latency < 0.0:
            raise ConfigValueError("draft_latency must be >= 0 when set")
        if (self.verify_latency is None) != (self.draft_latency is None):
            raise ConfigValueError("verify_latency and draft_latency must be set together")
        if self.workers < 1:
            raise ConfigValueError("workers must be >= 1")
        if self.report_positions not in (6, 7):
            raise ConfigValueError("report_positions must be 6 or 7")
        if self.format not in REPORT_FORMATS:
            raise ConfigValueError(f"format must be one of {REPORT_FORMATS}")

    def tree_params(self):
        from .draft_tree import TreeParams

        return TreeParams(top_k=self.top_k, max_depth=self.tree_depth, max_nodes=self.max_nodes)

    def cost_model(self):
        from .harness import CostModel

        if self.verify_latency is None or self.draft_latency is None:
            return None
        return CostModel(verify_latency=self.verify_latency, draft_latency=self.draft_latency)

    def to_json_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "dimension_bounds": self.dimension_bounds.as_pairs(),
            "seed": self.seed,
            "agreement_p": self.agreement_p,
            "noise_sigma": self.noise_sigma,
            "top_k": self.top_k,
            "tree_depth": self.tree_depth,
            "max_nodes": self.max_nodes,
            "r_values": list(self.r_values),
            "per_dimension_r": list(self.per_dimension_r) if self.per_dimension_r else None,
            "episodes": self.episodes,
            "target_length": self.target_length,
            "success_tolerance": self.success_tolerance,
            "verify_latency": self.verify_latency,
            "draft_latency": self.draft_latency,
            "measure_speedup": self.measure_speedup,
            "workers": self.workers,
            "report_positions": self.report_positions,
        }


_INT_KEYS = {
    "vocab_size",
    "seed",
    "top_k",
    "tree_depth",
    "max_nodes",
    "episodes",
    "target_length",
    "success_tolerance",
    "workers",
    "report_positions",
}
_FLOAT_KEYS = {"agreement_p", "noise_sigma", "verify_latency", "draft_latency"}
_KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | {
    "dimension_bounds",
    "r_values",
    "per_dimension_r",
    "measure_speedup",
    "format",
    "out",
}


def _coerce(key: str, value):
    if value is None and key in ("per_dimension_r", "verify_latency", "draft_latency", "out"):
        return None
    try:
        if key in _INT_KEYS:
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key == "r_values":
            return tuple(int(r) for r in value)
        if key == "per_dimension_r":
            return tuple(int(t) for t in value)
        if key == "dimension_bounds":
            return DimensionBounds.from_pairs(value)
        if key == "measure_speedup":
            if not isinstance(value, bool):
                raise ValueError
            return value
        if key in ("format", "out"):
            if not isinstance(value, str):
                raise ValueError
            return value
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigValueError(f"config key {key!r} has invalid value {value!r}") from exc
    raise ConfigValueError(f"unknown config key {key!r}")


def load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config file {path!r}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"config file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigParseError(f"config file {path!r} must hold a JSON object")
    return raw


def parse_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from an optional file plus flag overrides.

    Precedence: flag override > file value > ``SPECDEC_SEED`` (seed only)
    > built-in default.
    """
    values: dict = {}

    env_seed = os.environ.get("SPECDEC_SEED")
    if env_seed is not None:
        try:
            values["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigValueError(f"SPECDEC_SEED must be an integer, got {env_seed!r}") from exc

    if path is not None:
        raw = load_config_file(path)
        for key, value in raw.items():
            if key not in _KNOWN_KEYS:
                raise ConfigValueError(f"unknown config key {key!r}")
            values[key] = _coerce(key, value)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _KNOWN_KEYS:
            raise ConfigValueError(f"unknown config key {key!r}")
        values[key] = _coerce(key, value)

    config = replace(RunConfig(), **values)
    config.validate()
    return config
