"""experiment_config.py — one JSON document per CLI run.

Example:

    {
      "L": 3,
      "model": {"kind": "loss_dark", "eta": 0.5, "y0": 1e-5},
      "modes": 1,
      "pulses": 100000,
      "seed": 7
    }

Keys may also be nested under "params"; they are promoted to the top level
before validation (top-level keys win). Unknown keys, wrong types and
out-of-range values raise ConfigError. `to_dict()` lists every key with its
effective value (used by --print-config).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional, Union

from channel_sim import YieldModel, source_factory, yield_model_from_dict
from decoy_core import IntensitySchedule, check_mode, equal_spacing_schedule, validate_schedule
from decoy_errors import ConfigError, InvalidPulseCount
from error_budget import EXACT_EQUAL, FITTED_DELTA, FITTED_F, TermModel

_U64 = 2 ** 64 - 1


@dataclass
class ExperimentConfig:
    schedule: Optional[List[float]] = None          # explicit intensities (vacuum added if absent)
    L: Optional[int] = None                         # equal spacing j/L when no explicit schedule
    source: Union[str, Dict[str, Any]] = "poisson"
    model: Dict[str, Any] = field(default_factory=lambda: {"kind": "loss_dark", "eta": 0.5, "y0": 1e-5})
    modes: int = 1
    pulses: Optional[int] = None                    # per setting
    budget: Optional[int] = None                    # total M, split evenly over settings
    exact_gains: bool = False
    gains_file: Optional[str] = None
    seed: Optional[int] = None
    arithmetic_mode: str = "float"
    digits: int = 17
    workers: Optional[int] = None
    tight: bool = False
    delta_model: Optional[str] = None               # "exact" | "fitted"; None = command default
    f_model: Optional[str] = None
    figure: Optional[str] = None
    M_lo: float = 1e3
    M_hi: float = 1e12
    points: int = 40
    L_max: int = 20
    n_values: List[int] = field(default_factory=lambda: [1, 2, 3, 4])
    output: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    # ---------- derived objects ----------

    def resolve_schedule(self) -> IntensitySchedule:
        if self.schedule is not None:
            return validate_schedule(self.schedule)
        if self.L is not None:
            return equal_spacing_schedule(self.L)
        raise ConfigError("config needs either 'schedule' or 'L'")

    def yield_model(self) -> YieldModel:
        """Single-mode models are replicated across `modes` as a separable product."""
        model = yield_model_from_dict(self.model)
        if model.mode_count == self.modes:
            return model
        if model.mode_count == 1:
            return YieldModel.separable_product([model] * self.modes)
        raise ConfigError(f"model has {model.mode_count} modes, config asks for {self.modes}")

    def source_for(self):
        return source_factory(self.source)

    def term_model(self, which: str, default: str = "fitted") -> TermModel:
        """Budget term model; `default` applies when the config leaves it unset."""
        kind = (self.delta_model if which == "delta" else self.f_model) or default
        if kind == "exact":
            return EXACT_EQUAL if self.schedule is None else TermModel.exact(self.resolve_schedule())
        return FITTED_DELTA if which == "delta" else FITTED_F

    @property
    def sampled(self) -> bool:
        return not self.exact_gains and (self.pulses is not None or self.budget is not None)


_KINDS: Dict[str, tuple] = {
    "schedule": (list, type(None)),
    "L": (int, type(None)),
    "source": (str, dict),
    "model": (dict,),
    "modes": (int,),
    "pulses": (int, type(None)),
    "budget": (int, type(None)),
    "exact_gains": (bool,),
    "gains_file": (str, type(None)),
    "seed": (int, type(None)),
    "arithmetic_mode": (str,),
    "digits": (int,),
    "workers": (int, type(None)),
    "tight": (bool,),
    "delta_model": (str, type(None)),
    "f_model": (str, type(None)),
    "figure": (str, type(None)),
    "M_lo": (float, int),
    "M_hi": (float, int),
    "points": (int,),
    "L_max": (int,),
    "n_values": (list,),
    "output": (str, type(None)),
}


def _promote(doc: Mapping[str, Any]) -> Dict[str, Any]:
    out = dict(doc)
    params = out.pop("params", None)
    if params is not None:
        if not isinstance(params, dict):
            raise ConfigError("'params' must be an object")
        for k, v in params.items():
            out.setdefault(k, v)
    return out


def _intlike(v: Any) -> Any:
    # JSON writes 1e6 as a float; accept integral floats for count fields
    if isinstance(v, float) and math.isfinite(v) and v.is_integer():
        return int(v)
    return v


def _check_types(doc: Dict[str, Any]) -> None:
    unknown = sorted(set(doc) - set(_KINDS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}", unknown=unknown)
    for k, v in doc.items():
        kinds = _KINDS[k]
        if int in kinds and bool not in kinds:
            v = doc[k] = _intlike(v)
            if isinstance(v, bool):
                raise ConfigError(f"config key {k!r} must be a number, got a boolean")
        if not isinstance(v, kinds):
            names = "/".join("null" if t is type(None) else t.__name__ for t in kinds)
            raise ConfigError(f"config key {k!r} must be {names}, got {type(v).__name__}", key=k)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.schedule is not None:
        validate_schedule(cfg.schedule)
    if cfg.L is not None:
        equal_spacing_schedule(cfg.L)
    if cfg.modes < 1:
        raise ConfigError(f"modes must be >= 1, got {cfg.modes}")
    if cfg.pulses is not None and cfg.pulses < 1:
        raise InvalidPulseCount(f"pulses must be >= 1, got {cfg.pulses}")
    if cfg.budget is not None and cfg.budget < 1:
        raise InvalidPulseCount(f"budget must be >= 1, got {cfg.budget}")
    if cfg.pulses is not None and cfg.budget is not None:
        raise ConfigError("give either 'pulses' (per setting) or 'budget' (total), not both")
    if cfg.seed is not None and not 0 <= cfg.seed <= _U64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {cfg.seed}")
    cfg.arithmetic_mode = check_mode(cfg.arithmetic_mode)
    if not 1 <= cfg.digits <= 1000:
        raise ConfigError(f"digits must lie in [1, 1000], got {cfg.digits}")
    if cfg.workers is not None and cfg.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {cfg.workers}")
    for key in ("delta_model", "f_model"):
        if getattr(cfg, key) not in (None, "fitted", "exact"):
            raise ConfigError(f"{key} must be 'fitted' or 'exact'", key=key)
    if cfg.L_max < 1 or cfg.points < 2:
        raise ConfigError("need L_max >= 1 and points >= 2")
    if any(not isinstance(n, int) or isinstance(n, bool) or n < 1 for n in cfg.n_values):
        raise ConfigError("n_values must be positive integers")
    cfg.source_for()
    cfg.yield_model()
    return cfg


def config_from_dict(doc: Mapping[str, Any]) -> ExperimentConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("experiment config must be a JSON object")
    flat = _promote(doc)
    _check_types(flat)
    known = {f.name for f in fields(ExperimentConfig)}
    return validate(ExperimentConfig(**{k: v for k, v in flat.items() if k in known}))


def load_experiment_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Read the JSON config (if any) and apply CLI overrides (None values are ignored)."""
    doc: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                doc = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}", path=path)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}", path=path)
        if not isinstance(doc, dict):
            raise ConfigError("experiment config must be a JSON object", path=path)
        doc = _promote(doc)
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v
    return config_from_dict(doc)
