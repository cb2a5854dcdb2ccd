import os
from dataclasses import dataclass, fields
from functools import lru_cache

import yaml
from dotenv import load_dotenv

from decoy_errors import ConfigError

load_dotenv(dotenv_path=os.path.join(os.getcwd(), ".env"))

_HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_NUMERICS_FILE = os.path.join(_HERE, "numerics.yaml")


@dataclass(frozen=True)
class NumericsPolicy:
    duplicate_rel_tol: float = 1e-12
    tensor_cap: int = 1_000_000
    float_exact_threshold: int = 8
    float_delta_rel_tol: float = 1e-3
    float_overflow: float = 1e300
    exact_series_rel_tol: float = 1e-30
    gain_rel_tol: float = 1e-15
    gain_abs_floor: float = 1e-17
    series_min_terms: int = 30
    series_max_terms: int = 10_000
    delta2_series_cutoff: float = 1e-4
    delta2_series_terms: int = 6
    golden_digits: int = 30
    workers: int = 1
    log_level: str = "INFO"


def numerics_file() -> str:
    return (os.getenv("DECOY_NUMERICS_FILE") or DEFAULT_NUMERICS_FILE).strip()


def _read_yaml(path: str) -> dict:
    if not path or not os.path.exists(path):
        return {}
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def _coerce(kind, raw, key):
    try:
        if kind is int:
            return int(float(raw))
        if kind is float:
            return float(raw)
        return str(raw).strip().upper()
    except (TypeError, ValueError):
        raise ConfigError(f"numerics policy: bad value for {key}: {raw!r}", key=key)


@lru_cache(maxsize=1)
def get_policy() -> NumericsPolicy:
    """YAML defaults, then DECOY_<KEY> env overrides."""
    doc = _read_yaml(numerics_file())
    values = {}
    for f in fields(NumericsPolicy):
        raw = doc.get(f.name, f.default)
        env = os.getenv(f"DECOY_{f.name.upper()}")
        if env not in (None, ""):
            raw = env
        values[f.name] = _coerce(type(f.default), raw, f.name)
    return NumericsPolicy(**values)


def reload_policy() -> NumericsPolicy:
    get_policy.cache_clear()
    return get_policy()
