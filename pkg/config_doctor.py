"""config_doctor.py — lightweight experiment-config lint

This does NOT change behavior. It only reports settings that are likely to
give slow runs, noisy estimates or irreproducible output.

Design goals:
  - Never raise
  - One concise summary line (logged)
  - Small set of high-signal checks
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

from config import get_policy
from experiment_config import ExperimentConfig

log = logging.getLogger("decoy_cli")

_MIN_PULSES = 1000


@dataclass
class DoctorResult:
    ok: bool
    warnings: List[str]
    hints: List[str]


def _probe_count(cfg: ExperimentConfig) -> Optional[int]:
    if cfg.L is not None and cfg.schedule is None:
        return cfg.L
    try:
        return cfg.resolve_schedule().L
    except Exception:
        return None


def diagnose(cfg: ExperimentConfig) -> DoctorResult:
    warnings: List[str] = []
    hints: List[str] = []
    policy = get_policy()
    L = _probe_count(cfg)

    # 1) Float arithmetic beyond the certified range
    if L is not None and cfg.arithmetic_mode == "float" and L > policy.float_exact_threshold:
        warnings.append(f"float mode with L={L} (> {policy.float_exact_threshold})")
        hints.append("Use --exact; float Δ_L will not certify at this L")

    # 2) Gain tensor close to the cap
    if L is not None:
        size = (L + 1) ** cfg.modes
        if size > policy.tensor_cap // 2:
            warnings.append(f"gain tensor has {size} settings (cap {policy.tensor_cap})")
            hints.append("Lower L or the mode count")

        # 3) Too few pulses per setting
        per_setting = cfg.pulses
        if per_setting is None and cfg.budget is not None:
            per_setting = cfg.budget // size
        if per_setting is not None and not cfg.exact_gains and per_setting < _MIN_PULSES:
            warnings.append(f"{per_setting} pulses per setting (< {_MIN_PULSES})")
            hints.append("Statistical error will dominate; raise the budget")

    # 4) Sampled run without a fixed seed
    if cfg.sampled and cfg.seed is None:
        warnings.append("sampled run without a seed (not reproducible)")
        hints.append("Pass --seed to make the output deterministic")

    # 5) Contradicting gain flags
    if cfg.exact_gains and (cfg.pulses is not None or cfg.budget is not None):
        warnings.append("exact_gains set together with a pulse count (pulses ignored)")
        hints.append("Drop either exact_gains or pulses/budget")

    return DoctorResult(ok=not warnings, warnings=warnings, hints=hints)


def emit_once(cfg: ExperimentConfig, prefix: str = "CONFIG", limit: int = 6) -> DoctorResult:
    """Log one line for the run's config; hints go to DEBUG.

      [CONFIG] PASS
      [CONFIG] WARN 2 — 10 pulses per setting (< 1000) | sampled run without a seed (not reproducible)
    """
    try:
        r = diagnose(cfg)
    except Exception as e:
        log.warning("[%s] WARN 1 — config_doctor_failed (%s)", prefix, type(e).__name__)
        return DoctorResult(ok=False, warnings=["config_doctor_failed"], hints=[])
    if r.ok:
        log.info("[%s] PASS", prefix)
        return r
    shown = r.warnings[:limit]
    extra = len(r.warnings) - len(shown)
    log.warning("[%s] WARN %d — %s%s", prefix, len(r.warnings), " | ".join(shown), f" (+{extra} more)" if extra else "")
    for hint in r.hints:
        log.debug("[%s] hint: %s", prefix, hint)
    return r
