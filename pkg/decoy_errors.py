"""decoy_errors.py — one exception hierarchy for the estimation toolkit.

Every error has a stable `code` (used in the CLI's stderr JSON) and an
`exit_code` class:

  2  config / domain errors (bad schedule, bad budget, bad fit input)
  3  missing data (gain records that do not cover the schedule)
  4  infeasible sweeps
  5  numeric limits (precision, overflow, non-convergent series)

Library code raises; only the CLI and config_doctor catch.
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class DecoyError(Exception):
    code = "decoy_error"
    exit_code = 1

    def __init__(self, message: str = "", **details: Any) -> None:
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"error": self.code, "message": self.message}
        if self.details:
            out["details"] = self.details
        return out


# ---------- exit 2: configuration / domain ----------

class ConfigError(DecoyError):
    code = "config_error"
    exit_code = 2


class DomainError(ConfigError):
    code = "domain_error"


class PreconditionViolation(ConfigError):
    code = "precondition_violation"


class EmptySchedule(ConfigError):
    code = "empty_schedule"


class NegativeIntensity(ConfigError):
    code = "negative_intensity"


class DuplicateIntensity(ConfigError):
    code = "duplicate_intensity"


class InvalidPulseCount(ConfigError):
    code = "invalid_pulse_count"


class BudgetTooSmall(ConfigError):
    code = "budget_too_small"


class DegenerateFit(ConfigError):
    code = "degenerate_fit"


# ---------- exit 3: missing data ----------

class MissingGainData(DecoyError):
    code = "missing_gain_data"
    exit_code = 3

    def __init__(self, message: str = "", missing: Optional[list] = None, **details: Any) -> None:
        if missing is not None:
            details["missing"] = [list(t) for t in missing]
        super().__init__(message, **details)
        self.missing = list(missing or [])


class ScheduleMismatch(MissingGainData):
    code = "schedule_mismatch"


class IncompleteTensor(MissingGainData):
    code = "incomplete_tensor"


class NegativeGain(MissingGainData):
    code = "negative_gain"


# ---------- exit 4: infeasible ----------

class InfeasibleSweep(DecoyError):
    code = "infeasible_sweep"
    exit_code = 4


class NoFeasibleL(InfeasibleSweep):
    code = "no_feasible_l"


class ModeCountOverflow(InfeasibleSweep):
    code = "mode_count_overflow"


# ---------- exit 5: numeric limits ----------

class NumericLimit(DecoyError):
    code = "numeric_limit"
    exit_code = 5


class OverflowInFloatMode(NumericLimit):
    code = "overflow_in_float_mode"


class PrecisionExhausted(NumericLimit):
    code = "precision_exhausted"


class NonConvergent(NumericLimit):
    code = "non_convergent"


class TensorTailUnbounded(NumericLimit):
    code = "tensor_tail_unbounded"


class TailNotCertifiable(NumericLimit):
    code = "tail_not_certifiable"
