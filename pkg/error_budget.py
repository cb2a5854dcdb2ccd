"""error_budget.py — finite-statistics error model and probe-count optimisation.

    Δ_s(A)        = √((L+1)^n / M)                (uniform per-gain bound, one sigma)
    f(L, n)       = f(L, 1)^n,  f(L, 1) = √(Σ_j λ_j²)
    Δ_s(Y_est)    = Δ_s(A) · f(L, n)
    Δ_total       = Δ_s(Y_est) + Δ_{L,n}

Both Δ_{L,n} and f come from either the exact decoy coefficients or the
fitted exponentials (natural log):

    ln f(L)  ≈ 0.67 L + 0.189
    ln Δ_L   ≈ -2.772 L + 3.718       (n modes: n·e^{...})
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from itertools import product
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import get_policy
from decoy_core import (
    EXACT,
    FLOAT,
    DecoyCoefficients,
    IntensitySchedule,
    equal_spacing_schedule,
    lambda_coefficients,
    multimode_delta,
    validate_schedule,
)
from decoy_errors import (
    BudgetTooSmall,
    DegenerateFit,
    DomainError,
    IncompleteTensor,
    NoFeasibleL,
    PrecisionExhausted,
)
from gain_records import GainRecord

log = logging.getLogger("error_budget")

DEFAULT_DELTA_FIT = (-2.772, 3.718)
DEFAULT_F_FIT = (0.67, 0.189)


@dataclass(frozen=True)
class TermModel:
    """How a budget term is evaluated: "exact" from coefficients or "fitted" exponential."""
    kind: str
    slope: float = 0.0
    intercept: float = 0.0
    schedule: Optional[IntensitySchedule] = None    # exact only; None = equal spacing for every L

    @classmethod
    def exact(cls, schedule: Optional[IntensitySchedule] = None) -> "TermModel":
        return cls("exact", schedule=schedule)

    @classmethod
    def fitted(cls, slope: float, intercept: float) -> "TermModel":
        return cls("fitted", slope=float(slope), intercept=float(intercept))

    def schedule_for(self, L: int) -> IntensitySchedule:
        if self.schedule is None:
            return equal_spacing_schedule(L)
        if self.schedule.L != L:
            raise DomainError(f"exact model schedule has L={self.schedule.L}, asked for L={L}")
        return self.schedule

    def label(self) -> str:
        if self.kind == "fitted":
            return f"fitted({self.slope:g},{self.intercept:g})"
        return "exact(equal)" if self.schedule is None else "exact(schedule)"


FITTED_DELTA = TermModel.fitted(*DEFAULT_DELTA_FIT)
FITTED_F = TermModel.fitted(*DEFAULT_F_FIT)
EXACT_EQUAL = TermModel.exact()


@dataclass(frozen=True)
class ErrorBudget:
    L: int
    n: int
    M: Optional[float]
    delta_s_A: float
    f_factor: float
    delta_s_y1: float
    delta_est: float
    delta_total: float
    delta_model: str = ""
    f_model: str = ""
    tight: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual_rms: float
    points: Tuple[Tuple[float, float], ...]
    prefactor: Optional[float] = None
    exponent: Optional[float] = None

    def predict(self, x: float) -> float:
        if self.exponent is not None:
            return self.prefactor * x ** (-self.exponent)
        return self.slope * x + self.intercept

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["points"] = [list(p) for p in self.points]
        return d


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

def _finite_budget(M: Optional[float]) -> bool:
    return M is not None and not (isinstance(M, float) and math.isinf(M))


def statistical_error_per_gain(L: int, n: int, M: float) -> float:
    settings = (int(L) + 1) ** int(n)
    if M < settings:
        raise BudgetTooSmall(f"budget {M:g} is below the {settings} settings", budget=M, settings=settings)
    return math.sqrt(settings / M)


def f_factor(coeffs: DecoyCoefficients, n: int = 1) -> float:
    return math.sqrt(float(coeffs.squared_norm())) ** int(n)


def propagated_statistical_error(record: GainRecord, coeffs: DecoyCoefficients) -> float:
    """√(Σ (Π w)² σ_A²) with σ_A = √(Q(1−Q)/m)·e^{Σμ}; exact entries contribute 0."""
    n = record.mode_count
    grid = coeffs.schedule.floats()
    w = [float(x) for x in coeffs.weights]
    terms: List[float] = []
    missing = []
    for idx in product(range(len(grid)), repeat=n):
        mus = tuple(grid[j] for j in idx)
        e = record.get(mus)
        if e is None:
            missing.append(mus)
            continue
        if e.pulses is None:
            continue
        q = e.clicks / e.pulses
        sigma = math.sqrt(q * (1.0 - q) / e.pulses) * math.exp(sum(mus))
        terms.append((math.prod(w[j] for j in idx) * sigma) ** 2)
    if missing:
        raise IncompleteTensor(f"{len(missing)} gain setting(s) missing", missing=missing)
    return math.sqrt(math.fsum(terms))


@lru_cache(maxsize=512)
def _exact_delta_at(schedule: IntensitySchedule, n: int, float_threshold: int) -> float:
    mode = FLOAT if schedule.L <= float_threshold else EXACT
    try:
        return float(multimode_delta(schedule, n, mode))
    except PrecisionExhausted:
        log.warning("float Δ failed certification at L=%d; switching to exact arithmetic", schedule.L)
        return float(multimode_delta(schedule, n, EXACT))


@lru_cache(maxsize=512)
def _exact_f_at(schedule: IntensitySchedule, float_threshold: int) -> float:
    mode = FLOAT if schedule.L <= float_threshold else EXACT
    return f_factor(lambda_coefficients(schedule, mode), 1)


def _exact_delta(schedule: IntensitySchedule, n: int) -> float:
    return _exact_delta_at(schedule, n, get_policy().float_exact_threshold)


def _exact_f(schedule: IntensitySchedule) -> float:
    return _exact_f_at(schedule, get_policy().float_exact_threshold)


def estimation_term(L: int, n: int, model: TermModel) -> float:
    if model.kind == "fitted":
        return n * math.exp(model.slope * L + model.intercept)
    return _exact_delta(model.schedule_for(L), n)


def amplification_term(L: int, n: int, model: TermModel) -> float:
    if model.kind == "fitted":
        return math.exp(n * (model.slope * L + model.intercept))
    return _exact_f(model.schedule_for(L)) ** n


def _record_schedule(record: GainRecord) -> IntensitySchedule:
    return validate_schedule(sorted({k[0] for k in record.keys}))


def _tight_schedule(
    L: int, f_model: TermModel, record: GainRecord, schedule: Optional[IntensitySchedule]
) -> IntensitySchedule:
    if schedule is None:
        schedule = f_model.schedule_for(L) if f_model.kind == "exact" else _record_schedule(record)
    if schedule.L != L:
        raise DomainError(f"tight error: schedule has L={schedule.L}, budget asks for L={L}")
    return schedule


def total_error(
    L: int,
    n: int,
    M: Optional[float],
    delta_model: TermModel = FITTED_DELTA,
    f_model: TermModel = FITTED_F,
    *,
    tight: bool = False,
    record: Optional[GainRecord] = None,
    schedule: Optional[IntensitySchedule] = None,
) -> ErrorBudget:
    """Budget for L probes and n modes; M=None (or inf) drops the statistical term.

    The tight statistical term propagates the record through the coefficients
    of `schedule`, falling back to the exact f model's schedule and then to
    the record's own intensity grid.
    """
    if int(L) != L or L < 1 or int(n) != n or n < 1:
        raise DomainError(f"need integer L >= 1 and n >= 1, got L={L!r}, n={n!r}")
    L, n = int(L), int(n)
    f = amplification_term(L, n, f_model)
    d_est = estimation_term(L, n, delta_model)
    if not _finite_budget(M):
        d_a, d_s = 0.0, 0.0
    elif tight:
        if record is None:
            raise DomainError("tight statistical error needs a gain record")
        statistical_error_per_gain(L, n, M)
        coeffs = lambda_coefficients(_tight_schedule(L, f_model, record, schedule))
        d_s = propagated_statistical_error(record, coeffs)
        d_a = d_s / f if f > 0 else 0.0
    else:
        d_a = statistical_error_per_gain(L, n, M)
        d_s = d_a * f
    return ErrorBudget(
        L=L, n=n, M=M, delta_s_A=d_a, f_factor=f, delta_s_y1=d_s,
        delta_est=d_est, delta_total=d_s + d_est,
        delta_model=delta_model.label(), f_model=f_model.label(), tight=tight,
    )


def optimize_probe_count(
    M: Optional[float],
    n: int = 1,
    delta_model: TermModel = FITTED_DELTA,
    f_model: TermModel = FITTED_F,
    L_max: int = 20,
) -> Tuple[int, ErrorBudget]:
    """Exhaustive scan over L = 1..L_max (feasible only); ties go to the smaller L."""
    candidates = [L for L in range(1, int(L_max) + 1) if not _finite_budget(M) or (L + 1) ** n <= M]
    for model in (delta_model, f_model):
        if model.kind == "exact" and model.schedule is not None:
            candidates = [L for L in candidates if L == model.schedule.L]
    if not candidates:
        raise NoFeasibleL(f"no probe count fits budget {M!r} with {n} mode(s)", budget=M, modes=n, L_max=L_max)
    best: Optional[ErrorBudget] = None
    for L in candidates:
        b = total_error(L, n, M, delta_model, f_model)
        log.debug("scan M=%s n=%d L=%d total=%.6g", M, n, L, b.delta_total)
        if best is None or b.delta_total < best.delta_total:
            best = b
    return best.L, best


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------

def _as_points(points: Iterable[Sequence[float]]) -> Tuple[Tuple[float, float], ...]:
    pts = tuple((float(x), float(y)) for x, y in points)
    if any(not (math.isfinite(x) and math.isfinite(y)) for x, y in pts):
        raise DomainError("fit points must be finite")
    return pts


def linear_fit(points: Iterable[Sequence[float]]) -> FitResult:
    pts = _as_points(points)
    if len({x for x, _ in pts}) < 2:
        raise DegenerateFit("linear fit needs at least two distinct x values", points=len(pts))
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return FitResult(slope=float(slope), intercept=float(intercept), residual_rms=rms, points=pts)


def power_fit(points: Iterable[Sequence[float]]) -> FitResult:
    """Δ ≈ prefactor / M^exponent, fitted on (ln M, ln Δ)."""
    pts = _as_points(points)
    if any(m <= 0 or d <= 0 for m, d in pts):
        raise DomainError("power fit needs positive M and Δ")
    lin = linear_fit((math.log(m), math.log(d)) for m, d in pts)
    return FitResult(
        slope=lin.slope, intercept=lin.intercept, residual_rms=lin.residual_rms, points=pts,
        prefactor=math.exp(lin.intercept), exponent=-lin.slope,
    )


def log_spaced_budgets(lo: float = 1e3, hi: float = 1e12, count: int = 40) -> List[float]:
    return [float(m) for m in np.logspace(math.log10(lo), math.log10(hi), int(count))]


def budget_table(
    M_values: Sequence[float],
    n_values: Sequence[int] = (1,),
    delta_model: TermModel = FITTED_DELTA,
    f_model: TermModel = FITTED_F,
    L_max: int = 20,
) -> pd.DataFrame:
    """Optimal L and budget per (M, n); rows without a feasible L are skipped."""
    rows = []
    for n in n_values:
        for M in M_values:
            try:
                L, b = optimize_probe_count(M, n, delta_model, f_model, L_max)
            except NoFeasibleL:
                log.debug("budget_table: no feasible L for M=%g n=%d", M, n)
                continue
            rows.append({
                "M": M, "n": n, "L_opt": L,
                "delta_s_y1": b.delta_s_y1, "delta_est": b.delta_est, "delta_total": b.delta_total,
                "single_photon_baseline": 1.0 / math.sqrt(M),
            })
    log.info("budget_table: %d rows (%d budgets x %d mode counts)", len(rows), len(M_values), len(n_values))
    return pd.DataFrame(rows, columns=["M", "n", "L_opt", "delta_s_y1", "delta_est", "delta_total",
                                       "single_photon_baseline"])
