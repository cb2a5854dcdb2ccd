"""precision_oracle.py — exact reference values for the estimator.

Independent of the float paths in decoy_core:

  - remainder_expansion: exact coefficients c_k = Σ_j M_{1,j} μ_j^(k-1) / k!
    of the estimator remainder (Y_k weights for k > L) plus a certified tail.
  - oracle_delta: Δ_L as an exact partial sum with a tail bound.
  - reference_delta_mp: Δ_L through mpmath at high precision.
  - containment_campaign: random yield patterns, checks Y1 lies in the interval.
  - golden table: versioned text file of high-precision reference values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from config import get_policy
from decoy_core import (
    EXACT,
    FLOAT,
    IntensitySchedule,
    as_decimal_string,
    closed_form_delta,
    equal_spacing_schedule,
    estimate_y1,
    interval_delta_with_error,
    inverse_vandermonde,
    lambda_coefficients,
)
from decoy_errors import ConfigError, PrecisionExhausted, PreconditionViolation, TailNotCertifiable
from gain_records import GainRecord, write_atomic
from seeded_streams import SeededStreams

log = logging.getLogger("precision_oracle")

GOLDEN_VERSION = "decoy-golden v1"


@dataclass(frozen=True)
class CertifiedValue:
    value: Fraction
    tail: Fraction

    @property
    def lo(self) -> Fraction:
        return self.value - self.tail

    @property
    def hi(self) -> Fraction:
        return self.value + self.tail

    def contains(self, x: Any, slack: float = 0.0) -> bool:
        x = Fraction(x) if not isinstance(x, Fraction) else x
        s = Fraction(slack)
        return self.lo - s <= x <= self.hi + s


@dataclass(frozen=True)
class RemainderExpansion:
    schedule: IntensitySchedule
    terms: Dict[int, Fraction]
    truncation_k: int
    certified_tail: Fraction

    @property
    def sign(self) -> int:
        return 1 if self.schedule.L % 2 == 1 else -1

    def partial_sum(self) -> Fraction:
        return sum(self.terms.values(), Fraction(0))


def remainder_expansion(schedule: IntensitySchedule, K: int) -> RemainderExpansion:
    L = schedule.L
    if K <= L:
        raise PreconditionViolation(f"truncation K={K} must exceed L={L}", K=K, L=L)
    mu_max = schedule.intensities[-1]
    if K + 2 < 2 * mu_max:
        raise TailNotCertifiable(f"K={K} too small to bound the tail for μ_L={float(mu_max)}", K=K)
    first_row = inverse_vandermonde(schedule, EXACT).entries[0]
    probes = schedule.probes
    sign = 1 if L % 2 == 1 else -1
    terms: Dict[int, Fraction] = {}
    powers = [Fraction(1)] * L          # μ_j^(k-1) / k!
    for k in range(1, K + 1):
        powers = [p * (mu if k > 1 else 1) / k for p, mu in zip(powers, probes)]
        if k <= L:
            continue
        c = sum((m * p for m, p in zip(first_row, powers)), Fraction(0))
        if c != 0 and (c > 0) != (sign > 0):
            raise PrecisionExhausted(f"remainder coefficient c_{k} has the wrong sign", L=L, k=k)
        terms[k] = c
    tail = Fraction(0)
    for m, mu in zip(first_row, probes):
        # |M_1j| μ^(k-1)/k! summed over k > K, via the geometric bound with ratio μ/(K+2)
        tail += abs(m) / mu * mu ** (K + 1) / math.factorial(K + 1) * Fraction(K + 2) / (K + 2 - mu)
    log.debug("remainder expansion: L=%d K=%d tail=%.3g", L, K, float(tail))
    return RemainderExpansion(schedule, terms, K, tail)


def oracle_delta(schedule: IntensitySchedule, K: int = 60) -> CertifiedValue:
    """Δ_L = |Σ_{k>L} c_k| bracketed by [value - tail, value + tail]."""
    exp = remainder_expansion(schedule, K)
    return CertifiedValue(abs(exp.partial_sum()), exp.certified_tail)


def reference_delta_mp(schedule: IntensitySchedule, dps: int = 60) -> mpmath.mpf:
    """Δ_L = (-1)^(L+1) (Σ w_j e^{μ_j} - 1) in mpmath at `dps` digits."""
    w = lambda_coefficients(schedule, EXACT).weights
    with mpmath.workdps(dps):
        s = mpmath.fsum(
            mpmath.mpf(wj.numerator) / wj.denominator * mpmath.exp(mpmath.mpf(mu.numerator) / mu.denominator)
            for wj, mu in zip(w, schedule.intensities)
        ) - 1
        return +(s if schedule.L % 2 == 1 else -s)


# ---------------------------------------------------------------------------
# Containment campaigns
# ---------------------------------------------------------------------------

@dataclass
class CampaignReport:
    L: int
    trials: int
    seed: int
    violations: int = 0
    violating_trials: List[int] = field(default_factory=list)
    max_excess: float = 0.0            # largest distance outside the interval, 0 when contained
    delta: float = 0.0

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "L": self.L, "trials": self.trials, "seed": self.seed, "violations": self.violations,
            "violating_trials": self.violating_trials[:20], "max_excess": self.max_excess, "delta": self.delta,
        }


def _series_matrix(schedule: IntensitySchedule, K: int) -> Tuple[np.ndarray, np.ndarray]:
    """P[j, k] = μ_j^k/k! for k ≤ K and R_j = e^{μ_j} - Σ_k P[j, k] (from exact partial sums)."""
    mus = schedule.intensities
    P = np.empty((len(mus), K + 1))
    R = np.empty(len(mus))
    with mpmath.workdps(40):
        for j, mu in enumerate(mus):
            term, total = Fraction(1), Fraction(0)
            for k in range(K + 1):
                if k:
                    term = term * mu / k
                P[j, k] = float(term)
                total += term
            e = mpmath.exp(mpmath.mpf(mu.numerator) / mu.denominator)
            R[j] = float(e - mpmath.mpf(total.numerator) / total.denominator)
    return P, R


def containment_campaign(
    schedule: IntensitySchedule,
    seed: int,
    trials: int,
    K: Optional[int] = None,
) -> CampaignReport:
    """Random Y_k ∈ [0,1] for k ≤ K, tail Y set to 0 and to 1; counts interval misses.

    Trial t draws from stream t of `seed`. Float rounding of the estimate is
    absorbed by a slack proportional to Σ|w_j| A_j.
    """
    if trials < 1:
        raise PreconditionViolation("campaign needs at least one trial", trials=trials)
    L = schedule.L
    K = max(L + 1, 40) if K is None else int(K)
    mode = FLOAT if L <= get_policy().float_exact_threshold else EXACT
    try:
        delta_raw, delta_err = interval_delta_with_error(schedule, mode)
    except PrecisionExhausted:
        log.warning("campaign: float Δ failed certification at L=%d; using exact arithmetic", L)
        delta_raw, delta_err = interval_delta_with_error(schedule, EXACT)
    delta = float(delta_raw)
    w = np.array([float(x) for x in lambda_coefficients(schedule, EXACT).weights])
    P, R = _series_matrix(schedule, K)
    streams = SeededStreams(seed)
    Y = np.vstack([streams.generator(t).random(K + 1) for t in range(trials)])

    report = CampaignReport(L=L, trials=trials, seed=streams.seed, delta=delta)
    excess = np.zeros(trials)
    for tail_value in (0.0, 1.0):
        A = Y @ P.T + tail_value * R
        est = A @ w
        truth = Y[:, 1]
        slack = 16 * np.finfo(float).eps * (np.abs(A) @ np.abs(w)) + float(delta_err)
        lo, hi = (est - delta, est) if L % 2 == 1 else (est, est + delta)
        miss = np.maximum(lo - slack - truth, truth - hi - slack)
        excess = np.maximum(excess, np.maximum(miss, 0.0))
    bad = np.nonzero(excess > 0)[0]
    report.violations = int(bad.size)
    report.violating_trials = [int(t) for t in bad]
    report.max_excess = float(excess.max()) if trials else 0.0
    log.info("containment campaign: L=%d trials=%d violations=%d", L, trials, report.violations)
    return report


def adversarial_gains(schedule: IntensitySchedule, mode: str = FLOAT, K: int = 60) -> GainRecord:
    """Gains for Y_k = 1 when k > L, 0 otherwise; the remainder then equals ±Δ_L.

    Exact mode truncates e^μ at K (error below the remainder tail bound).
    """
    L = schedule.L
    values: Dict[Tuple[float], Any] = {}
    for mu in schedule.intensities:
        term, head, tail = Fraction(1), Fraction(0), Fraction(0)
        for k in range(K + 1):
            if k:
                term = term * mu / k
            if k <= L:
                head += term
            else:
                tail += term
        if mode == EXACT:
            a: Any = tail
        else:
            a = math.exp(float(mu)) - float(head)
        values[(float(mu),)] = max(a, 0 * a)
    return GainRecord.from_values(values, mode_count=1)


def saturation_gap(schedule: IntensitySchedule, mode: str = FLOAT, K: int = 60) -> Dict[str, Any]:
    """estimate - Y1 for the adversarial gains, against (-1)^(L+1) Δ_L (Y1 = 0 there)."""
    rep = estimate_y1(adversarial_gains(schedule, mode, K), schedule, mode)
    signed = rep.delta if schedule.L % 2 == 1 else -rep.delta
    gap = rep.y1_est - signed
    return {"estimate": rep.y1_est, "signed_delta": signed, "gap": gap, "report": rep}


# ---------------------------------------------------------------------------
# Golden table
# ---------------------------------------------------------------------------

def golden_rows(L_values: Sequence[int] = tuple(range(1, 13)), digits: Optional[int] = None) -> List[Tuple[str, str, str]]:
    digits = get_policy().golden_digits if digits is None else int(digits)
    rows: List[Tuple[str, str, str]] = []
    for L in L_values:
        sched = equal_spacing_schedule(L)
        d = oracle_delta(sched, K=max(60, L + 40))
        rows.append(("delta_equal", str(L), as_decimal_string(d.value, digits)))
        f2 = lambda_coefficients(sched, EXACT).squared_norm()
        rows.append(("f_squared_equal", str(L), as_decimal_string(f2, digits)))
    rows.append(("delta2_closed_1_0.5", "2", format(closed_form_delta("delta2", 1.0, 0.5), ".17g")))
    return rows


def export_golden_table(path: str, L_values: Sequence[int] = tuple(range(1, 13)), digits: Optional[int] = None) -> int:
    rows = golden_rows(L_values, digits)
    lines = [f"# {GOLDEN_VERSION}", "# name\tL\tvalue"] + ["\t".join(r) for r in rows]
    write_atomic(path, "\n".join(lines) + "\n")
    log.info("golden table: %d rows -> %s", len(rows), path)
    return len(rows)


def load_golden_table(path: str) -> Dict[Tuple[str, int], str]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [ln.rstrip("\n") for ln in f]
    except FileNotFoundError:
        raise ConfigError(f"golden table not found: {path}", path=path)
    if not lines or lines[0] != f"# {GOLDEN_VERSION}":
        raise ConfigError("golden table has an unknown version header", path=path,
                          header=lines[0] if lines else "")
    out: Dict[Tuple[str, int], str] = {}
    for i, ln in enumerate(lines[1:], start=2):
        if not ln.strip() or ln.startswith("#"):
            continue
        parts = ln.split("\t")
        if len(parts) != 3:
            raise ConfigError(f"golden table line {i} is malformed", path=path, line=i)
        out[(parts[0], int(parts[1]))] = parts[2]
    return out
