"""decoy_core.py — decoy coefficients, Y1 estimates and estimation intervals.

Estimator (vacuum + L probes, schedule 0 = μ0 < μ1 < ... < μL):

    Y1_est = Σ_j w_j A_{μ_j},   w_0 = λ_0,  w_j = (-1)^(j+1) λ_j

    λ_j = ((-1)^(j+1) / μ_j) Π_{n≠j} μ_n / (μ_n - μ_j)      (j ≥ 1, all positive)
    λ_0 = Σ_j (-1)^j λ_j

The remainder Y1_est - Y1 only involves Y_k for k > L and has sign
(-1)^(L+1), so odd L over-estimates and even L under-estimates:

    odd L:  Y1 ∈ [Y1_est - Δ_L, Y1_est]
    even L: Y1 ∈ [Y1_est, Y1_est + Δ_L]

Two arithmetic modes:
  - "float":  IEEE doubles; Δ_L is certified against its own rounding bound
              and PrecisionExhausted is raised when it cannot be.
  - "exact":  Fractions; e^μ is replaced by partial sums with a certified tail.

All functions are pure.
"""

from __future__ import annotations

import logging
import math
import sys
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from itertools import product
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from config import get_policy
from decoy_errors import (
    ConfigError,
    DomainError,
    DuplicateIntensity,
    EmptySchedule,
    IncompleteTensor,
    ModeCountOverflow,
    NegativeGain,
    NegativeIntensity,
    OverflowInFloatMode,
    PrecisionExhausted,
    ScheduleMismatch,
)
from gain_records import GainRecord, intensity_key, missing_tuples

log = logging.getLogger("decoy_core")

Number = Union[float, Fraction]

FLOAT = "float"
EXACT = "exact"
MODES = (FLOAT, EXACT)

_EPS = sys.float_info.epsilon


def check_mode(mode: str) -> str:
    m = (mode or "").strip().lower()
    if m not in MODES:
        raise ConfigError(f"unknown arithmetic mode {mode!r}", allowed=list(MODES))
    return m


def to_fraction(x: Any) -> Fraction:
    """Exact rational for a user value; floats go through their shortest repr (0.1 -> 1/10)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise DomainError(f"not a number: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise DomainError(f"non-finite value: {x!r}")
        return Fraction(repr(x))
    try:
        return Fraction(str(x).strip())
    except (ValueError, ZeroDivisionError):
        raise DomainError(f"not a number: {x!r}")


def as_decimal_string(x: Number, digits: int = 30) -> str:
    """Decimal string with `digits` significant digits (Fractions are not rounded first)."""
    if isinstance(x, Fraction):
        with localcontext() as ctx:
            ctx.prec = max(int(digits), 1)
            d = Decimal(x.numerator) / Decimal(x.denominator)
        return format(d, "g") if d == 0 else format(d, f".{max(int(digits), 1)}g")
    return format(float(x), f".{min(max(int(digits), 1), 17)}g")


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntensitySchedule:
    """μ0 = 0 < μ1 < ... < μL, stored exactly."""
    intensities: Tuple[Fraction, ...]

    def __post_init__(self) -> None:
        mus = self.intensities
        if len(mus) < 2:
            raise EmptySchedule("schedule needs the vacuum plus at least one probe", intensities=[str(m) for m in mus])
        if mus[0] != 0:
            raise DomainError("schedule must start with the vacuum intensity 0")
        for a, b in zip(mus, mus[1:]):
            if not b > a:
                raise DuplicateIntensity("intensities must be strictly increasing", intensities=[str(m) for m in mus])

    @property
    def L(self) -> int:
        return len(self.intensities) - 1

    @property
    def probes(self) -> Tuple[Fraction, ...]:
        return self.intensities[1:]

    def floats(self) -> Tuple[float, ...]:
        return tuple(float(m) for m in self.intensities)

    def values(self, mode: str = FLOAT) -> Tuple[Number, ...]:
        return self.intensities if check_mode(mode) == EXACT else self.floats()

    def to_dict(self) -> Dict[str, Any]:
        return {"L": self.L, "intensities": [float(m) for m in self.intensities]}


def validate_schedule(raw_intensities: Sequence[Any], rel_tol: Optional[float] = None) -> IntensitySchedule:
    """Sort, prepend the vacuum if absent, reject negatives and near-duplicates."""
    if raw_intensities is None or len(raw_intensities) == 0:
        raise EmptySchedule("empty intensity list")
    tol = get_policy().duplicate_rel_tol if rel_tol is None else rel_tol
    mus = [to_fraction(x) for x in raw_intensities]
    neg = [m for m in mus if m < 0]
    if neg:
        raise NegativeIntensity("intensities must be non-negative", intensities=[float(m) for m in neg])
    mus.sort()
    for a, b in zip(mus, mus[1:]):
        if b - a <= abs(b) * Fraction(repr(tol)):
            raise DuplicateIntensity(
                f"intensities {float(a)} and {float(b)} coincide within relative tolerance {tol:g}",
                intensities=[float(a), float(b)],
            )
    if mus[0] != 0:
        mus.insert(0, Fraction(0))
    if len(mus) < 2:
        raise EmptySchedule("schedule has no non-zero probe intensity")
    return IntensitySchedule(tuple(mus))


def equal_spacing_schedule(L: int) -> IntensitySchedule:
    """μ_j = j/L for j = 0..L."""
    if int(L) != L or L < 1:
        raise EmptySchedule(f"equal spacing needs L >= 1, got {L!r}")
    L = int(L)
    return IntensitySchedule(tuple(Fraction(j, L) for j in range(L + 1)))


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecoyCoefficients:
    lambdas: Tuple[Number, ...]
    schedule: IntensitySchedule
    arithmetic_mode: str = FLOAT

    @property
    def L(self) -> int:
        return len(self.lambdas) - 1

    @property
    def weights(self) -> Tuple[Number, ...]:
        """Signed coefficients of A_{μ_j} in the estimator."""
        lam = self.lambdas
        return (lam[0],) + tuple(lam[j] if j % 2 == 1 else -lam[j] for j in range(1, len(lam)))

    def squared_norm(self) -> Number:
        if self.arithmetic_mode == EXACT:
            return sum((x * x for x in self.lambdas), Fraction(0))
        return math.fsum(float(x) * float(x) for x in self.lambdas)

    def to_dict(self, digits: int = 17) -> Dict[str, Any]:
        return {
            "mode": self.arithmetic_mode,
            "schedule": self.schedule.to_dict(),
            "lambda": [as_decimal_string(x, digits) for x in self.lambdas],
        }


def _check_float_range(values: Iterable[float], what: str) -> None:
    cap = get_policy().float_overflow
    for v in values:
        if not math.isfinite(v) or abs(v) > cap:
            raise OverflowInFloatMode(f"{what} exceeds float range; use exact mode", value=str(v))


def lambda_coefficients(schedule: IntensitySchedule, mode: str = FLOAT) -> DecoyCoefficients:
    mode = check_mode(mode)
    mus = schedule.values(mode)
    L = schedule.L
    lam: List[Number] = [Fraction(0) if mode == EXACT else 0.0]
    for j in range(1, L + 1):
        v = (1 if j % 2 == 1 else -1) / mus[j] if mode == FLOAT else Fraction(1 if j % 2 == 1 else -1) / mus[j]
        for n in range(1, L + 1):
            if n != j:
                v = v * mus[n] / (mus[n] - mus[j])
        lam.append(v)
    if mode == EXACT:
        lam[0] = sum(((-1) ** j * lam[j] for j in range(1, L + 1)), Fraction(0))
    else:
        _check_float_range(lam[1:], "decoy coefficient")
        lam[0] = math.fsum((-1) ** j * lam[j] for j in range(1, L + 1))
        _check_float_range(lam[:1], "decoy coefficient")
    return DecoyCoefficients(tuple(lam), schedule, mode)


def lambda_equal_spacing(L: int, mode: str = FLOAT) -> DecoyCoefficients:
    """λ_j = (L/j)·C(L, j) for μ_j = j/L."""
    mode = check_mode(mode)
    schedule = equal_spacing_schedule(L)
    exact = [Fraction(L, j) * math.comb(L, j) for j in range(1, L + 1)]
    lam0 = sum(((-1) ** j * exact[j - 1] for j in range(1, L + 1)), Fraction(0))
    exact.insert(0, lam0)
    if mode == EXACT:
        return DecoyCoefficients(tuple(exact), schedule, EXACT)
    try:
        floats = [float(x) for x in exact]
    except OverflowError:
        raise OverflowInFloatMode("decoy coefficient exceeds float range; use exact mode", L=L)
    _check_float_range(floats, "decoy coefficient")
    return DecoyCoefficients(tuple(floats), schedule, FLOAT)


def coefficient_identity_residuals(coeffs: DecoyCoefficients) -> List[Number]:
    """Σ_j w_j μ_j^k - δ_{k,1} for k = 0..L; all zero for a correct set."""
    mus = coeffs.schedule.values(coeffs.arithmetic_mode)
    w = coeffs.weights
    out: List[Number] = []
    for k in range(coeffs.L + 1):
        target = 1 if k == 1 else 0
        if coeffs.arithmetic_mode == EXACT:
            out.append(sum((w[j] * mus[j] ** k for j in range(len(w))), Fraction(0)) - target)
        else:
            out.append(math.fsum(w[j] * mus[j] ** k for j in range(len(w))) - target)
    return out


# ---------------------------------------------------------------------------
# Inverse Vandermonde
# ---------------------------------------------------------------------------

def _elementary_symmetric(xs: Sequence[Number], zero: Number) -> List[Number]:
    e: List[Number] = [zero + 1]
    for x in xs:
        e = [e[0]] + [e[k] + x * e[k - 1] for k in range(1, len(e))] + [x * e[-1]]
    return e


@dataclass(frozen=True)
class VandermondeInverse:
    """M with M·V' = I, V'_{j,c} = μ_j^c for probes j = 1..L, c = 0..L-1."""
    entries: Tuple[Tuple[Number, ...], ...]
    schedule: IntensitySchedule
    arithmetic_mode: str = FLOAT

    def vandermonde(self) -> List[List[Number]]:
        mus = self.schedule.values(self.arithmetic_mode)[1:]
        return [[mu ** c for c in range(len(mus))] for mu in mus]

    def product_with_vandermonde(self) -> List[List[Number]]:
        v = self.vandermonde()
        size = len(v)
        zero: Number = Fraction(0) if self.arithmetic_mode == EXACT else 0.0
        return [
            [sum((self.entries[i][j] * v[j][c] for j in range(size)), zero) for c in range(size)]
            for i in range(size)
        ]

    def max_identity_deviation(self) -> Number:
        p = self.product_with_vandermonde()
        return max(abs(p[i][c] - (1 if i == c else 0)) for i in range(len(p)) for c in range(len(p)))


def inverse_vandermonde(schedule: IntensitySchedule, mode: str = FLOAT) -> VandermondeInverse:
    mode = check_mode(mode)
    mus = schedule.values(mode)[1:]
    L = len(mus)
    zero: Number = Fraction(0) if mode == EXACT else 0.0
    rows: List[List[Number]] = [[zero] * L for _ in range(L)]
    for j in range(L):
        others = [mus[l] for l in range(L) if l != j]
        e = _elementary_symmetric(others, zero)
        denom: Number = zero + 1
        for x in others:
            denom = denom * (x - mus[j])
        for i in range(1, L + 1):
            sign = 1 if (i - 1) % 2 == 0 else -1
            rows[i - 1][j] = sign * e[L - i] / denom
    if mode == FLOAT:
        _check_float_range((x for r in rows for x in r), "inverse Vandermonde entry")
    return VandermondeInverse(tuple(tuple(r) for r in rows), schedule, mode)


# ---------------------------------------------------------------------------
# Estimation interval Δ_L
# ---------------------------------------------------------------------------

def _remainder_sign(L: int) -> int:
    return 1 if L % 2 == 1 else -1


def _exp_tail_bound(mu: Fraction, K: int) -> Fraction:
    """Σ_{k>K} μ^k/k! ≤ μ^(K+1)/(K+1)! · (K+2)/(K+2-μ), needs K+2 > μ."""
    return mu ** (K + 1) / math.factorial(K + 1) * Fraction(K + 2) / (K + 2 - mu)


def _delta_float(schedule: IntensitySchedule) -> Tuple[float, float]:
    coeffs = lambda_coefficients(schedule, FLOAT)
    mus = schedule.floats()
    terms = [w * math.exp(mu) for w, mu in zip(coeffs.weights, mus)]
    _check_float_range(terms, "Δ_L term")
    s = math.fsum(terms + [-1.0])
    value = _remainder_sign(schedule.L) * s
    L = schedule.L
    err = (4 * L + 6) * _EPS * (math.fsum(abs(t) for t in terms) + 1.0)
    return value, err


def _delta_exact(schedule: IntensitySchedule, rel_tol: Optional[float] = None) -> Tuple[Fraction, Fraction]:
    """Partial sums Σ_j w_j E_K(μ_j) - 1 = Σ_{L<k≤K} c_k, grown until the tail is certified."""
    policy = get_policy()
    tol = Fraction(repr(policy.exact_series_rel_tol if rel_tol is None else rel_tol))
    coeffs = lambda_coefficients(schedule, EXACT)
    w = coeffs.weights
    mus = schedule.intensities
    L = schedule.L
    mu_max = mus[-1]
    powers = [Fraction(1)] * (L + 1)  # μ_j^k / k!
    partial = Fraction(0)
    for k in range(0, L + 1):
        if k > 0:
            powers = [p * mu / k for p, mu in zip(powers, mus)]
        partial += sum((wj * p for wj, p in zip(w, powers)), Fraction(0))
    # rows 0..L of Σ w_j μ_j^k/k! give exactly Y1's coefficient 1
    if partial != 1:
        raise PrecisionExhausted("exact decoy weights failed the Vandermonde identity", L=L)
    s = Fraction(0)
    k = L
    while True:
        k += 1
        powers = [p * mu / k for p, mu in zip(powers, mus)]
        s += sum((wj * p for wj, p in zip(w, powers)), Fraction(0))
        if k < max(policy.series_min_terms, L + 1) or k + 2 <= mu_max:
            continue
        tail = sum((abs(wj) * _exp_tail_bound(mu, k) for wj, mu in zip(w[1:], mus[1:])), Fraction(0))
        if s != 0 and tail <= tol * abs(s):
            log.debug("Δ_L exact: L=%d cutoff K=%d", L, k)
            return _remainder_sign(L) * s, tail
        if k >= policy.series_max_terms:
            raise PrecisionExhausted("exact Δ_L series did not reach the requested tolerance", L=L, K=k)


def interval_delta_with_error(schedule: IntensitySchedule, mode: str = FLOAT, rel_tol: Optional[float] = None) -> Tuple[Number, Number]:
    """(Δ_L, certified absolute error).

    `rel_tol` is the certification tolerance of the chosen mode: the float
    error bound in FLOAT, the series tail in EXACT.
    """
    mode = check_mode(mode)
    if mode == EXACT:
        return _delta_exact(schedule, rel_tol)
    value, err = _delta_float(schedule)
    tol = get_policy().float_delta_rel_tol if rel_tol is None else rel_tol
    if value <= 0 or err > tol * value:
        raise PrecisionExhausted(
            "float Δ_L cannot be certified; use exact mode",
            L=schedule.L, value=value, error_bound=err, rel_tol=tol,
        )
    return value, err


def interval_delta(schedule: IntensitySchedule, mode: str = FLOAT, rel_tol: Optional[float] = None) -> Number:
    return interval_delta_with_error(schedule, mode, rel_tol)[0]


def leading_order_delta(schedule: IntensitySchedule, n: int = 1) -> float:
    """n·μ1…μL/(L+1)!, the small-intensity limit of Δ_{L,n}."""
    prod = Fraction(1)
    for mu in schedule.probes:
        prod *= mu
    return float(n * prod / math.factorial(schedule.L + 1))


_CLOSED_KINDS = {
    "delta0": 0, "Δ0": 0, "Δ₀": 0, "0": 0,
    "delta1": 1, "Δ1": 1, "Δ₁": 1, "1": 1,
    "delta2": 2, "Δ2": 2, "Δ₂": 2, "2": 2,
}


def _g_series(x: float, terms: int) -> float:
    """(e^x - 1 - x)/x² = Σ_{k≥0} x^k/(k+2)!"""
    return math.fsum(x ** k / math.factorial(k + 2) for k in range(terms))


def _g(x: float) -> float:
    p = get_policy()
    if abs(x) < p.delta2_series_cutoff:
        return _g_series(x, p.delta2_series_terms)
    return (math.expm1(x) - x) / (x * x)


def closed_form_delta(kind: Union[str, int], mu: float, nu: Optional[float] = None) -> float:
    """Δ0 (single probe), Δ1 (ν + μ), Δ2 (vacuum + ν + μ)."""
    k = _CLOSED_KINDS.get(str(kind).strip())
    if k is None:
        raise ConfigError(f"unknown closed form {kind!r}", allowed=["delta0", "delta1", "delta2"])
    mu = float(mu)
    if not mu > 0 or not math.isfinite(mu):
        raise DomainError("closed-form Δ needs μ > 0", mu=mu)
    if k == 0:
        return (math.exp(mu) - mu) / mu
    if nu is None:
        if k == 2:
            raise DomainError("Δ2 needs the second probe intensity ν")
        nu = 0.0
    nu = float(nu)
    if not 0 <= nu < mu:
        raise DomainError("closed-form Δ needs 0 <= ν < μ", mu=mu, nu=nu)
    if k == 1:
        return (math.expm1(mu) - math.expm1(nu)) / (mu - nu) - 1.0
    return mu * nu / (mu - nu) * (_g(mu) - _g(nu))


# ---------------------------------------------------------------------------
# Estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimateReport:
    y1_est: Number
    raw_lo: Number
    raw_hi: Number
    interval_lo: float
    interval_hi: float
    delta: Number
    mode_count: int = 1
    probe_count: int = 1
    bound: str = "upper"              # the estimate is an upper (odd L) or lower (even L) bound
    certified_lo: Optional[Number] = None
    certified_hi: Optional[Number] = None
    arithmetic_mode: str = FLOAT

    def contains(self, truth: Number) -> bool:
        return self.raw_lo <= truth <= self.raw_hi

    def to_dict(self, digits: int = 17) -> Dict[str, Any]:
        def s(x):
            return None if x is None else as_decimal_string(x, digits)

        return {
            "y1_est": s(self.y1_est),
            "raw_interval": [s(self.raw_lo), s(self.raw_hi)],
            "interval": [self.interval_lo, self.interval_hi],
            "certified_interval": [s(self.certified_lo), s(self.certified_hi)],
            "delta": s(self.delta),
            "bound": self.bound,
            "mode_count": self.mode_count,
            "L": self.probe_count,
            "mode": self.arithmetic_mode,
        }


def _clamp01(x: Number) -> float:
    return min(max(float(x), 0.0), 1.0)


def _collect_gains(gains: GainRecord, schedule: IntensitySchedule, n: int, mode: str) -> Dict[Tuple[int, ...], Number]:
    wrong_shape = ScheduleMismatch if n == 1 else IncompleteTensor
    if gains.mode_count != n:
        raise ScheduleMismatch(f"gain record has {gains.mode_count} modes, expected {n}", record_modes=gains.mode_count, modes=n)
    grid = schedule.floats()
    missing = missing_tuples(grid, n, gains)
    if missing:
        raise wrong_shape(f"{len(missing)} gain setting(s) missing", missing=missing)
    out: Dict[Tuple[int, ...], Number] = {}
    for idx in product(range(schedule.L + 1), repeat=n):
        key = tuple(grid[j] for j in idx)
        a = gains.a_value(key)
        if a < 0:
            raise NegativeGain("negative gain value", intensities=list(key))
        out[idx] = to_fraction(a) if mode == EXACT else float(a)
    expected = {intensity_key(tuple(grid[j] for j in idx)) for idx in out}
    extra = [k for k in gains.keys if k not in expected]
    if extra:
        raise ScheduleMismatch("gain record has intensities outside the schedule", extra=[list(k) for k in extra])
    return out


def _enclosure(delta: Number, L: int, n: int) -> Tuple[Number, Number]:
    """(lo, hi) with Y_est - truth ∈ [lo, hi], split by modes carrying > L photons."""
    if L % 2 == 1:
        return 0 * delta, (1 + delta) ** n - 1
    plus, minus = (1 + delta) ** n, (1 - delta) ** n
    return -(plus - minus) / 2, (plus + minus) / 2 - 1


def _report(est: Number, delta: Number, L: int, n: int, mode: str,
            certified: Tuple[Number, Number], physical_cap: float = 1.0) -> EstimateReport:
    if L % 2 == 1:
        raw_lo, raw_hi, bound = est - delta, est, "upper"
    else:
        raw_lo, raw_hi, bound = est, est + delta, "lower"
    hi = min(_clamp01(raw_hi), physical_cap)
    return EstimateReport(
        y1_est=est,
        raw_lo=raw_lo,
        raw_hi=raw_hi,
        interval_lo=min(_clamp01(raw_lo), hi),
        interval_hi=hi,
        delta=delta,
        mode_count=n,
        probe_count=L,
        bound=bound,
        certified_lo=certified[0],
        certified_hi=certified[1],
        arithmetic_mode=mode,
    )


def _physical_cap(a: Dict[Tuple[int, ...], Number], schedule: IntensitySchedule) -> float:
    """Y_{1..1} ≤ A_{μ..}/Πμ for every setting with no vacuum mode."""
    grid = schedule.floats()
    caps = [float(v) / math.prod(grid[j] for j in idx) for idx, v in a.items() if all(j > 0 for j in idx)]
    return min(caps, default=1.0)


def multimode_estimate(
    gains: GainRecord,
    schedule: IntensitySchedule,
    n: int,
    mode: str = FLOAT,
    tensor_cap: Optional[int] = None,
) -> EstimateReport:
    """Y_{11…1} estimate from the (L+1)^n gain tensor with product coefficients.

    The clamped interval is raw ∩ [0,1]. When every gain is exact it is also
    capped by A/Πμ over the vacuum-free settings, since each such gain
    contains Πμ·Y_{1..1}.
    """
    mode = check_mode(mode)
    if int(n) != n or n < 1:
        raise DomainError(f"mode count must be >= 1, got {n!r}")
    n = int(n)
    cap = get_policy().tensor_cap if tensor_cap is None else tensor_cap
    size = (schedule.L + 1) ** n
    if size > cap:
        raise ModeCountOverflow(f"gain tensor has {size} entries, cap is {cap}", entries=size, cap=cap)
    a = _collect_gains(gains, schedule, n, mode)
    w = lambda_coefficients(schedule, mode).weights
    if mode == EXACT:
        est: Number = Fraction(0)
        for idx, value in a.items():
            c = Fraction(1)
            for j in idx:
                c *= w[j]
            est += c * value
    else:
        est = math.fsum(math.prod(w[j] for j in idx) * value for idx, value in a.items())
    delta_1 = interval_delta(schedule, mode)
    delta_n = _power_excess(_remainder_sign(schedule.L) * delta_1, n)
    lo, hi = _enclosure(delta_1, schedule.L, n)
    log.debug("multimode estimate: L=%d n=%d est=%s Δ=%s", schedule.L, n, est, delta_n)
    physical_cap = _physical_cap(a, schedule) if all(e.provenance == "exact" for e in gains) else 1.0
    return _report(est, delta_n, schedule.L, n, mode, (est - hi, est - lo), physical_cap)


def estimate_y1(gains: GainRecord, schedule: IntensitySchedule, mode: str = FLOAT) -> EstimateReport:
    return multimode_estimate(gains, schedule, 1, mode)


def estimate_y1_single_probe(a_mu: float, mu: float) -> EstimateReport:
    """No vacuum: Y1_est = A_μ/μ, Y1 ∈ [Y1_est - Δ0, Y1_est]."""
    if a_mu < 0:
        raise NegativeGain("negative gain value", a_value=a_mu)
    d0 = closed_form_delta("delta0", mu)
    est = float(a_mu) / float(mu)
    return EstimateReport(
        y1_est=est, raw_lo=est - d0, raw_hi=est,
        interval_lo=_clamp01(est - d0), interval_hi=_clamp01(est),
        delta=d0, probe_count=1, bound="upper",
        certified_lo=est - d0, certified_hi=est,
    )


def _power_excess(r: Number, n: int) -> Number:
    """|(1+r)^n - 1| summed term-wise, so small r keeps its precision."""
    total = sum((math.comb(n, m) * r ** m for m in range(1, n + 1)), 0 * r)
    return abs(total)


def multimode_delta(schedule: IntensitySchedule, n: int, mode: str = FLOAT) -> Number:
    """Δ_{L,n} = |S^n - 1| with S = 1 + (-1)^(L+1) Δ_L; n = 1 gives Δ_L."""
    mode = check_mode(mode)
    if int(n) != n or n < 1:
        raise DomainError(f"mode count must be >= 1, got {n!r}")
    delta = interval_delta(schedule, mode)
    return _power_excess(_remainder_sign(schedule.L) * delta, int(n))
