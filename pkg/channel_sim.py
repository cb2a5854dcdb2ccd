"""channel_sim.py — photon sources, yield models, exact gains and click sampling.

This is the ground-truth side of every experiment:

  - SourceDistribution: photon-number distribution P(k) of one mode
    (poisson(μ), fock(k0) or an explicit table).
  - YieldModel: click probability Y_k (or Y_{k1..kn} for coincidences).
  - gain_exact / coincidence_gain_exact: Q = Σ P(k)·Y_k with a certified
    truncation error; A = Q·e^{Σμ}.
  - sample_clicks / run_experiment: Binomial(m, Q) draws on seeded streams.

Series cutoff for Poisson sources:
  K = max(series_min_terms, ⌈μ + 12√μ⌉), doubled until the tail bound
  P(K+1)/(1 - μ/(K+2)) drops below rel_tol·Q (or the absolute floor).
Since 0 ≤ Y ≤ 1 the tail probability is a rigorous error bound.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config import get_policy
from decoy_core import IntensitySchedule, validate_schedule
from decoy_errors import (
    BudgetTooSmall,
    ConfigError,
    DomainError,
    InvalidPulseCount,
    ModeCountOverflow,
    NonConvergent,
    TensorTailUnbounded,
)
from gain_records import GainEntry, GainRecord
from seeded_streams import SeededStreams

log = logging.getLogger("channel_sim")

_TABLE_SUM_TOL = 1e-12

PhotonCounts = Union[int, Sequence[int]]


def _unit(x: Any, name: str) -> float:
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a number, got {x!r}")
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {v!r}", **{name: v})
    return v


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceDistribution:
    kind: str                       # poisson | fock | table
    mu: float = 0.0
    k0: int = 0
    probs: Tuple[float, ...] = ()

    @classmethod
    def poisson(cls, mu: float) -> "SourceDistribution":
        mu = float(mu)
        if not math.isfinite(mu) or mu < 0:
            raise DomainError(f"poisson source needs μ >= 0, got {mu!r}")
        return cls("poisson", mu=mu)

    @classmethod
    def fock(cls, k0: int) -> "SourceDistribution":
        if int(k0) != k0 or k0 < 0:
            raise DomainError(f"fock source needs an integer photon number >= 0, got {k0!r}")
        return cls("fock", k0=int(k0), mu=float(k0))

    @classmethod
    def table(cls, probs: Sequence[float]) -> "SourceDistribution":
        p = tuple(float(x) for x in probs)
        if not p or any(not math.isfinite(x) or x < 0 for x in p):
            raise DomainError("table source needs non-negative probabilities")
        if abs(math.fsum(p) - 1.0) > _TABLE_SUM_TOL:
            raise DomainError("table source probabilities must sum to 1", total=math.fsum(p))
        return cls("table", probs=p, mu=math.fsum(k * x for k, x in enumerate(p)))

    def prob(self, k: int) -> float:
        if k < 0:
            return 0.0
        if self.kind == "poisson":
            if self.mu == 0:
                return 1.0 if k == 0 else 0.0
            return math.exp(k * math.log(self.mu) - self.mu - math.lgamma(k + 1))
        if self.kind == "fock":
            return 1.0 if k == self.k0 else 0.0
        return self.probs[k] if k < len(self.probs) else 0.0

    def pmf(self, K: int) -> np.ndarray:
        return np.array([self.prob(k) for k in range(K + 1)])

    @property
    def support_max(self) -> Optional[int]:
        """Largest photon number with P > 0, None for unbounded support."""
        if self.kind == "fock":
            return self.k0
        if self.kind == "table":
            return len(self.probs) - 1
        return 0 if self.mu == 0 else None

    def tail_bound(self, K: int) -> float:
        """Upper bound on P(X > K)."""
        top = self.support_max
        if top is not None:
            return 0.0 if K >= top else math.fsum(self.prob(k) for k in range(K + 1, top + 1))
        if K + 2 <= self.mu:
            return 1.0
        return self.prob(K + 1) / (1.0 - self.mu / (K + 2))


def source_factory(spec: Union[str, Mapping[str, Any], None]) -> Callable[[float], SourceDistribution]:
    """Map an intensity to its source. "poisson" (default) uses the intensity as μ."""
    if spec is None or spec == "poisson":
        return SourceDistribution.poisson
    if isinstance(spec, Mapping):
        kind = str(spec.get("kind", "")).lower()
        if kind == "poisson":
            return SourceDistribution.poisson
        if kind == "fock":
            fixed = SourceDistribution.fock(spec.get("k0", 1))
            return lambda _mu: fixed
        if kind == "table":
            fixed = SourceDistribution.table(spec.get("probs") or [])
            return lambda _mu: fixed
    raise ConfigError(f"unknown source kind {spec!r}", allowed=["poisson", "fock", "table"])


# ---------------------------------------------------------------------------
# Yield models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class YieldModel:
    kind: str                                   # loss_dark | table | separable_product | custom_tensor
    eta: float = 1.0
    y0: float = 0.0
    values: Tuple[float, ...] = ()
    tail_value: Optional[float] = None
    components: Tuple["YieldModel", ...] = ()
    tensor: Mapping[Tuple[int, ...], float] = field(default_factory=dict)
    modes: int = 1

    @classmethod
    def loss_dark(cls, eta: float, y0: float) -> "YieldModel":
        return cls("loss_dark", eta=_unit(eta, "eta"), y0=_unit(y0, "y0"))

    @classmethod
    def table(cls, values: Sequence[float], tail_value: float) -> "YieldModel":
        vals = tuple(_unit(v, "yield") for v in values)
        return cls("table", values=vals, tail_value=_unit(tail_value, "tail_value"))

    @classmethod
    def separable_product(cls, components: Sequence["YieldModel"]) -> "YieldModel":
        comps = tuple(components)
        if not comps:
            raise DomainError("separable product needs at least one component")
        for c in comps:
            if c.mode_count != 1:
                raise DomainError("separable product components must be single-mode models")
        return cls("separable_product", components=comps, modes=len(comps))

    @classmethod
    def custom_tensor(cls, entries: Mapping[Sequence[int], float], tail_value: Optional[float] = None,
                      modes: Optional[int] = None) -> "YieldModel":
        table: Dict[Tuple[int, ...], float] = {}
        for k, v in entries.items():
            key = tuple(int(x) for x in (k if isinstance(k, (tuple, list)) else (k,)))
            if any(x < 0 for x in key):
                raise DomainError("photon counts must be non-negative", photons=list(key))
            table[key] = _unit(v, "yield")
        sizes = {len(k) for k in table}
        n = modes if modes is not None else (sizes.pop() if len(sizes) == 1 else 0)
        if n < 1 or any(len(k) != n for k in table):
            raise DomainError("custom tensor entries must all have the same mode count")
        tail = None if tail_value is None else _unit(tail_value, "tail_value")
        return cls("custom_tensor", tensor=table, tail_value=tail, modes=n)

    @classmethod
    def ideal_coincidence(cls, n: int) -> "YieldModel":
        """Click iff every mode carries at least one photon."""
        return cls.separable_product([cls.loss_dark(1.0, 0.0)] * int(n))

    @property
    def mode_count(self) -> int:
        return self.modes if self.kind in ("separable_product", "custom_tensor") else 1

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "loss_dark":
            return {"kind": "loss_dark", "eta": self.eta, "y0": self.y0}
        if self.kind == "table":
            return {"kind": "table", "values": list(self.values), "tail_value": self.tail_value}
        if self.kind == "separable_product":
            return {"kind": "separable_product", "components": [c.to_dict() for c in self.components]}
        return {
            "kind": "custom_tensor",
            "entries": [{"photons": list(k), "value": v} for k, v in sorted(self.tensor.items())],
            "tail_value": self.tail_value,
        }


def yield_model_from_dict(doc: Mapping[str, Any]) -> YieldModel:
    """Build a YieldModel from its config-document form (see YieldModel.to_dict)."""
    if not isinstance(doc, Mapping):
        raise ConfigError("yield model must be an object")
    kind = str(doc.get("kind", "")).lower()
    try:
        if kind == "loss_dark":
            return YieldModel.loss_dark(doc.get("eta", 1.0), doc.get("y0", 0.0))
        if kind == "table":
            return YieldModel.table(doc["values"], doc["tail_value"])
        if kind == "separable_product":
            return YieldModel.separable_product([yield_model_from_dict(c) for c in doc["components"]])
        if kind == "ideal_coincidence":
            return YieldModel.ideal_coincidence(int(doc.get("modes", 2)))
        if kind == "custom_tensor":
            entries = {tuple(e["photons"]): e["value"] for e in doc["entries"]}
            return YieldModel.custom_tensor(entries, doc.get("tail_value"))
    except (KeyError, TypeError) as e:
        raise ConfigError(f"yield model {kind!r} is missing a field: {e}")
    raise ConfigError(f"unknown yield model kind {kind!r}",
                      allowed=["loss_dark", "table", "separable_product", "ideal_coincidence", "custom_tensor"])


def yield_at(model: YieldModel, k: PhotonCounts) -> float:
    counts = (k,) if isinstance(k, (int, np.integer)) else tuple(k)
    if any(int(c) != c or c < 0 for c in counts):
        raise DomainError("photon counts must be non-negative integers", photons=list(counts))
    counts = tuple(int(c) for c in counts)
    if len(counts) != model.mode_count:
        raise DomainError(f"model has {model.mode_count} mode(s), got {len(counts)} photon counts")
    if model.kind == "loss_dark":
        return 1.0 - (1.0 - model.y0) * (1.0 - model.eta) ** counts[0]
    if model.kind == "table":
        c = counts[0]
        return model.values[c] if c < len(model.values) else float(model.tail_value)
    if model.kind == "separable_product":
        return math.prod(yield_at(m, (c,)) for m, c in zip(model.components, counts))
    v = model.tensor.get(counts)
    if v is not None:
        return v
    if model.tail_value is None:
        raise TensorTailUnbounded("custom tensor has no value for these photon counts", photons=list(counts))
    return model.tail_value


# ---------------------------------------------------------------------------
# Exact gains
# ---------------------------------------------------------------------------

def _check_rel_tol(rel_tol: Optional[float]) -> float:
    tol = get_policy().gain_rel_tol if rel_tol is None else float(rel_tol)
    if not 0.0 < tol <= 1e-6:
        raise DomainError(f"rel_tol must lie in (0, 1e-6], got {tol!r}")
    return tol


def gain_exact(source: SourceDistribution, model: YieldModel, rel_tol: Optional[float] = None) -> Tuple[float, float]:
    """(Q, certified_error) for a single-mode model."""
    tol = _check_rel_tol(rel_tol)
    if model.mode_count != 1:
        raise DomainError("gain_exact needs a single-mode model; use coincidence_gain_exact")
    if source.kind == "table" and abs(math.fsum(source.probs) - 1.0) > _TABLE_SUM_TOL:
        raise NonConvergent("table source is not normalised", total=math.fsum(source.probs))
    top = source.support_max
    if top is not None:
        q = math.fsum(source.prob(k) * yield_at(model, k) for k in range(top + 1))
        return min(max(q, 0.0), 1.0), 0.0

    policy = get_policy()
    mu = source.mu
    K = max(policy.series_min_terms, math.ceil(mu + 12.0 * math.sqrt(mu)))
    while True:
        q = math.fsum(source.prob(k) * yield_at(model, k) for k in range(K + 1))
        tail = source.tail_bound(K)
        if tail <= tol * q or tail <= policy.gain_abs_floor:
            log.debug("gain_exact: μ=%g K=%d Q=%.17g tail=%.3g", mu, K, q, tail)
            return min(q, 1.0), tail
        if K >= policy.series_max_terms:
            raise NonConvergent("Poisson series did not certify", mu=mu, K=K, tail=tail)
        K = min(2 * K, policy.series_max_terms)


def a_from_q(q: float, total_intensity: float) -> float:
    """A = Q·e^{Σμ}."""
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"gain Q must lie in [0, 1], got {q!r}")
    if total_intensity < 0:
        raise DomainError(f"total intensity must be >= 0, got {total_intensity!r}")
    return q * math.exp(total_intensity)


def _sources_for(intensities: Sequence[float], source: Optional[Callable[[float], SourceDistribution]]):
    make = source or SourceDistribution.poisson
    return [make(float(mu)) for mu in intensities]


def coincidence_gain_with_error(
    intensities: Sequence[float],
    model: YieldModel,
    rel_tol: Optional[float] = None,
    source: Optional[Callable[[float], SourceDistribution]] = None,
) -> Tuple[float, float]:
    """(A, certified_error on A) for the setting (μ1..μn)."""
    mus = [float(x) for x in intensities]
    n = len(mus)
    if n < 1:
        raise DomainError("need at least one intensity")
    if model.mode_count != n:
        raise DomainError(f"model has {model.mode_count} mode(s), setting has {n}")
    sources = _sources_for(mus, source)
    scale = math.exp(sum(mus))

    if model.kind == "separable_product":
        qs, errs = zip(*(gain_exact(s, m, rel_tol) for s, m in zip(sources, model.components)))
        return math.prod(qs) * scale, math.fsum(errs) * scale

    if model.kind == "custom_tensor":
        if model.tail_value is None:
            raise TensorTailUnbounded("custom tensor needs a tail value for photon counts outside the table")
        t = model.tail_value
        q = t + math.fsum(
            math.prod(s.prob(c) for s, c in zip(sources, counts)) * (y - t)
            for counts, y in model.tensor.items()
        )
        return min(max(q, 0.0), 1.0) * scale, 0.0

    q, err = gain_exact(sources[0], model, rel_tol)
    return q * scale, err * scale


def coincidence_gain_exact(
    intensities: Sequence[float],
    model: YieldModel,
    rel_tol: Optional[float] = None,
    source: Optional[Callable[[float], SourceDistribution]] = None,
) -> float:
    return coincidence_gain_with_error(intensities, model, rel_tol, source)[0]


def coincidence_gain_direct(intensities: Sequence[float], model: YieldModel, K: int = 60) -> float:
    """Brute-force A over the photon-count grid {0..K}^n (Poisson sources, no tail)."""
    mus = [float(x) for x in intensities]
    pmfs = [SourceDistribution.poisson(mu).pmf(K) for mu in mus]
    weights = pmfs[0]
    for p in pmfs[1:]:
        weights = np.multiply.outer(weights, p)
    ys = np.empty(weights.shape)
    for idx in np.ndindex(*ys.shape):
        ys[idx] = yield_at(model, idx)
    return float(np.sum(weights * ys)) * math.exp(sum(mus))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_clicks(q: float, pulses: int, seed: int, stream: int = 0) -> int:
    """Binomial(m, Q) click count on stream (seed, stream)."""
    return SeededStreams(seed).binomial(stream, pulses, q)


def _pulses_per_setting(pulses: Any, total_pulses: Any, settings: int) -> Tuple[Optional[int], int]:
    if total_pulses is not None:
        if int(total_pulses) != total_pulses or total_pulses < 1:
            raise InvalidPulseCount(f"pulse budget must be a positive integer, got {total_pulses!r}")
        m = int(total_pulses) // settings
        if m < 1:
            raise BudgetTooSmall(f"budget {total_pulses} is below the {settings} settings",
                                 budget=int(total_pulses), settings=settings)
        return m, int(total_pulses) - m * settings
    if pulses is None or (isinstance(pulses, float) and math.isinf(pulses)):
        return None, 0
    if isinstance(pulses, bool) or int(pulses) != pulses or pulses < 1:
        raise InvalidPulseCount(f"pulse count must be a positive integer, got {pulses!r}")
    return int(pulses), 0


def run_experiment(
    schedule: Union[IntensitySchedule, Sequence[float]],
    model: YieldModel,
    pulses: Optional[Union[int, float]] = None,
    seed: Optional[int] = None,
    *,
    source: Optional[Callable[[float], SourceDistribution]] = None,
    total_pulses: Optional[int] = None,
    workers: Optional[int] = None,
    rel_tol: Optional[float] = None,
) -> GainRecord:
    """GainRecord over all (L+1)^n settings; pulses=None (or inf) gives exact gains.

    With `total_pulses` the budget is split evenly, m = ⌊M/(L+1)^n⌋, and the
    remainder is reported as `discarded_pulses`. Stream id = setting index.
    """
    sched = schedule if isinstance(schedule, IntensitySchedule) else validate_schedule(schedule)
    n = model.mode_count
    settings = (sched.L + 1) ** n
    cap = get_policy().tensor_cap
    if settings > cap:
        raise ModeCountOverflow(f"{settings} settings exceed the tensor cap {cap}", settings=settings, cap=cap)
    m, discarded = _pulses_per_setting(pulses, total_pulses, settings)
    streams = SeededStreams(seed) if m is not None else None
    grid = sched.floats()
    tuples: List[Tuple[float, ...]] = [tuple(grid[j] for j in idx) for idx in product(range(sched.L + 1), repeat=n)]

    def one(i: int) -> GainEntry:
        mus = tuples[i]
        a, err = coincidence_gain_with_error(mus, model, rel_tol, source)
        if m is None:
            return GainEntry(intensities=mus, a_value=a, certified_error=err)
        q = min(max(a * math.exp(-sum(mus)), 0.0), 1.0)
        clicks = streams.binomial(i, m, q)
        return GainEntry(
            intensities=mus, a_value=clicks / m * math.exp(sum(mus)),
            clicks=clicks, pulses=m, seed=streams.seed, stream=i,
        )

    nworkers = max(1, int(workers if workers is not None else get_policy().workers))
    if nworkers > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            entries = list(pool.map(one, range(settings)))
    else:
        entries = [one(i) for i in range(settings)]

    record = GainRecord(mode_count=n, discarded_pulses=discarded)
    for e in entries:
        record.add(e)
    if m is None:
        log.debug("run_experiment: %d exact settings, L=%d n=%d", settings, sched.L, n)
    else:
        log.info("run_experiment: %d settings x %d pulses (seed=%d, discarded=%d)",
                 settings, m, streams.seed, discarded)
    return record
