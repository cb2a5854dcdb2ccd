"""gain_records.py — observed or exact A-values keyed by intensity tuples.

File format (one JSON array, one object per setting):

    [
      {"intensities": [0.0, 0.5], "clicks": 1234, "pulses": 100000, "a_value": 0.0203},
      {"intensities": [0.5, 0.5], "clicks": null, "pulses": null, "a_value": 0.0812}
    ]

`clicks`/`pulses` null means the entry is exact (computed from a model).
Optional keys written by the simulator: `seed`, `stream`, `certified_error`.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from decoy_errors import ConfigError, MissingGainData, NegativeGain

Number = Union[float, Fraction]
Key = Tuple[float, ...]


def intensity_key(intensities: Iterable[Any]) -> Key:
    """Lookup key at full double resolution; distinct floats never share a key."""
    return tuple(float(x) + 0.0 for x in intensities)


@dataclass(frozen=True)
class GainEntry:
    intensities: Key
    a_value: Number
    clicks: Optional[int] = None
    pulses: Optional[int] = None
    seed: Optional[int] = None
    stream: Optional[int] = None
    certified_error: float = 0.0

    @property
    def provenance(self) -> str:
        return "exact" if self.pulses is None else "sampled"

    @property
    def rate(self) -> Optional[float]:
        """Observed click fraction Q (sampled entries only)."""
        if self.pulses is None or self.clicks is None:
            return None
        return self.clicks / self.pulses

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "intensities": [float(x) for x in self.intensities],
            "clicks": self.clicks,
            "pulses": self.pulses,
            "a_value": float(self.a_value),
        }
        if self.seed is not None:
            out["seed"] = self.seed
            out["stream"] = self.stream
        if self.certified_error:
            out["certified_error"] = self.certified_error
        return out


@dataclass
class GainRecord:
    mode_count: int = 1
    entries: Dict[Key, GainEntry] = field(default_factory=dict)
    discarded_pulses: int = 0

    def add(self, entry: GainEntry) -> None:
        if len(entry.intensities) != self.mode_count:
            raise ConfigError(
                f"gain entry has {len(entry.intensities)} intensities, record has {self.mode_count} modes",
                intensities=list(entry.intensities),
            )
        if not isinstance(entry.a_value, Fraction) and not math.isfinite(float(entry.a_value)):
            raise ConfigError("gain entry a_value must be finite", intensities=list(entry.intensities))
        if entry.a_value < 0:
            raise NegativeGain("negative gain value", intensities=list(entry.intensities), a_value=float(entry.a_value))
        self.entries[intensity_key(entry.intensities)] = entry

    def get(self, intensities: Sequence[Any]) -> Optional[GainEntry]:
        return self.entries.get(intensity_key(intensities))

    def a_value(self, intensities: Sequence[Any]) -> Number:
        e = self.get(intensities)
        if e is None:
            raise MissingGainData("missing gain entry", missing=[tuple(float(x) for x in intensities)])
        return e.a_value

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[GainEntry]:
        return iter(self.entries.values())

    @property
    def keys(self) -> List[Key]:
        return list(self.entries.keys())

    @classmethod
    def from_values(cls, values: Dict[Sequence[Any], Number], mode_count: Optional[int] = None) -> "GainRecord":
        """Exact record from {intensity tuple (or scalar): A}."""
        rec: Optional[GainRecord] = None
        for k, a in values.items():
            t = tuple(k) if isinstance(k, (tuple, list)) else (k,)
            if rec is None:
                rec = cls(mode_count=mode_count or len(t))
            rec.add(GainEntry(intensities=tuple(float(x) for x in t), a_value=a))
        return rec if rec is not None else cls(mode_count=mode_count or 1)

    def to_list(self) -> List[Dict[str, Any]]:
        return [e.to_dict() for e in sorted(self.entries.values(), key=lambda e: e.intensities)]


def missing_tuples(intensities: Sequence[Any], mode_count: int, record: GainRecord) -> List[Key]:
    """Setting tuples of the (L+1)^n grid that the record does not cover."""
    grid = [float(x) for x in intensities]
    return [t for t in product(grid, repeat=mode_count) if record.get(t) is None]


# ---------- JSON file I/O ----------

def _entry_from_obj(obj: Any, idx: int) -> GainEntry:
    if not isinstance(obj, dict):
        raise ConfigError(f"gain file entry {idx} is not an object")
    try:
        intens = tuple(float(x) for x in obj["intensities"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"gain file entry {idx}: bad or missing 'intensities'")
    clicks = obj.get("clicks")
    pulses = obj.get("pulses")
    a_raw = obj.get("a_value")
    if (clicks is None) != (pulses is None):
        raise ConfigError(f"gain file entry {idx}: clicks and pulses must both be set or both null")
    if pulses is not None:
        try:
            clicks, pulses = int(clicks), int(pulses)
        except (TypeError, ValueError):
            raise ConfigError(f"gain file entry {idx}: clicks/pulses must be integers")
        if pulses <= 0 or not 0 <= clicks <= pulses:
            raise ConfigError(f"gain file entry {idx}: need 0 <= clicks <= pulses, pulses > 0")
        if a_raw is None:
            a_raw = clicks / pulses * math.exp(sum(intens))
    if a_raw is None:
        raise ConfigError(f"gain file entry {idx}: a_value is required for exact entries")
    try:
        a_value = float(a_raw)
    except (TypeError, ValueError):
        raise ConfigError(f"gain file entry {idx}: a_value must be a number")
    return GainEntry(
        intensities=intens,
        a_value=a_value,
        clicks=clicks,
        pulses=pulses,
        seed=obj.get("seed"),
        stream=obj.get("stream"),
        certified_error=float(obj.get("certified_error") or 0.0),
    )


def load_gain_record(path: str) -> GainRecord:
    """Read a gain file. An empty array raises MissingGainData."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise MissingGainData(f"gain file not found: {path}", path=path)
    except json.JSONDecodeError as e:
        raise ConfigError(f"gain file is not valid JSON: {e}", path=path)
    if not isinstance(doc, list):
        raise ConfigError("gain file must be a JSON array", path=path)
    if not doc:
        raise MissingGainData("gain file is empty", path=path, missing=[])
    entries = [_entry_from_obj(o, i) for i, o in enumerate(doc)]
    rec = GainRecord(mode_count=len(entries[0].intensities))
    for e in entries:
        rec.add(e)
    return rec


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except Exception:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def dump_gain_record(record: GainRecord, path: str) -> None:
    write_atomic(path, json.dumps(record.to_list(), indent=2) + "\n")
