"""seeded_streams.py — reproducible, independent random streams.

One root seed fans out into numbered streams (one per intensity setting or
per campaign trial). A stream depends only on (seed, stream_id), so the
order in which workers finish never changes the draws.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from decoy_errors import DomainError, InvalidPulseCount


class SeededStreams:
    """Philox generators keyed by (seed, stream_id). seed=None draws OS entropy once."""

    def __init__(self, seed: Optional[int] = None):
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (2 ** 63))
        if int(seed) != seed or seed < 0:
            raise DomainError(f"seed must be a non-negative integer, got {seed!r}")
        self.seed = int(seed)

    def generator(self, stream_id: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, int(stream_id)])))

    def binomial(self, stream_id: int, trials: int, p: float, size: Optional[int] = None):
        if int(trials) != trials or trials < 1:
            raise InvalidPulseCount(f"pulse count must be a positive integer, got {trials!r}")
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"click probability outside [0, 1]: {p!r}")
        draws = self.generator(stream_id).binomial(int(trials), p, size=size)
        return int(draws) if size is None else draws
