"""Deterministic random streams.

All randomness in the package flows through Philox, a counter-based bit
generator.  Streams are keyed by integer tuples (seed, stage tag, index),
so any unit of work (a sparsifier midpoint, a sample index) owns an
independent stream and results do not depend on execution order.  This is
what makes parallel schedules reproducible: the stream for work unit i is
a pure function of the seed, never of which worker ran it.
"""

from __future__ import annotations

import numpy as np

# Stage tags keep streams for different purposes disjoint even when the
# same user seed is passed everywhere.
TAG_WALK = 0x57A1
TAG_MERGE = 0x4D36
TAG_SAMPLE = 0x5A3C
TAG_LEVEL = 0x1E7E
TAG_PROBE = 0xBEEF
TAG_GEN = 0x6E40


def stream(*key: int) -> np.random.Generator:
    """Return a Generator on an independent Philox stream for this key."""
    seq = np.random.SeedSequence(tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def substream_seed(*key: int) -> int:
    """Derive a child integer seed from a key, for APIs that take plain seeds."""
    seq = np.random.SeedSequence(tuple(int(k) for k in key))
    return int(seq.generate_state(1, np.uint64)[0])
