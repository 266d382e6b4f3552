"""Keyed random sub-streams.

Every random quantity in a simulation is drawn from a stream addressed by a
key tuple, so values never depend on call order, batching, or which worker
process produced them.  Keys are hashed with :class:`numpy.random.SeedSequence`.
"""

import numpy as np

# stream roles
ENV = 0
POLICY = 1

# stream kinds
NOISE = 10
ACTIONS = 11
SETUP = 12
WARM = 20
TARGETS = 21
RERANDOMIZE = 22
FAST_SAMPLE = 23
SHUFFLE = 24
UNIFORM = 25
CHECK = 30

BLOCK = 1024


def _entropy(seed):
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return seed


def substream(seed, *key):
    """Generator for the stream addressed by ``(seed, *key)``."""
    ss = np.random.SeedSequence(_entropy(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(master_seed, replicate, role):
    """64-bit seed for one replicate and role (``ENV`` or ``POLICY``).

    The mix is SeedSequence's hash of ``(master_seed, replicate, role)``, which
    is platform independent.
    """
    ss = np.random.SeedSequence(_entropy(master_seed), spawn_key=(int(replicate), int(role)))
    return int(ss.generate_state(1, np.uint64)[0])


class BlockNormals:
    """Standard normals indexed by position, drawn lazily in keyed blocks.

    ``rows`` normals are produced per index; row ``j`` of block ``k`` comes from
    positions ``j*BLOCK ... (j+1)*BLOCK`` of stream ``(seed, kind, k)``, so row
    ``j`` does not depend on how many rows are requested.
    """

    def __init__(self, seed, kind, rows=1):
        self.seed = seed
        self.kind = kind
        self.rows = rows
        self._k = -1
        self._block = None

    def block(self, k):
        if k != self._k:
            self._block = substream(self.seed, self.kind, k).standard_normal((self.rows, BLOCK))
            self._k = k
        return self._block

    def __getitem__(self, i):
        return self.block(i // BLOCK)[:, i % BLOCK]

    def take(self, start, stop):
        """Columns ``start..stop-1`` as a ``(rows, stop-start)`` array."""
        if stop <= start:
            return np.empty((self.rows, 0))
        parts = []
        i = start
        while i < stop:
            k, off = divmod(i, BLOCK)
            n = min(BLOCK - off, stop - i)
            parts.append(substream(self.seed, self.kind, k).standard_normal((self.rows, BLOCK))[:, off:off + n])
            i += n
        return np.concatenate(parts, axis=1)
