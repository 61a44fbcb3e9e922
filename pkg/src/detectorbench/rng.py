"""SplitMix64 random streams.

Every random choice in the toolkit (subsampling, sampling continuations,
span selection) goes through :class:`SplitMix64` so results are reproducible
bit-for-bit by any implementation of the same algorithm.
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z):
    """SplitMix64 output finalizer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def key64(key):
    """Map an int or string key to 64 bits (strings via SHA-256)."""
    if isinstance(key, (int, np.integer)):
        return int(key) & MASK64
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(seed, *keys):
    """Derive an independent 64-bit seed from a base seed and a key path.

    ``derive_seed(s, "doc-17", 3)`` is the same everywhere regardless of the
    order in which documents or perturbations are processed.
    """
    state = int(seed) & MASK64
    for key in keys:
        state = mix64((state ^ key64(key)) + GOLDEN_GAMMA)
    return state


class SplitMix64:
    def __init__(self, seed=0):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def random(self):
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n):
        """Uniform integer in [0, n), unbiased (rejection sampling)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def sample_indices(self, n, k):
        """``k`` distinct indices from ``range(n)`` via partial Fisher-Yates.

        Returned in selection order; callers sort when order is irrelevant.
        """
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def choice(self, probs):
        """Draw an index from a probability vector by inverse CDF."""
        cdf = np.cumsum(probs)
        u = self.random() * cdf[-1]
        idx = int(np.searchsorted(cdf, u, side="right"))
        if idx >= len(cdf):
            # u rounded onto the final edge; take the last token with mass
            idx = int(np.flatnonzero(np.asarray(probs) > 0)[-1])
        return idx
