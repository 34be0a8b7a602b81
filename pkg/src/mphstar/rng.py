"""Counter-based random streams for reproducible parallel simulation.

Stream ``(seed, index)`` is Philox4x64-10 keyed with the 128-bit value
``seed + 2**64 * index`` and counter starting at zero; numpy's ``Philox``
bit generator provides the block function.  Raw 64-bit words are mapped to
variates here rather than by numpy's distribution code:

* uniform: ``((w >> 11) + 0.5) * 2**-53``, strictly inside (0, 1);
* exponential with rate ``lam``: ``-log(u) / lam``.

So a stream is fully determined by ``(seed, index)`` and the order of
draws, independent of thread scheduling.
"""

import numpy as np

__all__ = ["Stream"]

_SCALE = 2.0**-53
_MASK64 = (1 << 64) - 1


class Stream:
    """One independent random stream."""

    def __init__(self, seed: int, index: int = 0):
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must fit in 64 bits, got {seed}")
        if not 0 <= index <= _MASK64:
            raise ValueError(f"stream index must fit in 64 bits, got {index}")
        self.seed = seed
        self.index = index
        self._bits = np.random.Philox(key=seed + (index << 64))

    def uniforms(self, n: int) -> np.ndarray:
        raw = self._bits.random_raw(n)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _SCALE

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def exponentials(self, rates) -> np.ndarray:
        rates = np.asarray(rates, dtype=float)
        return -np.log(self.uniforms(rates.size)) / rates
