"""Deterministic Gaussian noise streams for the chain updates.

The t-th primal update of a run consumes exactly one length-d standard
normal vector, ``noise(seed, d, t)``.  The stream is backed by the Philox
counter-based bit generator keyed by the run seed, and variates are produced
in fixed-size blocks consumed strictly in order, so the vector delivered for
position t depends only on (seed, d, t).  Dual updates, restarts and logging
consume no randomness.  Two runs (or two different samplers) with the same
seed and dimension therefore see identical noise at identical primal-update
indices, which is what makes the degenerate-parameter collapses between
samplers exact.
"""

from __future__ import annotations

import numpy as np

_BLOCK = 8192


class NoiseStream:
    """Sequential standard-normal vectors keyed by (seed, dim).

    ``take()`` returns the next length-dim vector, ``position`` counts how
    many have been delivered.  Generation happens in blocks of ``_BLOCK``
    vectors; blocks are an implementation detail and do not affect values.
    """

    def __init__(self, seed, dim):
        self.seed = int(seed)
        self.dim = int(dim)
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))
        self._block = np.empty((0, self.dim))
        self._row = 0
        self.position = 0

    def take(self):
        if self._row >= self._block.shape[0]:
            self._block = self._gen.standard_normal((_BLOCK, self.dim))
            self._row = 0
        out = self._block[self._row]
        self._row += 1
        self.position += 1
        return out


def proposal_generator(seed):
    """Independent Philox generator for rejection-sampling proposal draws."""
    return np.random.Generator(np.random.Philox(key=int(seed)))
