"""Deterministic random streams keyed by integer tuples.

Every random decision in the package draws from a :class:`RngStream`, so a
run is fully reproducible from its master seed. The underlying bit generator
is numpy's counter-based Philox, seeded through a ``SeedSequence`` built from
the stream key, which means two streams with equal keys yield identical draws
regardless of what other streams were consumed before.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A random stream identified by ``key``.

    The conventional key layout is ``(master_seed, run_id, epoch, index)``,
    where ``index`` is a sample or step index. Extra components can be appended
    with :meth:`child`.
    """

    key: tuple[int, ...]

    def __post_init__(self):
        key = tuple(int(k) for k in self.key)
        if any(k < 0 for k in key):
            raise ValueError(f"stream key components must be >= 0, got {key}")
        object.__setattr__(self, "key", key)

    @classmethod
    def from_parts(cls, master_seed, run_id=0, epoch=0, index=0):
        return cls((master_seed, run_id, epoch, index))

    def child(self, *parts: int) -> "RngStream":
        return RngStream(self.key + tuple(parts))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(list(self.key))
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream((int(rng),)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")
