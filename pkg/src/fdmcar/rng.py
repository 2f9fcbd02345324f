"""Named, counter-based random substreams.

Every random quantity in the package is drawn from a ``Stream``: a master
seed plus a key path such as ``("limit", "sup")``. Keys are hashed into a
``SeedSequence`` spawn key and fed to a Philox generator, so a given
(seed, key) pair always produces the same numbers regardless of which other
streams were consumed before it or how work is split across workers.

Normal variates come from ``Generator.standard_normal`` (numpy's ziggurat),
uniform integers from ``Generator.integers``.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

BLOCK_SIZE = 1024


def _key_int(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream key integers must be non-negative")
        return int(part)
    if isinstance(part, str):
        # offset keeps string keys disjoint from small integer keys
        return (1 << 32) + zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"unsupported stream key {part!r}")


@dataclass(frozen=True)
class Stream:
    seed: int
    key: tuple = ()

    def child(self, *parts) -> "Stream":
        return Stream(self.seed, self.key + tuple(parts))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=tuple(_key_int(k) for k in self.key))
        return np.random.Generator(np.random.Philox(ss))

    def derive_seed(self) -> int:
        """A 63-bit integer seed standing in for this stream."""
        ss = np.random.SeedSequence(int(self.seed), spawn_key=tuple(_key_int(k) for k in self.key))
        return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))

    def blocks(self, total: int, size: int = BLOCK_SIZE):
        """Yield ``(start, stop, generator)`` covering ``range(total)`` in fixed blocks."""
        for b, start in enumerate(range(0, total, size)):
            yield start, min(start + size, total), self.child(b).generator()


def as_stream(rng, default_key=()) -> Stream | np.random.Generator:
    """Accept a Stream, a Generator or an integer seed."""
    if isinstance(rng, (Stream, np.random.Generator)):
        return rng
    if isinstance(rng, (int, np.integer)):
        return Stream(int(rng), tuple(default_key))
    if rng is None:
        raise ValueError("an explicit seed or stream is required")
    raise TypeError(f"cannot build a random stream from {type(rng).__name__}")


def standard_normal_blocks(rng, shape_tail: tuple, total: int) -> np.ndarray:
    """Draw ``total`` rows of standard normals of shape ``shape_tail``.

    With a ``Stream`` the rows are filled block by block from child streams;
    with a plain ``Generator`` they are drawn in one call.
    """
    out = np.empty((total,) + tuple(shape_tail))
    if isinstance(rng, np.random.Generator):
        out[...] = rng.standard_normal(out.shape)
        return out
    for start, stop, gen in rng.blocks(total):
        out[start:stop] = gen.standard_normal((stop - start,) + tuple(shape_tail))
    return out
