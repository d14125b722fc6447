"""Named counter-based random streams.

Every random quantity in the simulator is drawn from a stream addressed by
``(seed, *tags)``; the value at draw index ``i`` is a pure function of the
stream name and ``i``.  Streams are Philox counter-based generators keyed
by a SHA-256 digest of the name, so

* runs with the same seed are bit-identical regardless of evaluation order,
* any contiguous block of a stream can be regenerated in isolation, which
  lets parallel workers split on document index without changing results.
"""

from __future__ import annotations

import hashlib

import numpy as np
from numpy.random import Generator, Philox


def stream_key(seed: int, *tags: object) -> list[int]:
    """128-bit Philox key derived from the seed and the stream name."""
    blob = repr((int(seed),) + tags).encode("utf-8")
    digest = hashlib.sha256(blob).digest()
    return [
        int.from_bytes(digest[0:8], "little"),
        int.from_bytes(digest[8:16], "little"),
    ]


def uniforms(seed: int, tags: tuple[object, ...], count: int, start: int = 0) -> np.ndarray:
    """``count`` float64 uniforms from the named stream, starting at ``start``.

    ``uniforms(s, t, n)[a:b]`` equals ``uniforms(s, t, b - a, start=a)``
    bit for bit.
    """
    if count < 0 or start < 0:
        raise ValueError("count and start must be non-negative")
    bitgen = Philox(key=stream_key(seed, *tags))
    # Philox advances in blocks of four 64-bit words, one word per double.
    bitgen.advance(start // 4)
    skip = start % 4
    draws = Generator(bitgen).random(skip + count)
    return draws[skip:]
