"""Counter-based random streams.

Every draw is addressed by ``(seed, purpose, replicate, stream, index)``.
The first four fields are hashed into a Philox key; ``index`` is the Philox
counter position.  A value therefore does not depend on how many replicates
are generated together, in which order, or by how many workers.
"""

import zlib

import numpy as np
from scipy import special

__all__ = ["stream_key", "uniforms", "normals", "replicate_uniforms"]

_TWO53 = float(2**53)


def _tag(name):
    return zlib.crc32(name.encode("utf-8"))


def stream_key(seed, purpose, replicate, stream):
    """Philox key for one replicate's named substream."""
    if seed < 0 or replicate < 0:
        raise ValueError("seed and replicate must be nonnegative")
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF,
             _tag(purpose), int(replicate), _tag(stream)]
    return np.random.SeedSequence(words).generate_state(2, np.uint64)


def uniforms(seed, purpose, replicate, stream, start, count):
    """Open-interval uniforms for draw indices ``start .. start+count-1``.

    Values lie on the midpoint grid ``(j + 1/2) / 2**53`` so they are never
    exactly 0 or 1 and can be pushed through any quantile function.
    """
    if start < 0 or count < 0:
        raise ValueError("start and count must be nonnegative")
    bitgen = np.random.Philox(key=stream_key(seed, purpose, replicate, stream),
                              counter=[start // 4, 0, 0, 0])
    gen = np.random.Generator(bitgen)
    skip = start % 4
    if skip:
        gen.random(skip)
    u = gen.random(count)
    # random() already has 53-bit resolution; shift onto the midpoint grid
    u *= _TWO53
    np.floor(u, out=u)
    u += 0.5
    u /= _TWO53
    return u


def normals(seed, purpose, replicate, stream, start, count):
    """Standard normal draws by inversion of :func:`uniforms`."""
    return special.ndtri(uniforms(seed, purpose, replicate, stream, start, count))


def replicate_uniforms(seed, purpose, replicates, stream, start, count):
    """Stack :func:`uniforms` rows for each replicate id, shape (len(replicates), count)."""
    out = np.empty((len(replicates), count))
    for row, rep in enumerate(replicates):
        out[row] = uniforms(seed, purpose, rep, stream, start, count)
    return out
