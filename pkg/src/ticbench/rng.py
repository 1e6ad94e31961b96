"""Seeded pseudo-random streams used for weights, latents and test data.

The generator is splitmix64 in its stateless ("counter") form:

    z = seed + (i + 1) * 0x9E3779B97F4A7C15          (mod 2^64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9         (mod 2^64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB         (mod 2^64)
    out_i = z ^ (z >> 31)

Every stream is a pure function of (seed, index), so any runtime that
implements these three constants reproduces the exact same weights,
latents and schedules bit for bit.  Floats in [0, 1) are built from the
top 53 bits: (out >> 11) * 2^-53.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)

_U64 = np.uint64
_MASK64 = 0xFFFFFFFFFFFFFFFF


def raw(seed: int, n: int) -> np.ndarray:
    """First n 64-bit outputs of the splitmix64 stream for `seed`."""
    idx = np.arange(1, n + 1, dtype=np.uint64)
    z = _U64(seed & _MASK64) + idx * GAMMA
    z = (z ^ (z >> _U64(30))) * MIX1
    z = (z ^ (z >> _U64(27))) * MIX2
    return z ^ (z >> _U64(31))


def uniform(seed: int, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """n doubles uniform in [low, high), deterministic in seed."""
    u = (raw(seed, n) >> _U64(11)).astype(np.float64) * 2.0**-53
    return low + u * (high - low)


def normal(seed: int, n: int) -> np.ndarray:
    """n standard-normal doubles via Box-Muller on paired uniforms."""
    m = (n + 1) // 2
    u = (raw(seed, 2 * m) >> _U64(11)).astype(np.float64) * 2.0**-53
    u1 = np.maximum(u[:m], 2.0**-53)  # keep log() finite
    u2 = u[m:]
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return out[:n]


def derive(seed: int, *indices: int) -> int:
    """Derive a child seed from a parent seed and an index path.

    Each level hashes the parent through splitmix64 offset by the index,
    so (seed, 0) and (seed, 1) give uncorrelated streams.
    """
    s = seed & _MASK64
    for i in indices:
        s = int(raw((s + i) & _MASK64, 1)[0])
    return s
