"""Counter-based Philox4x64-10 generator, vectorized over counters.

Each draw is a pure function of ``(key, counter)``, so the noise attached to a
frequency-lattice point depends only on the seed and the point's integer
coordinates, never on lattice size or evaluation order.
"""
from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def _mulhilo(a: np.uint64, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # 64x64 -> 128 bit product from 32-bit limbs.
    a_lo, a_hi = a & _MASK32, a >> _S32
    b_lo, b_hi = b & _MASK32, b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _MASK32) + (hl & _MASK32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    lo = a * b
    return hi, lo


def philox4x64(counter: np.ndarray, key: tuple[int, int], rounds: int = 10) -> np.ndarray:
    """Apply Philox4x64 to an ``(..., 4)`` uint64 counter array."""
    ctr = np.asarray(counter, dtype=np.uint64)
    if ctr.shape[-1] != 4:
        raise ValueError("counter must have trailing dimension 4")
    c0, c1, c2, c3 = (ctr[..., i].copy() for i in range(4))
    k0 = np.uint64(key[0] & 0xFFFFFFFFFFFFFFFF)
    k1 = np.uint64(key[1] & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        for r in range(rounds):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=-1)


def _to_words(values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.int64).astype(np.uint64)


def uniforms(seed: int, coords: np.ndarray, stream: int = 0) -> np.ndarray:
    """Four open-interval uniforms per lattice coordinate row.

    ``coords`` is an ``(m, d)`` integer array with ``d <= 3``; the unused
    counter words are zero and the last word carries ``stream``.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
    m, d = coords.shape
    if d > 3:
        raise ValueError("lattice counters support at most 3 dimensions")
    ctr = np.zeros((m, 4), dtype=np.uint64)
    ctr[:, :d] = _to_words(coords)
    ctr[:, 3] = np.uint64(stream & 0xFFFFFFFFFFFFFFFF)
    raw = philox4x64(ctr, (seed, 0x4F534752))
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def complex_normals(seed: int, coords: np.ndarray, stream: int = 0) -> np.ndarray:
    """Circular complex Gaussians with E|Z|^2 = 1, one per coordinate row."""
    u = uniforms(seed, coords, stream)
    radius = np.sqrt(-2.0 * np.log(u[:, 0]))
    angle = 2.0 * np.pi * u[:, 1]
    return radius * (np.cos(angle) + 1j * np.sin(angle)) / np.sqrt(2.0)
