"""Dense float64 matrix helpers and a reproducible Gaussian sampler.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. The
helpers here add the shape checks the rest of the package relies on.

Random numbers come from a pinned generator so that fixtures can be
reproduced bit-for-bit in any language:

* ``splitmix64`` mixes 64-bit integers (Steele, Lea & Flood constants).
* A stream key is ``mix(seed) ^ mix(mix(stream) + 0x9E3779B97F4A7C15)``
  where ``mix`` is the splitmix64 finalizer; the xoshiro256** state is
  the next four outputs of a splitmix64 sequence started at the key.
* Uniforms are ``(next() >> 11) * 2**-53``.
* Normals come in pairs from Box-Muller,
  ``r = sqrt(-2 ln u1)``, ``(r cos 2 pi u2, r sin 2 pi u2)``, where a
  ``u1`` equal to zero is rejected and redrawn. A vector of odd length
  drops the unused second value of the last pair.
* Seeded fixture matrices draw from streams at ``2**62`` and above, so
  they never share bits with estimator probes.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO_PI = 2.0 * math.pi
# fixture generators live far above the stream indices used by probes
FIXTURE_STREAM_BASE = 1 << 62
_INV_2_53 = 1.0 / (1 << 53)


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class ContractError(ValueError):
    """A documented precondition of an operation was violated."""


# ---------------------------------------------------------------------------
# matrix helpers


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a 2-D float64 array (vectors become columns)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise ShapeError(f"expected a matrix, got array with shape {arr.shape}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "operands") -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what} differ in shape: {a.shape} vs {b.shape}")


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a) -> np.ndarray:
    return as_matrix(a).T.copy()


def add(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    check_same_shape(a, b)
    return a + b


def sub(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    check_same_shape(a, b)
    return a - b


def scale(a, c: float) -> np.ndarray:
    return as_matrix(a) * float(c)


def frobenius_norm(a) -> float:
    a = as_matrix(a)
    return math.sqrt(float(np.sum(a * a)))


def dot(u, v) -> float:
    """Inner product of two vectors (any layout with matching size)."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.size != v.size:
        raise ShapeError(f"vector lengths differ: {u.size} vs {v.size}")
    return float(np.dot(u, v))


def vec(a) -> np.ndarray:
    """Row-major flattening as a column vector."""
    return as_matrix(a).reshape(-1, 1)


# ---------------------------------------------------------------------------
# pinned random number generation


def splitmix64_mix(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int) -> int:
    return splitmix64_mix(seed) ^ splitmix64_mix(splitmix64_mix(stream) + GOLDEN)


def _initial_state(seed: int, stream: int) -> list[int]:
    x = stream_key(seed, stream)
    state = []
    for _ in range(4):
        x = (x + GOLDEN) & MASK64
        state.append(splitmix64_mix(x))
    if not any(state):
        state[0] = GOLDEN
    return state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class GaussianSampler:
    """Single-owner xoshiro256** stream addressed by ``(seed, stream)``.

    Distinct stream indices give independent sequences, so per-sample
    parallel work just needs a distinct index per sample.
    """

    def __init__(self, seed: int = 0, stream: int = 0):
        if seed < 0 or stream < 0:
            raise ContractError("seed and stream must be non-negative")
        self.seed = int(seed) & MASK64
        self.stream = int(stream)
        self._s = _initial_state(self.seed, self.stream)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def normal_pair(self) -> tuple[float, float]:
        u1 = self.uniform()
        while u1 == 0.0:
            u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        return r * math.cos(_TWO_PI * u2), r * math.sin(_TWO_PI * u2)

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(n)], dtype=np.float64)


def sample_gaussian_vector(sampler: GaussianSampler, dim: int) -> np.ndarray:
    """Draw ``dim`` standard normals from ``sampler`` as a ``dim x 1`` column."""
    if dim < 1:
        raise ContractError("dim must be >= 1")
    out = np.empty(dim, dtype=np.float64)
    for i in range(0, dim, 2):
        z0, z1 = sampler.normal_pair()
        out[i] = z0
        if i + 1 < dim:
            out[i + 1] = z1
    return out.reshape(dim, 1)


# Vectorised form: one xoshiro256** generator per column, stepped in lockstep.


def _mix_arr(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _rotl_arr(x: np.ndarray, k: int) -> np.ndarray:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


class _StreamBlock:
    def __init__(self, seed: int, streams: np.ndarray):
        seed_mix = np.uint64(splitmix64_mix(int(seed) & MASK64))
        with np.errstate(over="ignore"):
            x = seed_mix ^ _mix_arr(_mix_arr(streams) + np.uint64(GOLDEN))
            state = []
            for _ in range(4):
                x = x + np.uint64(GOLDEN)
                state.append(_mix_arr(x))
        zero = (state[0] | state[1] | state[2] | state[3]) == 0
        state[0][zero] = np.uint64(GOLDEN)
        self.s = state

    def next_u64(self, idx=None) -> np.ndarray:
        s = self.s
        if idx is None:
            s0, s1, s2, s3 = s
        else:
            s0, s1, s2, s3 = (x[idx] for x in s)
        result = _rotl_arr(s1 * np.uint64(5), 7) * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 = s2 ^ s0
        s3 = s3 ^ s1
        s1 = s1 ^ s2
        s0 = s0 ^ s3
        s2 = s2 ^ t
        s3 = _rotl_arr(s3, 45)
        if idx is None:
            self.s = [s0, s1, s2, s3]
        else:
            for dst, src in zip(s, (s0, s1, s2, s3)):
                dst[idx] = src
        return result

    def uniform(self, idx=None) -> np.ndarray:
        return (self.next_u64(idx) >> np.uint64(11)).astype(np.float64) * _INV_2_53


def sample_gaussian_block(seed: int, dim: int, n: int, stream_offset: int = 0) -> np.ndarray:
    """Return a ``dim x n`` matrix whose column ``i`` is the probe of stream
    ``stream_offset + i``.

    Column ``i`` equals ``sample_gaussian_vector(GaussianSampler(seed,
    stream_offset + i), dim)`` bit for bit.
    """
    if dim < 1 or n < 1:
        raise ContractError("dim and n must be >= 1")
    streams = np.arange(stream_offset, stream_offset + n, dtype=np.uint64)
    block = _StreamBlock(seed, streams)
    out = np.empty((dim, n), dtype=np.float64)
    with np.errstate(over="ignore"):
        for i in range(0, dim, 2):
            u1 = block.uniform()
            bad = np.flatnonzero(u1 == 0.0)
            while bad.size:
                u1[bad] = block.uniform(bad)
                bad = bad[u1[bad] == 0.0]
            u2 = block.uniform()
            r = np.sqrt(-2.0 * np.log(u1))
            out[i] = r * np.cos(_TWO_PI * u2)
            if i + 1 < dim:
                out[i + 1] = r * np.sin(_TWO_PI * u2)
    return out


def gaussian_matrix(seed: int, rows: int, cols: int, stream: int = 0) -> np.ndarray:
    """Seeded ``rows x cols`` matrix of i.i.d. standard normals.

    Column ``j`` is stream ``FIXTURE_STREAM_BASE + (stream << 32) + j``, which
    keeps fixture matrices clear of the low indices used for estimator probes.
    """
    return sample_gaussian_block(seed, rows, cols, stream_offset=FIXTURE_STREAM_BASE + (stream << 32))


def uniform_vector(seed: int, n: int, stream: int = 0) -> np.ndarray:
    """``n`` uniforms in [0, 1) from stream ``FIXTURE_STREAM_BASE + stream``."""
    return GaussianSampler(seed, FIXTURE_STREAM_BASE + stream).uniforms(n)
