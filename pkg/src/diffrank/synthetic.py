"""Seeded synthetic matrices and scenes used by tests, CLI and sweeps.

All randomness goes through :mod:`diffrank.densemat`, so every fixture
is a pure function of its arguments.
"""

from __future__ import annotations

import numpy as np

from .densemat import gaussian_matrix, uniform_vector


def orthogonal(seed: int, n: int, stream: int = 0) -> np.ndarray:
    q, r = np.linalg.qr(gaussian_matrix(seed, n, n, stream))
    return q * np.sign(np.diag(r))


def with_spectrum(seed: int, m: int, n: int, sigma) -> np.ndarray:
    """``U diag(sigma) V^T`` with seeded orthonormal factors."""
    sigma = np.asarray(sigma, dtype=np.float64)
    r = sigma.size
    u = orthogonal(seed, m, 0)[:, :r]
    v = orthogonal(seed, n, 1)[:, :r]
    return (u * sigma) @ v.T


def conditioned(seed: int, m: int, n: int, cond: float = 10.0, rank: int | None = None) -> np.ndarray:
    """Rank-``rank`` matrix with singular values spread over ``[1, cond]``."""
    r = min(m, n) if rank is None else rank
    sigma = np.geomspace(cond, 1.0, r) if r > 1 else np.array([cond])
    return with_spectrum(seed, m, n, sigma)


def spd(seed: int, n: int, cond: float = 100.0) -> np.ndarray:
    """Symmetric positive definite matrix with eigenvalues in ``[1, cond]``."""
    q = orthogonal(seed, n)
    return (q * np.geomspace(cond, 1.0, n)) @ q.T


def low_rank(seed: int, m: int, n: int, rank: int) -> np.ndarray:
    """``A @ B`` with i.i.d. standard normal factors of inner dimension ``rank``."""
    return gaussian_matrix(seed, m, rank, 0) @ gaussian_matrix(seed, rank, n, 1)


def uniform_mask(seed: int, shape: tuple[int, int], drop_frac: float) -> np.ndarray:
    """Binary mask with exactly ``round(drop_frac * size)`` zeros at random spots."""
    if not 0.0 <= drop_frac <= 1.0:
        raise ValueError("drop_frac must lie in [0, 1]")
    size = shape[0] * shape[1]
    n_drop = int(round(drop_frac * size))
    order = np.argsort(uniform_vector(seed, size), kind="stable")
    mask = np.ones(size)
    mask[order[:n_drop]] = 0.0
    return mask.reshape(shape)


def appendix_problem(seed: int = 0, m: int = 30, n: int = 30, rank: int = 30,
                     noise: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """``(S, C)`` with ``C = A B`` and ``S = C + noise * E``, all Gaussian."""
    c = low_rank(seed, m, n, rank)
    return c + noise * gaussian_matrix(seed, m, n, 2), c


def separation_scene(seed: int = 0, pixels: int = 200, frames: int = 30, rank: int = 2,
                     spike_frac: float = 0.05, spike_mag: float = 10.0):
    """Rank-``rank`` background plus sparse spikes of magnitude ``spike_mag``.

    Returns ``(V, background, spikes)`` where ``spikes`` is the sparse part.
    """
    bg = low_rank(seed, pixels, frames, rank)
    u = uniform_vector(seed, pixels * frames, stream=1).reshape(pixels, frames)
    signs = np.where(uniform_vector(seed, pixels * frames, stream=2) < 0.5, -1.0, 1.0)
    spikes = np.where(u < spike_frac, spike_mag, 0.0) * signs.reshape(pixels, frames)
    return bg + spikes, bg, spikes


def moving_square_frames(seed: int = 0, size: int = 16, frames: int = 10, square: int = 6,
                         background_level: float = 0.3, square_level: float = 0.9):
    """Static textured background with a bright square sliding diagonally.

    Returns ``(frames, support)``, both ``frames x size x size``, values in [0, 1].
    """
    tex = uniform_vector(seed, size * size).reshape(size, size)
    bg = background_level + 0.2 * (tex - 0.5)
    out = np.empty((frames, size, size))
    support = np.zeros((frames, size, size), dtype=bool)
    span = size - square
    for t in range(frames):
        off = int(round(t * span / max(frames - 1, 1)))
        out[t] = bg
        out[t, off:off + square, off:off + square] = square_level
        support[t, off:off + square, off:off + square] = True
    return out, support


def low_rank_image(seed: int = 0, rows: int = 40, cols: int = 40, rank: int = 5) -> np.ndarray:
    """A rank-``rank`` outer-product image scaled into [0.1, 0.9]."""
    img = low_rank(seed, rows, cols, rank)
    lo, hi = img.min(), img.max()
    return 0.1 + 0.8 * (img - lo) / (hi - lo)
