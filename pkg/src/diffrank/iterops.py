"""Differentiable iterative kernels: pseudo-inverse, projection and PSD root.

All kernels unroll a fixed number of iterations onto the tape, so the
gradient returned by ``Tape.backward`` is the exact derivative of the
truncated iteration.

The pseudo-inverse iteration maps an error component lying in
``null(S) x range(S)^perp`` to twice itself. Exact zeros stay zero, but a
rank-deficient product ``A @ B`` carries ~1e-16 singular values instead,
so its error grows by 2x per step once the range part has converged.
Around 30 iterations is the sweet spot for such inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .densemat import ContractError, ShapeError, as_matrix

SYMMETRY_RTOL = 1e-8


@dataclass(frozen=True)
class IterConfig:
    """Iteration counts and step policy for the kernels.

    ``alpha=None`` selects ``1 / ||S||_F^2``, which is always below
    ``2 / sigma_1^2`` and so satisfies the convergence condition of the
    pseudo-inverse iteration without knowing ``sigma_1``.
    """

    k1: int = 10
    k2: int = 30
    alpha: float | None = None
    jitter: float = 0.0

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise ContractError("k1 and k2 must be >= 1")
        if self.alpha is not None and not self.alpha > 0:
            raise ContractError("a fixed alpha must be strictly positive")
        if self.jitter < 0:
            raise ContractError("jitter must be non-negative")


def _as_var(s, tape: ad.Tape | None = None) -> Var:
    if isinstance(s, Var):
        return s
    return (tape or ad.Tape()).leaf(s, requires_grad=False)


def _mm3(a: Var, b: Var, c: Var) -> Var:
    """``a @ b @ c`` with the cheaper association."""
    (p, q), (_, r), (_, t) = a.shape, b.shape, c.shape
    if p * q * r + p * r * t <= q * r * t + p * q * t:
        return ad.matmul(ad.matmul(a, b), c)
    return ad.matmul(a, ad.matmul(b, c))


def approx_pseudo_inverse(s, cfg: IterConfig = IterConfig()) -> Var:
    """``k1`` steps of ``X <- 2X - X S X`` from ``X0 = alpha S^T``."""
    s = _as_var(s)
    st = ad.transpose(s)
    fro_sq = float(np.sum(s.value * s.value))
    if fro_sq == 0.0:
        return ad.scale(st, 0.0)
    if cfg.alpha is None:
        x = ad.scalar_mul(st, ad.power(ad.frobenius_sq(s), -1.0))
    else:
        x = ad.scale(st, cfg.alpha)
    for _ in range(cfg.k1):
        x = ad.sub(ad.scale(x, 2.0), _mm3(x, s, x))
    return x


def approx_project(s, g, cfg: IterConfig = IterConfig()) -> Var:
    """Approximate projection ``S S^+ g`` of the column(s) of ``g`` onto span(S)."""
    s = _as_var(s)
    g = g if isinstance(g, Var) else s.tape.constant(as_matrix(g))
    if g.shape[0] != s.shape[0]:
        raise ShapeError(f"probe has {g.shape[0]} rows, matrix has {s.shape[0]}")
    pinv = approx_pseudo_inverse(s, cfg)
    return ad.matmul(s, ad.matmul(pinv, g))


def check_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL) -> None:
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a.shape}")
    norm = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > rtol * norm:
        raise ContractError(
            f"matrix is not symmetric: ||A - A^T||_F = {np.linalg.norm(a - a.T):.3e}, "
            f"||A||_F = {norm:.3e}")


def approx_root(a, cfg: IterConfig = IterConfig()) -> Var:
    """Principal square root of a PSD matrix by coupled Newton-Schulz.

    ``Y0 = A / ||A||_F``, ``Z0 = I``, ``T = 3I - Z Y``, ``Y <- Y T / 2``,
    ``Z <- T Z / 2``; the result is ``sqrt(||A||_F) Y_k2``. The input is
    symmetrised first. A zero matrix maps to zero.
    """
    a = _as_var(a)
    check_symmetric(a.value)
    m = a.shape[0]
    a = ad.scale(ad.add(a, ad.transpose(a)), 0.5)
    if cfg.jitter:
        a = ad.add(a, cfg.jitter * np.eye(m))
    if not np.any(a.value):
        return ad.scale(a, 0.0)
    norm = ad.power(ad.frobenius_sq(a), 0.5)
    three = 3.0 * np.eye(m)
    y = ad.scalar_mul(a, ad.power(norm, -1.0))
    z = a.tape.constant(np.eye(m))
    for _ in range(cfg.k2):
        t = ad.sub(three, ad.matmul(z, y))
        y, z = ad.scale(ad.matmul(y, t), 0.5), ad.scale(ad.matmul(t, z), 0.5)
    return ad.scalar_mul(y, ad.power(norm, 0.5))


def half_powers(s, p_max: int, cfg: IterConfig = IterConfig()) -> list[Var]:
    """``[(S S^T)^{q/2} for q in 0..p_max]`` sharing one root computation."""
    if p_max < 0:
        raise ContractError("p must be non-negative")
    s = _as_var(s)
    m = s.shape[0]
    out = [s.tape.constant(np.eye(m))]
    if p_max == 0:
        return out
    root = approx_root(ad.matmul(s, ad.transpose(s)), cfg)
    out.append(root)
    for _ in range(2, p_max + 1):
        out.append(ad.matmul(out[-1], root))
    return out


def approx_half_power(s, p: int, cfg: IterConfig = IterConfig()) -> Var:
    """``(S S^T)^{p/2}`` as the ``p``-th power of the approximate root."""
    return half_powers(s, p, cfg)[p]
