"""Ground-truth spectral quantities from a one-sided Jacobi SVD.

Used by tests, reports and the convergence harness only. Nothing in the
differentiable path calls into this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .densemat import ContractError, as_matrix

MAX_SWEEPS = 60
DEFAULT_RTOL = 1e-10


class JacobiConvergenceError(RuntimeError):
    def __init__(self, sweeps: int, residual: float):
        super().__init__(
            f"one-sided Jacobi did not converge in {sweeps} sweeps "
            f"(largest relative off-diagonal Gram entry {residual:.3e})")
        self.sweeps = sweeps
        self.residual = residual


@dataclass
class SvdResult:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    threshold: float

    @property
    def rank(self) -> int:
        return int(self.sigma.size)


def _jacobi_columns(a: np.ndarray, tol: float):
    """Orthogonalise the columns of ``a`` (m >= n). Returns (A V, V)."""
    n = a.shape[1]
    w = a.T.copy()          # row i holds column i of A
    v = np.eye(n)           # row i holds column i of V
    worst = 0.0
    for sweep in range(1, MAX_SWEEPS + 1):
        rotated = False
        worst = 0.0
        for i in range(n - 1):
            wi = w[i]
            for j in range(i + 1, n):
                wj = w[j]
                alpha = float(wi @ wi)
                beta = float(wj @ wj)
                gamma = float(wi @ wj)
                scale = math.sqrt(alpha * beta)
                if scale == 0.0 or abs(gamma) <= tol * scale:
                    continue
                worst = max(worst, abs(gamma) / scale)
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                wi_new = c * wi - s * wj
                w[j] = s * wi + c * wj
                w[i] = wi_new
                wi = w[i]
                vi = v[i].copy()
                v[i] = c * vi - s * v[j]
                v[j] = s * vi + c * v[j]
        if not rotated:
            return w.T, v.T
    raise JacobiConvergenceError(MAX_SWEEPS, worst)


def jacobi_svd(s, rtol: float = DEFAULT_RTOL, tol: float | None = None) -> SvdResult:
    """Compact SVD ``S = U diag(sigma) V^T`` by one-sided Jacobi rotations.

    Pairs of columns are rotated until every pair is orthogonal to
    ``tol`` relative to the product of their norms (default: machine
    epsilon times the row count). Singular values at or below
    ``rtol * sigma_1`` are truncated.
    """
    s = as_matrix(s)
    if not np.all(np.isfinite(s)):
        raise ContractError("jacobi_svd needs finite entries")
    m, n = s.shape
    flip = m < n
    a = s.T if flip else s
    if tol is None:
        tol = np.finfo(np.float64).eps * max(a.shape[0], 2)
    av, v = _jacobi_columns(a, tol)
    sigma = np.sqrt(np.sum(av * av, axis=0))
    order = np.argsort(-sigma, kind="stable")
    sigma, av, v = sigma[order], av[:, order], v[:, order]
    threshold = rtol * sigma[0] if sigma.size else 0.0
    keep = sigma > threshold
    sigma, av, v = sigma[keep], av[:, keep], v[:, keep]
    u = av / sigma
    if flip:
        u, v = v, u
    return SvdResult(u=u, sigma=sigma, v=v, threshold=threshold)


def singular_values(s) -> np.ndarray:
    """All non-zero singular values, descending."""
    return jacobi_svd(s, rtol=0.0).sigma


def exact_schatten(s, p: float) -> float:
    """``sum(sigma_i ** p)`` over the non-truncated singular values."""
    sig = jacobi_svd(s).sigma
    return float(np.sum(sig ** p))


def exact_rank(s, tol: float = 1e-8) -> int:
    return int(np.sum(singular_values(s) > tol))


def exact_pinv(s) -> np.ndarray:
    r = jacobi_svd(s)
    return (r.v / r.sigma) @ r.u.T


def exact_psd_root(a) -> np.ndarray:
    """``U diag(sqrt(sigma)) U^T`` of a symmetric PSD matrix."""
    a = as_matrix(a)
    r = jacobi_svd(0.5 * (a + a.T))
    return (r.u * np.sqrt(r.sigma)) @ r.u.T


def exact_projector(s) -> np.ndarray:
    r = jacobi_svd(s)
    return r.u @ r.u.T


def exact_hsum(s, h: Callable[[float], float] | object) -> float:
    """``sum(h(sigma_i))``; ``h`` is a callable or anything with ``.eval``."""
    f = getattr(h, "eval", h)
    return float(sum(f(float(x)) for x in jacobi_svd(s).sigma))
