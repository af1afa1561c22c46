"""Generalised low-rank penalties ``sum_i h(sigma_i)`` via series expansions.

A penalty ``h`` is expanded either as a truncated Maclaurin series or in
Laguerre polynomials. Both reduce to power-basis weights ``w_p`` with
``h(x) ~ sum_p w_p x^p``, and the penalty of a matrix becomes
``sum_p w_p ||S||_p^p``, where each Schatten term is estimated
stochastically.

The Maclaurin route is only trustworthy where the caller's singular
values lie inside the series' region of accuracy; nothing here checks
that. ``expansion_error`` is the diagnostic for it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .densemat import ContractError
from .estimator import (EstimateReport, EstimatorConfig, _finish, _lift, nuclear_estimate, probes,
                        quadratic_forms)
from .iterops import approx_project, approx_pseudo_inverse, half_powers

# probe streams for the per-power mode are spaced this far apart
POWER_STREAM_STRIDE = 1 << 40


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class RelaxationSpec:
    """A penalty ``h`` with optional Maclaurin derivatives ``h^(p)(0)``."""

    kind: str
    eval: Callable[[float], float]
    taylor_derivs: Callable[[int], float] | None = None
    gamma: float | None = None

    def __call__(self, x):
        return self.eval(x)


def nuclear() -> RelaxationSpec:
    return RelaxationSpec("nuclear", lambda x: x, lambda p: 1.0 if p == 1 else 0.0)


def laplace(gamma: float = 1.0) -> RelaxationSpec:
    """``h(s) = 1 - exp(-s / gamma)``."""
    if not gamma > 0:
        raise ContractError("laplace gamma must be positive")

    def h(x):
        return 1.0 - np.exp(-x / gamma)

    def deriv(p):
        return 0.0 if p == 0 else -((-1.0 / gamma) ** p)

    return RelaxationSpec("laplace", h, deriv, gamma)


def custom(h: Callable[[float], float], taylor_derivs=None) -> RelaxationSpec:
    return RelaxationSpec("custom", h, taylor_derivs)


# ---------------------------------------------------------------------------
# Laguerre polynomials and quadrature


def laguerre_poly_coeffs(k_max: int) -> np.ndarray:
    """Table ``a[k, p]``: coefficient of ``x^p`` in ``L_k`` for ``k <= k_max``.

    Built from ``(k+1) L_{k+1} = (2k+1-x) L_k - k L_{k-1}``.
    """
    if k_max < 0:
        raise ContractError("k_max must be non-negative")
    a = np.zeros((k_max + 1, k_max + 1))
    a[0, 0] = 1.0
    if k_max >= 1:
        a[1, 0], a[1, 1] = 1.0, -1.0
    for k in range(1, k_max):
        nxt = (2 * k + 1) * a[k] - k * a[k - 1]
        nxt[1:] -= a[k, :-1]
        a[k + 1] = nxt / (k + 1)
    return a


def laguerre_eval(k_max: int, x) -> np.ndarray:
    """Values ``L_0(x) .. L_kmax(x)`` by the recurrence, shape ``(k_max+1, len(x))``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty((k_max + 1, x.size))
    out[0] = 1.0
    if k_max >= 1:
        out[1] = 1.0 - x
    for k in range(1, k_max):
        out[k + 1] = ((2 * k + 1 - x) * out[k] - k * out[k - 1]) / (k + 1)
    return out


def gauss_laguerre(n: int, max_newton: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point rule for ``int_0^inf e^-x f(x) dx``.

    Roots of ``L_n`` are found by Newton's method from the usual asymptotic
    starting guesses; weights are ``-1 / (n L_n'(x) L_{n-1}(x))``.
    """
    if n < 1:
        raise ContractError("need at least one node")
    nodes = np.empty(n)
    weights = np.empty(n)
    z = 0.0
    for i in range(n):
        if i == 0:
            z = 3.0 / (1.0 + 2.4 * n)
        elif i == 1:
            z += 15.0 / (1.0 + 2.5 * n)
        else:
            ai = i - 1
            z += (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
        for _ in range(max_newton):
            p1, p2 = 1.0, 0.0
            for j in range(1, n + 1):
                p3, p2 = p2, p1
                p1 = ((2 * j - 1 - z) * p2 - (j - 1) * p3) / j
            dp = n * (p1 - p2) / z
            z_old = z
            z = z_old - p1 / dp
            if abs(z - z_old) <= 3e-14 * abs(z):
                break
        else:
            raise EvaluationError(f"Newton iteration for Laguerre root {i} did not converge")
        nodes[i] = z
        weights[i] = -1.0 / (dp * n * p2)
    return nodes, weights


# ---------------------------------------------------------------------------
# expansion coefficients


@dataclass
class ExpansionCoefficients:
    """Power-basis weights ``w_p`` plus the expansion data they came from."""

    mode: str
    weights: np.ndarray
    taylor: np.ndarray | None = None
    laguerre_c: np.ndarray | None = None
    laguerre_a: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)):
            raise ContractError("expansion weights must be finite")

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.weights)
        return int(nz[-1]) if nz.size else 0

    def polyval(self, x):
        """Evaluate ``sum_p w_p x^p`` (Horner)."""
        x = np.asarray(x, dtype=np.float64)
        acc = np.zeros_like(x)
        for w in self.weights[::-1]:
            acc = acc * x + w
        return acc

    def terms(self) -> list[tuple[int, int, float]]:
        """``(k, p, value)`` rows whose per-``p`` sums are the weights."""
        if self.mode == "laguerre" and self.laguerre_c is not None:
            a = self.laguerre_a
            return [(k, p, float(self.laguerre_c[k] * a[k, p]))
                    for k in range(len(self.laguerre_c)) for p in range(k + 1)]
        return [(p, p, float(w)) for p, w in enumerate(self.weights)]


def taylor_coeffs(h: RelaxationSpec, T: int) -> np.ndarray:
    """``t_p = h^(p)(0) / p!`` for ``p = 0..T``."""
    if h.taylor_derivs is None:
        raise ContractError(f"relaxation {h.kind!r} has no derivative closure for Taylor mode")
    if T < 0:
        raise ContractError("T must be non-negative")
    return np.array([h.taylor_derivs(p) / math.factorial(p) for p in range(T + 1)])


def laguerre_projection_coeffs(h: RelaxationSpec | Callable, K: int, quad_nodes: int = 64) -> np.ndarray:
    """``c_k = int_0^inf L_k(x) e^-x h(x) dx`` for ``k = 0..K`` by quadrature."""
    if K < 0:
        raise ContractError("K must be non-negative")
    if quad_nodes < K + 10:
        raise ContractError(f"quad_nodes={quad_nodes} is below K + 10 = {K + 10}")
    f = getattr(h, "eval", h)
    x, w = gauss_laguerre(quad_nodes)
    fx = np.array([float(f(xi)) for xi in x])
    bad = np.flatnonzero(~np.isfinite(fx))
    if bad.size:
        i = int(bad[0])
        raise EvaluationError(f"h is not finite at quadrature node {i} (x = {x[i]!r}): {fx[i]!r}")
    return laguerre_eval(K, x) @ (w * fx)


def taylor_expansion(h: RelaxationSpec, T: int = 10) -> ExpansionCoefficients:
    t = taylor_coeffs(h, T)
    return ExpansionCoefficients("taylor", t.copy(), taylor=t)


def laguerre_expansion(h: RelaxationSpec, K: int = 10, quad_nodes: int = 64) -> ExpansionCoefficients:
    c = laguerre_projection_coeffs(h, K, quad_nodes)
    a = laguerre_poly_coeffs(K)
    return ExpansionCoefficients("laguerre", c @ a, laguerre_c=c, laguerre_a=a)


def expand(h: RelaxationSpec, mode: str, trunc: int = 10, quad_nodes: int = 64) -> ExpansionCoefficients:
    if mode == "taylor":
        return taylor_expansion(h, trunc)
    if mode == "laguerre":
        return laguerre_expansion(h, trunc, quad_nodes)
    raise ContractError(f"unknown expansion mode {mode!r}")


def expansion_error(coeffs: ExpansionCoefficients, h, grid) -> float:
    """Max abs gap between the truncated expansion and ``h`` on ``grid``."""
    f = getattr(h, "eval", h)
    grid = np.asarray(grid, dtype=np.float64)
    return float(np.max(np.abs(coeffs.polyval(grid) - np.array([f(x) for x in grid]))))


def write_coefficients(path, coeffs: ExpansionCoefficients) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# mode={coeffs.mode}\n")
        w = csv.writer(fh)
        w.writerow(["k", "p", "value"])
        for k, p, v in coeffs.terms():
            w.writerow([k, p, repr(v)])


def read_coefficients(path) -> ExpansionCoefficients:
    """Load ``(k, p, value)`` rows; weights are the per-``p`` sums."""
    mode = "taylor"
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "mode=" in line:
                    mode = line.split("mode=", 1)[1].strip()
                continue
            if line.startswith("k"):
                continue
            k, p, v = line.split(",")
            rows.append((int(k), int(p), float(v)))
    if not rows:
        raise ContractError(f"no coefficient rows in {path}")
    p_max = max(r[1] for r in rows)
    weights = np.zeros(p_max + 1)
    for _, p, v in rows:
        weights[p] += v
    if mode == "laguerre":
        k_max = max(r[0] for r in rows)
        c = np.zeros(k_max + 1)
        for k, p, v in rows:
            if p == 0:
                c[k] = v
        return ExpansionCoefficients(mode, weights, laguerre_c=c, laguerre_a=laguerre_poly_coeffs(k_max))
    return ExpansionCoefficients(mode, weights, taylor=weights.copy())


# ---------------------------------------------------------------------------
# the regulariser


def generalized_lrr(s, coeffs: ExpansionCoefficients, cfg: EstimatorConfig = EstimatorConfig(),
                    independent_probes: bool = False) -> tuple[Var, EstimateReport]:
    """Estimate ``sum_p w_p ||S||_p^p``.

    By default one probe set serves every power, and the powers are folded
    into a single weight matrix ``sum_p w_p (S S^T)^{p/2}`` first. With
    ``independent_probes`` each power gets its own probes, as in the
    literal term-by-term algorithm.
    """
    s = _lift(s)
    w = coeffs.weights
    active = [p for p in range(len(w)) if w[p] != 0.0]
    if not active:
        active = [0]
    powers = half_powers(s, max(active), cfg.iter)
    echo = cfg.with_(p=max(active))

    if not independent_probes:
        g = probes(s.shape[0], cfg)
        proj = approx_project(s, g, cfg.iter)
        weight = None
        for p in active:
            term = ad.scale(powers[p], w[p])
            weight = term if weight is None else ad.add(weight, term)
        return _finish(quadratic_forms(proj, weight, g), echo)

    pinv = approx_pseudo_inverse(s, cfg.iter)
    row = None
    for p in active:
        g = probes(s.shape[0], cfg, offset=p * POWER_STREAM_STRIDE)
        proj = ad.matmul(s, ad.matmul(pinv, g))
        term = ad.scale(quadratic_forms(proj, powers[p], g), w[p])
        row = term if row is None else ad.add(row, term)
    return _finish(row, echo)


def regularizer(s, coeffs: ExpansionCoefficients | None, cfg: EstimatorConfig) -> tuple[Var, EstimateReport]:
    """Nuclear-norm estimate when ``coeffs`` is None, else the expansion."""
    if coeffs is None:
        return nuclear_estimate(s, cfg)
    return generalized_lrr(s, coeffs, cfg)
