"""Stochastic, differentiable estimators of rank and Schatten-p norms.

For a probe ``g ~ N(0, I)`` the quadratic form
``<S S^+ g, (S S^T)^{p/2} g>`` has expectation ``sum(sigma_i ** p)``
and variance ``2 sum(sigma_i ** (2p))``. The estimators average ``N``
such forms, with the pseudo-inverse and the matrix root replaced by
their iterative approximations so the result stays differentiable in S.

Probe ``i`` is drawn from stream ``stream_offset + i`` of the seed, so a
given ``(seed, stream_offset)`` always sees the same probes. Gradients do
not flow into the probes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .densemat import ContractError, as_matrix, sample_gaussian_block
from .iterops import IterConfig, approx_project, half_powers


@dataclass(frozen=True)
class EstimatorConfig:
    n_samples: int = 100
    iter: IterConfig = field(default_factory=IterConfig)
    seed: int = 0
    p: int = 1
    stream_offset: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ContractError("n_samples must be >= 1")
        if self.p < 0:
            raise ContractError("p must be non-negative")
        if self.seed < 0 or self.stream_offset < 0:
            raise ContractError("seed and stream_offset must be non-negative")

    def with_(self, **changes) -> EstimatorConfig:
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return EstimatorConfig(**kw)


@dataclass
class EstimateReport:
    estimate: float
    samples: np.ndarray
    variance: float
    config: EstimatorConfig

    @classmethod
    def from_samples(cls, estimate: float, samples: np.ndarray, config) -> EstimateReport:
        var = float(np.var(samples, ddof=1)) if samples.size > 1 else 0.0
        return cls(estimate=estimate, samples=samples, variance=var, config=config)


def probes(dim: int, cfg: EstimatorConfig, offset: int = 0) -> np.ndarray:
    """The ``dim x N`` probe block used by an estimator call."""
    return sample_gaussian_block(cfg.seed, dim, cfg.n_samples, cfg.stream_offset + offset)


def _lift(s) -> Var:
    if isinstance(s, Var):
        return s
    return ad.Tape().leaf(as_matrix(s), requires_grad=False)


def _finish(per_sample: Var, cfg: EstimatorConfig) -> tuple[Var, EstimateReport]:
    est = ad.mean(per_sample)
    samples = per_sample.value.ravel().copy()
    return est, EstimateReport.from_samples(est.item(), samples, cfg)


def quadratic_forms(projected: Var, weight: Var, g: np.ndarray) -> Var:
    """Row of per-probe values ``<projected_i, weight @ g_i>``."""
    return ad.column_sums(ad.mul(projected, ad.matmul(weight, g)))


def schatten_p_estimate(s, cfg: EstimatorConfig = EstimatorConfig()) -> tuple[Var, EstimateReport]:
    """Estimate ``||S||_p^p = sum(sigma_i ** p)``.

    The half power is computed once and shared by all probes.
    """
    s = _lift(s)
    g = probes(s.shape[0], cfg)
    proj = approx_project(s, g, cfg.iter)
    weight = half_powers(s, cfg.p, cfg.iter)[cfg.p]
    return _finish(quadratic_forms(proj, weight, g), cfg)


def rank_estimate(s, cfg: EstimatorConfig = EstimatorConfig()) -> tuple[Var, EstimateReport]:
    """Average squared length of projected probes, an estimate of rank(S)."""
    s = _lift(s)
    g = probes(s.shape[0], cfg)
    proj = approx_project(s, g, cfg.iter)
    cfg = cfg.with_(p=0)
    return _finish(ad.column_sums(ad.mul(proj, proj)), cfg)


def nuclear_estimate(s, cfg: EstimatorConfig = EstimatorConfig()) -> tuple[Var, EstimateReport]:
    return schatten_p_estimate(s, cfg.with_(p=1))


def estimate(s, stat: str, cfg: EstimatorConfig = EstimatorConfig()) -> tuple[Var, EstimateReport]:
    """Dispatch on ``stat`` in {"rank", "nuclear", "schatten"}."""
    if stat == "rank":
        return rank_estimate(s, cfg)
    if stat == "nuclear":
        return nuclear_estimate(s, cfg)
    if stat == "schatten":
        return schatten_p_estimate(s, cfg)
    raise ContractError(f"unknown statistic {stat!r}")
