"""Convergence and sensitivity sweeps.

Estimator sweeps vary one of ``k1``, ``k2`` or ``samples`` and compare
each estimate with the Jacobi oracle. Trial ``t`` always uses seed
``base_seed + t`` so every swept value sees the same probes (common
random numbers), which isolates the effect of the swept parameter.

The lambda sweep solves the denoising problem
``min ||S - X||_F^2 + lam ||X||_*`` on a seeded Gaussian instance.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .estimator import EstimatorConfig, estimate
from .iterops import IterConfig
from .oracle import exact_rank, exact_schatten
from .solvers import OptimizerConfig, solve_denoising
from .synthetic import appendix_problem

ESTIMATOR_AXES = ("k1", "k2", "samples")
AXES = ESTIMATOR_AXES + ("lambda",)
ESTIMATOR_COLUMNS = ("value", "trial", "estimate", "oracle", "rel_error", "elapsed")
LAMBDA_COLUMNS = ("lambda", "final_l1", "final_l2", "final_total")


@dataclass
class SweepRow:
    value: float
    trial: int
    estimate: float
    oracle: float
    rel_error: float
    elapsed: float


def oracle_value(s, stat: str, p: int = 1) -> float:
    if stat == "rank":
        return float(exact_rank(s))
    if stat == "nuclear":
        return exact_schatten(s, 1)
    return exact_schatten(s, p)


def _config_for(axis: str, value, base: EstimatorConfig, seed: int) -> EstimatorConfig:
    it = base.iter
    if axis == "k1":
        it = IterConfig(int(value), it.k2, it.alpha, it.jitter)
    elif axis == "k2":
        it = IterConfig(it.k1, int(value), it.alpha, it.jitter)
    n = int(value) if axis == "samples" else base.n_samples
    return base.with_(iter=it, n_samples=n, seed=seed)


def estimator_sweep(s, axis: str, values, trials: int, base: EstimatorConfig = EstimatorConfig(),
                    stat: str = "nuclear") -> list[SweepRow]:
    if axis not in ESTIMATOR_AXES:
        raise ValueError(f"not an estimator axis: {axis!r}")
    if not len(values):
        raise ValueError("no sweep values given")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    truth = oracle_value(s, stat, base.p)
    rows = []
    for value in values:
        for trial in range(trials):
            cfg = _config_for(axis, value, base, base.seed + trial)
            t0 = time.perf_counter()
            _, rep = estimate(s, stat, cfg)
            dt = time.perf_counter() - t0
            rel = abs(rep.estimate - truth) / abs(truth) if truth else abs(rep.estimate)
            rows.append(SweepRow(float(value), trial, rep.estimate, truth, rel, dt))
    return rows


def summarize(rows: list[SweepRow]) -> dict[float, dict[str, float]]:
    """Per swept value: mean and standard deviation of the relative error."""
    out: dict[float, dict[str, float]] = {}
    for v in dict.fromkeys(r.value for r in rows):
        errs = np.array([r.rel_error for r in rows if r.value == v])
        signed = np.array([(r.estimate - r.oracle) / r.oracle for r in rows if r.value == v])
        out[v] = {"mean_rel_error": float(errs.mean()),
                  "std_rel_error": float(signed.std(ddof=1)) if errs.size > 1 else 0.0}
    return out


def lambda_sweep(values, s=None, seed: int = 0, opt: OptimizerConfig | None = None):
    """Final ``(lambda, l1, l2, total)`` of the denoising problem per lambda."""
    if not len(values):
        raise ValueError("no sweep values given")
    if s is None:
        s, _ = appendix_problem(seed)
    if opt is None:
        opt = OptimizerConfig(algorithm="gd", step_size=0.1, max_iters=300, record_every=50,
                              estimator=EstimatorConfig(seed=seed))
    rows = []
    for lam in values:
        rep = solve_denoising(s, float(lam), opt=opt)
        f = rep.final
        rows.append((float(lam), f.data_loss, f.reg_loss, f.total))
    return rows


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if rows and isinstance(rows[0], SweepRow):
            w.writerow(ESTIMATOR_COLUMNS)
            for r in rows:
                w.writerow([repr(r.value), r.trial, repr(r.estimate), repr(r.oracle),
                            repr(r.rel_error), f"{r.elapsed:.6f}"])
        else:
            w.writerow(LAMBDA_COLUMNS)
            for r in rows:
                w.writerow([repr(x) for x in r])


def read_sweep_csv(path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
