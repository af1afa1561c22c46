"""First-order solvers for low-rank regularised problems.

Each solver minimises ``data_loss(X) + lam * R(X)`` where ``R`` is the
stochastic regulariser from :mod:`diffrank.relaxation`. Every iteration
draws fresh probes (stream offset ``iteration * N``) unless
``frozen_probes`` is set, so the method behaves like stochastic gradient
descent on the exact penalty.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .densemat import ContractError, as_matrix
from .estimator import EstimatorConfig
from .relaxation import ExpansionCoefficients, regularizer


def pseudo_huber(x, delta: float):
    """``sqrt(x^2 + delta^2) - delta``, a smooth stand-in for ``|x|``."""
    if delta <= 0:
        raise ContractError("delta must be positive")
    x = np.asarray(x, dtype=np.float64)
    return np.sqrt(x * x + delta * delta) - delta


def pseudo_huber_grad(x, delta: float):
    x = np.asarray(x, dtype=np.float64)
    return x / np.sqrt(x * x + delta * delta)


class Adam:
    """Bias-corrected adaptive moment steps on a single array."""

    def __init__(self, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(x)
            self.v = np.zeros_like(x)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * (g * g)
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class GradientDescent:
    def __init__(self, lr=1e-2):
        self.lr = lr

    def step(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        return x - self.lr * g


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: str = "adam"
    step_size: float = 1e-2
    max_iters: int = 500
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    record_every: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    frozen_probes: bool = False

    def __post_init__(self):
        if self.algorithm not in ("adam", "gd"):
            raise ContractError(f"unknown algorithm {self.algorithm!r}")
        if not self.step_size > 0:
            raise ContractError("step_size must be positive")
        if self.max_iters < 1:
            raise ContractError("max_iters must be >= 1")
        if self.record_every < 1:
            raise ContractError("record_every must be >= 1")

    def make_optimizer(self):
        if self.algorithm == "adam":
            return Adam(self.step_size, self.beta1, self.beta2, self.eps)
        return GradientDescent(self.step_size)


@dataclass
class Iterate:
    iteration: int
    data_loss: float
    reg_loss: float
    total: float


@dataclass
class SolveReport:
    iterates: list[Iterate]
    x: np.ndarray | None
    elapsed: float
    config: dict
    foreground: np.ndarray | None = None

    @property
    def final(self) -> Iterate:
        return self.iterates[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(it, name) for it in self.iterates])


REPORT_COLUMNS = ("iteration", "data_loss", "reg_loss", "total")


def write_report_csv(path, report: SolveReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for it in report.iterates:
            w.writerow([it.iteration, repr(it.data_loss), repr(it.reg_loss), repr(it.total)])


def read_report_csv(path) -> SolveReport:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != REPORT_COLUMNS:
        raise ContractError(f"{path}: expected header {','.join(REPORT_COLUMNS)}")
    its = [Iterate(int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in rows[1:]]
    return SolveReport(iterates=its, x=None, elapsed=float("nan"), config={})


class DivergenceError(RuntimeError):
    """The objective became non-finite. ``report`` holds the iterates so far."""

    def __init__(self, iteration: int, report: SolveReport):
        super().__init__(f"objective is not finite at iteration {iteration}")
        self.iteration = iteration
        self.report = report


def minimize(x0, data_loss: Callable[[Var], Var], lam: float,
             relaxation: ExpansionCoefficients | None, opt: OptimizerConfig,
             echo: dict | None = None) -> SolveReport:
    """Descend on ``data_loss(X) + lam * R(X)`` from ``x0``.

    Losses are evaluated at iterations ``0..max_iters``; an update follows
    every evaluation except the last. Entries are recorded every
    ``record_every`` iterations and always at the final one.
    """
    if lam < 0:
        raise ContractError("lambda must be non-negative")
    config = {"lambda": lam, **_flatten(asdict(opt)), **(echo or {})}
    # overflow surfaces as a non-finite total and a DivergenceError below
    with np.errstate(over="ignore", invalid="ignore"):
        return _descend(as_matrix(x0).copy(), data_loss, lam, relaxation, opt, config)


def _descend(x, data_loss, lam, relaxation, opt: OptimizerConfig, config: dict) -> SolveReport:
    optimizer = opt.make_optimizer()
    iterates: list[Iterate] = []
    start = time.perf_counter()
    est = opt.estimator
    n = est.n_samples
    for t in range(opt.max_iters + 1):
        offset = est.stream_offset if opt.frozen_probes else est.stream_offset + t * n
        tape = ad.Tape()
        xv = tape.leaf(x)
        data = data_loss(xv)
        # X and X^T share singular values; the wide side keeps S S^T small
        xr = ad.transpose(xv) if x.shape[0] > x.shape[1] else xv
        reg, _ = regularizer(xr, relaxation, est.with_(stream_offset=offset))
        total = ad.add(data, ad.scale(reg, lam))
        if t % opt.record_every == 0 or t == opt.max_iters or not math.isfinite(total.item()):
            iterates.append(Iterate(t, data.item(), reg.item(), total.item()))
        if not math.isfinite(total.item()):
            raise DivergenceError(t, SolveReport(iterates, x, time.perf_counter() - start, config))
        if t == opt.max_iters:
            break
        tape.backward(total)
        x = optimizer.step(x, xv.grad)
    return SolveReport(iterates, x, time.perf_counter() - start, config)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = v
    return out


# ---------------------------------------------------------------------------
# problems


@dataclass
class CompletionProblem:
    observed: np.ndarray
    mask: np.ndarray
    lam: float
    relaxation: ExpansionCoefficients | None = None

    def __post_init__(self):
        self.observed = as_matrix(self.observed)
        self.mask = as_matrix(self.mask)
        if self.observed.shape != self.mask.shape:
            raise ContractError(f"mask shape {self.mask.shape} != data shape {self.observed.shape}")
        if not np.all((self.mask == 0) | (self.mask == 1)):
            raise ContractError("mask entries must be 0 or 1")
        if self.lam < 0:
            raise ContractError("lambda must be non-negative")

    def initial(self) -> np.ndarray:
        """Observed entries kept, missing ones set to the observed mean."""
        seen = self.mask == 1
        fill = float(self.observed[seen].mean()) if seen.any() else 0.0
        return np.where(seen, self.observed, fill)


def solve_completion(prob: CompletionProblem, opt: OptimizerConfig = OptimizerConfig()) -> SolveReport:
    """Minimise ``||P_mask(X - observed)||_F^2 + lam R(X)``."""
    if not prob.mask.any() and prob.lam == 0:
        raise ContractError("nothing to fit: no observed entries and lambda = 0")
    target = prob.observed * prob.mask

    def data_loss(x: Var) -> Var:
        return ad.frobenius_sq(ad.sub(ad.mul(x, prob.mask), target))

    return minimize(prob.initial(), data_loss, prob.lam, prob.relaxation, opt,
                    echo={"problem": "completion"})


@dataclass
class SeparationProblem:
    frames: np.ndarray
    lam: float
    delta: float = 1e-3
    relaxation: ExpansionCoefficients | None = None
    init: str = "median"

    def __post_init__(self):
        self.frames = as_matrix(self.frames)
        if self.frames.shape[1] < 2:
            raise ContractError("separation needs at least two frames (columns)")
        if not self.delta > 0:
            raise ContractError("huber delta must be positive")
        if self.lam < 0:
            raise ContractError("lambda must be non-negative")
        if self.init not in ("median", "frames"):
            raise ContractError(f"unknown init {self.init!r}")

    def initial(self) -> np.ndarray:
        """Per-pixel temporal median broadcast over time, or the frames themselves."""
        if self.init == "frames":
            return self.frames.copy()
        med = np.median(self.frames, axis=1, keepdims=True)
        return np.repeat(med, self.frames.shape[1], axis=1)


def solve_separation(prob: SeparationProblem, opt: OptimizerConfig = OptimizerConfig()) -> SolveReport:
    """Minimise ``sum pseudo_huber(V - X) + lam R(X)``; foreground is ``V - X``."""
    v = prob.frames

    def data_loss(x: Var) -> Var:
        return ad.sum_all(ad.pseudo_huber(ad.sub(v, x), prob.delta))

    report = minimize(prob.initial(), data_loss, prob.lam, prob.relaxation, opt,
                      echo={"problem": "separation", "delta": prob.delta, "init": prob.init})
    report.foreground = v - report.x
    return report


def solve_denoising(observed, lam: float, relaxation: ExpansionCoefficients | None = None,
                    opt: OptimizerConfig = OptimizerConfig()) -> SolveReport:
    """Minimise ``||observed - X||_F^2 + lam R(X)`` starting from ``observed``."""
    s = as_matrix(observed)

    def data_loss(x: Var) -> Var:
        return ad.frobenius_sq(ad.sub(s, x))

    return minimize(s, data_loss, lam, relaxation, opt, echo={"problem": "denoising"})
