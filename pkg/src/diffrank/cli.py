"""Command line entry point: ``diffrank {estimate,complete,separate,convergence}``.

Exit codes: 0 ok, 2 input error, 3 numeric contract error, 4 divergence.
Human-readable summaries go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .densemat import ContractError, ShapeError
from .estimator import EstimatorConfig, estimate
from .io import FormatError, psnr, quantize, read_mask_csv, read_matrix_csv, read_pgm, read_pgm_dir, write_pgm
from .iterops import IterConfig
from .oracle import JacobiConvergenceError, exact_hsum
from .relaxation import EvaluationError, expand, generalized_lrr, laplace
from .solvers import (CompletionProblem, DivergenceError, OptimizerConfig, SeparationProblem,
                      solve_completion, solve_separation, write_report_csv)
from .sweeps import AXES, estimator_sweep, lambda_sweep, oracle_value, write_sweep_csv
from .synthetic import uniform_mask

EXIT_OK, EXIT_INPUT, EXIT_CONTRACT, EXIT_DIVERGED = 0, 2, 3, 4


class InputError(Exception):
    pass


def _estimator_args(p: argparse.ArgumentParser, samples: int = 100) -> None:
    p.add_argument("--samples", type=int, default=samples, help="Gaussian probes per estimate")
    p.add_argument("--k1", type=int, default=10, help="pseudo-inverse iterations")
    p.add_argument("--k2", type=int, default=30, help="Newton-Schulz iterations")
    p.add_argument("--seed", type=int, default=0)


def _relax_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--relax", choices=("nuclear", "laplace"), default="nuclear")
    p.add_argument("--gamma", type=float, default=1.0, help="laplace scale")
    p.add_argument("--mode", choices=("taylor", "laguerre"), default="laguerre")
    p.add_argument("--trunc", type=int, default=10, help="expansion degree")
    p.add_argument("--quad-nodes", type=int, default=64, help="Gauss-Laguerre nodes")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diffrank", description="SVD-free rank and Schatten-norm estimates, matrix completion and separation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate rank, a Schatten norm or a relaxed penalty")
    e.add_argument("--input", required=True, help="matrix CSV")
    e.add_argument("--stat", choices=("rank", "nuclear", "schatten"), default="nuclear")
    e.add_argument("--p", type=int, default=1, help="Schatten order")
    _relax_args(e)
    _estimator_args(e)
    e.add_argument("--oracle", action="store_true", help="also print the Jacobi SVD value")

    c = sub.add_parser("complete", help="fill in missing pixels of a low-rank image")
    c.add_argument("--image", required=True)
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--mask", help="CSV of 0/1, 1 = observed")
    g.add_argument("--drop-frac", type=float, help="drop this fraction of pixels at random")
    c.add_argument("--mask-seed", type=int, default=0)
    c.add_argument("--lambda", dest="lam", type=float, required=True)
    _relax_args(c)
    _estimator_args(c)
    c.add_argument("--iters", type=int, default=500)
    c.add_argument("--lr", type=float, default=1e-2)
    c.add_argument("--optimizer", choices=("adam", "gd"), default="adam")
    c.add_argument("--out", required=True, help="recovered PGM")
    c.add_argument("--report", help="CSV of recorded losses")
    c.add_argument("--truth", help="reference PGM for PSNR")

    s = sub.add_parser("separate", help="split a frame sequence into background and foreground")
    s.add_argument("--frames", required=True, help="directory of same-size PGM frames")
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--delta", type=float, default=1e-3, help="pseudo-Huber width")
    _relax_args(s)
    _estimator_args(s)
    s.add_argument("--iters", type=int, default=500)
    s.add_argument("--lr", type=float, default=1e-2)
    s.add_argument("--out-bg", required=True)
    s.add_argument("--out-fg", required=True)
    s.add_argument("--report")

    v = sub.add_parser("convergence", help="sweep one parameter and record errors")
    v.add_argument("--sweep", required=True, help="one of " + ", ".join(AXES))
    v.add_argument("--values", required=True, help="comma-separated values")
    v.add_argument("--input", help="matrix CSV (lambda sweeps default to the synthetic problem)")
    v.add_argument("--stat", choices=("rank", "nuclear", "schatten"), default="nuclear")
    v.add_argument("--p", type=int, default=1)
    v.add_argument("--trials", type=int, default=10)
    _estimator_args(v)
    v.add_argument("--iters", type=int, default=300, help="solver iterations for lambda sweeps")
    v.add_argument("--lr", type=float, default=0.1, help="step size for lambda sweeps")
    v.add_argument("--no-timing", action="store_true",
                   help="write 0 in the elapsed column so reruns are byte-identical")
    v.add_argument("--out", required=True)
    return ap


def _est_config(a, p: int = 1) -> EstimatorConfig:
    return EstimatorConfig(n_samples=a.samples, iter=IterConfig(k1=a.k1, k2=a.k2), seed=a.seed, p=p)


def _relaxation(a):
    """``(spec, coeffs)``; both None for the plain nuclear norm."""
    if a.relax == "nuclear":
        return None, None
    spec = laplace(a.gamma)
    return spec, expand(spec, a.mode, a.trunc, a.quad_nodes)


def _load_matrix(path) -> np.ndarray:
    if path is None:
        raise InputError("--input is required")
    if not Path(path).is_file():
        raise InputError(f"{path}: no such file")
    return read_matrix_csv(path)


def _load_image(path) -> np.ndarray:
    if not Path(path).is_file():
        raise InputError(f"{path}: no such file")
    return read_pgm(path)


def cmd_estimate(a) -> int:
    s = _load_matrix(a.input)
    cfg = _est_config(a, a.p)
    spec, coeffs = _relaxation(a)
    t0 = time.perf_counter()
    if coeffs is not None:
        _, rep = generalized_lrr(s, coeffs, cfg)
        label = f"lrr({spec.kind}, gamma={a.gamma:g}, {a.mode}, trunc={a.trunc})"
    else:
        _, rep = estimate(s, a.stat, cfg)
        label = a.stat if a.stat != "schatten" else f"schatten(p={a.p})"
    elapsed = time.perf_counter() - t0
    print(f"statistic: {label}")
    print(f"estimate: {rep.estimate:.10g}")
    print(f"variance: {rep.variance:.10g}")
    print(f"elapsed: {elapsed:.6f} s")
    if a.oracle:
        truth = exact_hsum(s, spec) if spec is not None else oracle_value(s, a.stat, a.p)
        rel = abs(rep.estimate - truth) / abs(truth) if truth else abs(rep.estimate)
        print(f"oracle: {truth:.10g}")
        print(f"rel_error: {rel:.6g}")
    return EXIT_OK


def _optimizer(a, algorithm: str = "adam", record_every: int = 10) -> OptimizerConfig:
    return OptimizerConfig(algorithm=algorithm, step_size=a.lr, max_iters=a.iters,
                           estimator=_est_config(a), record_every=record_every)


def _flush_partial(err: DivergenceError, report_path) -> int:
    if report_path:
        write_report_csv(report_path, err.report)
        print(f"partial report written to {report_path}", file=sys.stderr)
    print(f"diverged: {err}", file=sys.stderr)
    return EXIT_DIVERGED


def cmd_complete(a) -> int:
    img = _load_image(a.image)
    if a.mask is not None:
        if not Path(a.mask).is_file():
            raise InputError(f"{a.mask}: no such file")
        mask = read_mask_csv(a.mask, img.shape)
    else:
        if not 0.0 <= a.drop_frac <= 1.0:
            raise InputError("--drop-frac must lie in [0, 1]")
        mask = uniform_mask(a.mask_seed, img.shape, a.drop_frac)
    truth = _load_image(a.truth) if a.truth else None
    if truth is not None and truth.shape != img.shape:
        raise ShapeError(f"{a.truth}: truth is {truth.shape}, image is {img.shape}")
    _, coeffs = _relaxation(a)
    prob = CompletionProblem(img * mask, mask, a.lam, coeffs)
    try:
        rep = solve_completion(prob, _optimizer(a, a.optimizer))
    except DivergenceError as err:
        return _flush_partial(err, a.report)
    write_pgm(a.out, rep.x)
    if a.report:
        write_report_csv(a.report, rep)
    f = rep.final
    print(f"observed: {int(mask.sum())}/{mask.size}")
    print(f"final: iteration {f.iteration} data_loss {f.data_loss:.6g} reg_loss {f.reg_loss:.6g} total {f.total:.6g}")
    print(f"elapsed: {rep.elapsed:.3f} s")
    if truth is not None:
        print(f"psnr: {psnr(quantize(rep.x) / 255.0, truth):.4f} dB")
    return EXIT_OK


def cmd_separate(a) -> int:
    names, frames = read_pgm_dir(a.frames)
    if len(names) < 2:
        raise InputError(f"{a.frames}: need at least two frames, found {len(names)}")
    t, h, w = frames.shape
    v = frames.reshape(t, h * w).T
    _, coeffs = _relaxation(a)
    prob = SeparationProblem(v, a.lam, a.delta, coeffs)
    try:
        rep = solve_separation(prob, _optimizer(a))
    except DivergenceError as err:
        return _flush_partial(err, a.report)
    bg_dir, fg_dir = Path(a.out_bg), Path(a.out_fg)
    bg_dir.mkdir(parents=True, exist_ok=True)
    fg_dir.mkdir(parents=True, exist_ok=True)
    for i, name in enumerate(names):
        write_pgm(bg_dir / name, rep.x[:, i].reshape(h, w))
        # residual is signed; shift so zero lands on midgray
        write_pgm(fg_dir / name, 0.5 + rep.foreground[:, i].reshape(h, w))
    if a.report:
        write_report_csv(a.report, rep)
    f = rep.final
    print(f"frames: {t} of {h}x{w}")
    print(f"final: iteration {f.iteration} data_loss {f.data_loss:.6g} reg_loss {f.reg_loss:.6g} total {f.total:.6g}")
    print(f"elapsed: {rep.elapsed:.3f} s")
    return EXIT_OK


def _parse_values(text: str, axis: str) -> list[float]:
    parts = [x.strip() for x in text.split(",") if x.strip()]
    if not parts:
        raise InputError("--values is empty")
    try:
        vals = [float(x) for x in parts]
    except ValueError:
        raise InputError(f"--values: not a number list: {text!r}") from None
    if axis != "lambda" and any(x != int(x) or x < 1 for x in vals):
        raise InputError(f"--values for {axis} must be positive integers")
    return vals


def cmd_convergence(a) -> int:
    if a.sweep not in AXES:
        raise InputError(f"--sweep must be one of {', '.join(AXES)}, got {a.sweep!r}")
    vals = _parse_values(a.values, a.sweep)
    if a.trials < 1:
        raise InputError("--trials must be >= 1")
    if a.sweep == "lambda":
        s = _load_matrix(a.input) if a.input else None
        opt = OptimizerConfig(algorithm="gd", step_size=a.lr, max_iters=a.iters,
                              record_every=max(a.iters // 10, 1), estimator=_est_config(a))
        try:
            rows = lambda_sweep(vals, s=s, seed=a.seed, opt=opt)
        except DivergenceError as err:
            print(f"diverged: {err}", file=sys.stderr)
            return EXIT_DIVERGED
        write_sweep_csv(a.out, rows)
        for lam, l1, l2, tot in rows:
            print(f"lambda {lam:g}: l1 {l1:.6g} l2 {l2:.6g} total {tot:.6g}")
        return EXIT_OK
    s = _load_matrix(a.input)
    rows = estimator_sweep(s, a.sweep, [int(x) for x in vals], a.trials, _est_config(a, a.p), a.stat)
    if a.no_timing:
        for r in rows:
            r.elapsed = 0.0
    write_sweep_csv(a.out, rows)
    for v in dict.fromkeys(r.value for r in rows):
        errs = np.array([r.rel_error for r in rows if r.value == v])
        print(f"{a.sweep} {v:g}: mean rel_error {errs.mean():.6g} over {errs.size} trials")
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "complete": cmd_complete,
            "separate": cmd_separate, "convergence": cmd_convergence}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, FormatError, ShapeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (ContractError, EvaluationError, JacobiConvergenceError, FloatingPointError) as err:
        print(f"contract error: {err}", file=sys.stderr)
        return EXIT_CONTRACT


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
