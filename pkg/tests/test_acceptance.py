"""One test per acceptance criterion; each prints a PASS/FAIL line.

Lines are also collected by ``conftest.py`` and repeated in the terminal
summary, so they are visible without ``-s``.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from diffrank import autodiff as ad
from diffrank.cli import main
from diffrank.densemat import gaussian_matrix
from diffrank.estimator import EstimatorConfig, schatten_p_estimate
from diffrank.io import write_matrix_csv
from diffrank.iterops import IterConfig, approx_pseudo_inverse, approx_root
from diffrank.oracle import exact_hsum, exact_pinv, exact_psd_root, exact_schatten
from diffrank.relaxation import expansion_error, generalized_lrr, laguerre_expansion, laplace, taylor_expansion
from diffrank.solvers import (CompletionProblem, OptimizerConfig, SeparationProblem, solve_completion,
                              solve_separation)
from diffrank.sweeps import lambda_sweep, read_sweep_csv
from diffrank.synthetic import appendix_problem, conditioned, low_rank, separation_scene, spd, uniform_mask

BIG = IterConfig(k1=50, k2=50)


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def verdict(n, name, ok, detail, clock, budget):
    ok = bool(ok) and clock.elapsed < budget
    line = (f"{'PASS' if ok else 'FAIL'} criterion {n}: {name}: {detail} "
            f"({clock.elapsed:.2f} s, budget {budget:g} s)")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_criterion_01_pinv_convergence():
    ks = (1, 2, 5, 10, 30)
    worst, monotone = 0.0, True
    with Clock() as clk:
        for seed in range(20):
            s = conditioned(seed, 30, 30, 10.0)
            ref = exact_pinv(s)
            errs = [rel(approx_pseudo_inverse(s, IterConfig(k1=k)).value, ref) for k in ks]
            monotone &= all(b <= a for a, b in zip(errs, errs[1:]))
            worst = max(worst, errs[-1])
    verdict(1, "pinv convergence", worst <= 1e-6 and monotone,
            f"max err at k1=30 {worst:.2e} vs 1e-06, monotone {monotone}", clk, 5)


def test_criterion_02_newton_schulz_quadratic():
    worst, worst_c, steepening = 0.0, 0.0, True
    with Clock() as clk:
        for seed in range(20):
            a = spd(seed, 20, 100.0)
            ref = exact_psd_root(a)
            errs = [rel(approx_root(a, IterConfig(k2=k)).value, ref) for k in range(1, 16)]
            worst = max(worst, errs[11])
            idx = [i for i in range(14) if errs[i] < 1e-2 and errs[i + 1] > 1e-12]
            worst_c = max([worst_c] + [errs[i + 1] / errs[i] ** 2 for i in idx])
            drops = [np.log10(errs[i] / errs[i + 1]) for i in idx]
            steepening &= len(idx) >= 2 and all(b > a for a, b in zip(drops, drops[1:]))
    verdict(2, "Newton-Schulz quadratic decay", worst <= 1e-6 and worst_c <= 100 and steepening,
            f"max err at k2=12 {worst:.2e} vs 1e-06, max e_k+1/e_k^2 {worst_c:.1f} vs C=100, "
            f"steepening {steepening}", clk, 5)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_criterion_03_unbiased(p):
    s = gaussian_matrix(3, 10, 10)
    m_runs, n = 200, 100
    with Clock() as clk:
        means = [schatten_p_estimate(s, EstimatorConfig(n, iter=BIG, p=p, stream_offset=r * n))[1].estimate
                 for r in range(m_runs)]
        truth = exact_schatten(s, p)
        tol = 4 * np.sqrt(2 * exact_schatten(s, 2 * p) / (m_runs * n))
        dev = abs(np.mean(means) - truth)
    verdict(3, f"unbiasedness p={p}", dev <= tol, f"|mean - oracle| {dev:.4g} vs {tol:.4g}", clk, 30 / 3)


def test_criterion_04_variance_law():
    s = gaussian_matrix(3, 10, 10)
    ratios = []
    with Clock() as clk:
        for p in (1, 2):
            _, rep = schatten_p_estimate(s, EstimatorConfig(10000, iter=BIG, seed=1, p=p))
            ratios.append(rep.variance / (2 * exact_schatten(s, 2 * p)))
    verdict(4, "variance law", all(0.5 <= r <= 1.5 for r in ratios),
            "variance / 2||S||_2p^2p = " + ", ".join(f"{r:.3f}" for r in ratios) + " vs [0.5, 1.5]", clk, 20)


def test_criterion_05_chebyshev():
    s = gaussian_matrix(3, 10, 10)
    eps, n, trials, p = 0.1, 1000, 1000, 1
    with Clock() as clk:
        truth = exact_schatten(s, p)
        est = np.array([schatten_p_estimate(s, EstimatorConfig(n, iter=BIG, p=p, seed=2, stream_offset=r * n))[1]
                        .estimate for r in range(trials)])
        rate = float(np.mean(np.abs(est - truth) > eps * truth))
        bound = 2 * exact_schatten(s, 2 * p) / (n * (truth * eps) ** 2) + 0.05
    verdict(5, "Chebyshev envelope", rate <= bound, f"exceedance {rate:.3f} vs {bound:.3f}", clk, 60)


def test_criterion_06_expansion_fidelity():
    with Clock() as clk:
        h = laplace(1.0)
        lag = expansion_error(laguerre_expansion(h, 10), h, [0.1, 0.5, 1.0, 2.0])
        tay = expansion_error(taylor_expansion(h, 10), h, np.linspace(0.0, 2.0, 201))
    verdict(6, "expansion fidelity", lag <= 0.02 and tay <= 1e-4,
            f"Laguerre K=10 {lag:.2e} vs 0.02, Taylor T=10 {tay:.2e} vs 1e-04", clk, 1)


def test_criterion_07_generalized_lrr():
    s = np.diag([0.5, 1.0])
    with Clock() as clk:
        h = laplace(1.0)
        _, rep = generalized_lrr(s, laguerre_expansion(h, 10), EstimatorConfig(20000, iter=BIG))
        truth = exact_hsum(s, h)
        dev = abs(rep.estimate - truth)
    verdict(7, "generalized LRR", dev <= 0.05, f"estimate {rep.estimate:.4f}, oracle {truth:.5f}, "
            f"|err| {dev:.4f} vs 0.05", clk, 10)


def test_criterion_08_gradient():
    s = gaussian_matrix(12, 3, 3)
    errs = []
    with Clock() as clk:
        for p in (1, 2):
            cfg = EstimatorConfig(20, iter=IterConfig(k1=20, k2=20), seed=1, p=p)
            _, g = ad.gradient(lambda x: schatten_p_estimate(x, cfg)[0], s)
            fd = np.zeros_like(s)
            for idx in np.ndindex(3, 3):
                e = np.zeros_like(s)
                e[idx] = 1e-6
                fd[idx] = (schatten_p_estimate(s + e, cfg)[1].estimate
                           - schatten_p_estimate(s - e, cfg)[1].estimate) / 2e-6
            errs.append(np.max(np.abs(g - fd)) / np.max(np.abs(fd)))
    verdict(8, "gradient vs finite differences", max(errs) <= 1e-4,
            "max rel err " + ", ".join(f"p={p} {e:.2e}" for p, e in zip((1, 2), errs)) + " vs 1e-04", clk, 5)


def test_criterion_09_completion():
    c = low_rank(0, 50, 50, 5)
    mask = uniform_mask(1, c.shape, 0.5)
    opt = OptimizerConfig(step_size=0.02, max_iters=2000, record_every=100,
                          estimator=EstimatorConfig(100, iter=IterConfig(k1=30, k2=30), seed=5))
    with Clock() as clk:
        rep = solve_completion(CompletionProblem(c * mask, mask, 0.1), opt)
    err = rel(rep.x, c)
    first, last = rep.iterates[0], rep.iterates[-1]
    ok = err <= 0.05 and last.iteration == 2000 and last.total < first.total
    verdict(9, "matrix completion", ok, f"rel err {err:.4f} vs 0.05, total at {last.iteration} "
            f"{last.total:.4g} < iteration 0 {first.total:.4g}", clk, 60)


def test_criterion_10_separation():
    v, bg, spikes = separation_scene(0)
    opt = OptimizerConfig(step_size=0.01, max_iters=1000, record_every=100,
                          estimator=EstimatorConfig(100, iter=IterConfig(k1=30, k2=30), seed=3))
    with Clock() as clk:
        rep = solve_separation(SeparationProblem(v, 10.0), opt)
    found, true = np.abs(rep.foreground) > 1.0, spikes != 0
    tp = np.sum(found & true)
    f1 = 2 * tp / (found.sum() + true.sum())
    err = rel(rep.x, bg)
    verdict(10, "fore-background separation", f1 >= 0.8 and err <= 0.1,
            f"spike F1 {f1:.3f} vs 0.8, background rel err {err:.4f} vs 0.1", clk, 60)


def test_criterion_11_lambda_tradeoff():
    s, _ = appendix_problem(0)
    lams = (0.1, 1.0, 10.0)
    opt = OptimizerConfig(algorithm="gd", step_size=0.1, max_iters=300, record_every=50,
                          estimator=EstimatorConfig(seed=2))
    with Clock() as clk:
        rows = lambda_sweep(lams, s=s, opt=opt)
    l1 = [r[1] for r in rows]
    l2 = [r[2] for r in rows]
    ok = all(b >= 0.95 * a for a, b in zip(l1, l1[1:])) and all(b <= 1.05 * a for a, b in zip(l2, l2[1:]))
    verdict(11, "lambda tradeoff", ok, "l1 " + ", ".join(f"{x:.4g}" for x in l1) + " non-decreasing, l2 "
            + ", ".join(f"{x:.4g}" for x in l2) + " non-increasing (5% slack)", clk, 60)


def test_criterion_12_sensitivity(tmp_path):
    path = tmp_path / "s30.csv"
    write_matrix_csv(path, appendix_problem(0)[0])
    with Clock() as clk:
        assert main(["convergence", "--sweep", "k1", "--values", "1,2,5,10,30", "--input", str(path),
                     "--trials", "50", "--out", str(tmp_path / "k1.csv")]) == 0
        assert main(["convergence", "--sweep", "samples", "--values", "100,400,1600", "--input", str(path),
                     "--trials", "200", "--out", str(tmp_path / "n.csv")]) == 0
    k1 = read_sweep_csv(tmp_path / "k1.csv")
    mean = {v: np.mean([r["rel_error"] for r in k1 if r["value"] == v]) for v in (10, 30)}
    ns = read_sweep_csv(tmp_path / "n.csv")
    std = [np.std([(r["estimate"] - r["oracle"]) / r["oracle"] for r in ns if r["value"] == v], ddof=1)
           for v in (100, 400, 1600)]
    ratios = [a / b for a, b in zip(std, std[1:])]
    ok = mean[10] <= 2 * mean[30] and all(1.4 <= r <= 2.6 for r in ratios)
    verdict(12, "sensitivity", ok, f"rel err k1=10 {mean[10]:.4f} vs 2 x k1=30 {2 * mean[30]:.4f}, std ratios "
            + ", ".join(f"{r:.3f}" for r in ratios) + " vs 2 +/- 30%", clk, 60)
