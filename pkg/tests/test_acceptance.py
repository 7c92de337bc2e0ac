"""One check per acceptance criterion, at full scale (10^5 paths).

Each test records a PASS/FAIL line that is printed at the end of the run.
"""

import math
import time

import numpy as np
import pytest

from fracnet.cli import main
from fracnet.experiments import (
    ExperimentConfig,
    check_equidistant_mesh,
    check_hardy,
    check_hessian_identity,
    check_theta_mesh,
    run_rate_study,
    run_simulation,
)
from fracnet.model import DiffusionModel
from fracnet.payoff import binary, identity, quadratic
from fracnet.simulator import lp_norm, simulate_errors
from fracnet.smoothness import (
    besov_proxy_norm,
    default_t_grid,
    derivative_bound_check,
    fit_theta,
    riemann_liouville_norm,
    smoothness_curves,
)
from fracnet.timenet import equidistant

PATHS = 100_000
BM = DiffusionModel.bm(1)
DYADIC = (8, 16, 32, 64, 128, 256, 512)


def test_quadratic_benchmark(record):
    t0 = time.perf_counter()
    ns = (4, 16, 64)
    res = simulate_errors(quadratic(), BM, [equidistant(n) for n in ns], PATHS, seed=0)
    z, sq_err = [], 0.0
    for n, r in zip(ns, res):
        e = lp_norm(r.c_simple, 2, seed=0)
        z.append(abs(e.value - math.sqrt(2 / n)) / e.std_err)
        sq_err = max(sq_err, float(np.max(np.abs(r.sq_fn - math.sqrt(2 / n)))))
    wall = time.perf_counter() - t0
    ok = max(z) <= 3 and sq_err <= 1e-10 and wall < 60
    detail = f"max |err - sqrt(2/n)|/se = {max(z):.2f} (<= 3), square function max dev {sq_err:.1e} (<= 1e-10), {wall:.0f}s"
    assert record("quadratic benchmark", ok, detail), detail


def test_error_square_function_equivalence(record):
    t0 = time.perf_counter()
    lo, hi, worst = math.inf, 0.0, ""
    for name, model, kw in (("binary", "bm", {}), ("call", "gbm", {"K": 1.0}), ("quadratic", "bm", {})):
        for net in ("equidistant", "theta"):
            cfg = ExperimentConfig(
                model=model, payoff=name, payoff_params=kw, net=net, theta=0.5, p_list=(2, 3, 4),
                n_list=(4, 8, 16, 32, 64, 128, 256), n_paths=PATHS, seed=0,
            )
            for r in run_simulation(cfg):
                v = r.ratio.value
                if v < lo or v > hi:
                    worst = f"{name}/{net}/n={r.n}/p={r.p:g}"
                lo, hi = min(lo, v), max(hi, v)
    wall = time.perf_counter() - t0
    ok = 0.1 <= lo and hi <= 10 and wall < 600
    detail = f"ratios in [{lo:.3f}, {hi:.3f}] (inside [0.1, 10]; extreme at {worst}), {wall:.0f}s"
    assert record("error/square-function equivalence", ok, detail), detail


def _rate(net: str):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(payoff="binary", net=net, theta=0.5, n_list=DYADIC, n_paths=PATHS, seed=0)
    (rep,) = run_rate_study(cfg)
    return rep, time.perf_counter() - t0


def test_digital_rate_equidistant(record):
    rep, wall = _rate("equidistant")
    ok = abs(rep.slope + 0.25) <= 0.10 and wall < 600
    detail = f"slope {rep.slope:.3f} (CI {rep.slope_ci[0]:.3f}..{rep.slope_ci[1]:.3f}), target -0.25 +- 0.10, {wall:.0f}s"
    assert record("digital rate, equidistant nets", ok, detail), detail


def test_digital_rate_theta_nets(record):
    rep, wall = _rate("theta")
    ok = abs(rep.slope + 0.50) <= 0.10 and wall < 600
    detail = f"slope {rep.slope:.3f} (CI {rep.slope_ci[0]:.3f}..{rep.slope_ci[1]:.3f}), target -0.50 +- 0.10, {wall:.0f}s"
    assert record("digital rate, theta-nets theta=1/2", ok, detail), detail


def test_digital_smoothness_curve(record):
    t0 = time.perf_counter()
    t = default_t_grid()
    t = t[t <= 1 - 1e-4]
    curve = smoothness_curves(binary(), 2.0, t)
    err = float(np.max(np.abs(curve.d0 - np.sqrt(0.25 - np.arcsin(t) / (2 * np.pi)))))
    fit = fit_theta(curve)
    wall = time.perf_counter() - t0
    quad = bool(np.all(curve.method == "quadrature"))
    ok = err <= 1e-6 and abs(fit.theta_hat - 0.5) <= 0.05 and quad and wall < 60
    detail = f"max |d0 - closed form| = {err:.1e} (<= 1e-6, all quadrature: {quad}), theta_hat {fit.theta_hat:.4f} (0.50 +- 0.05), {wall:.0f}s"
    assert record("digital smoothness curve", ok, detail), detail


def test_riemann_liouville_dichotomy(record):
    curve = smoothness_curves(binary(), 2.0, default_t_grid())
    verdicts, ok = [], True
    for theta in (0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9):
        rl = riemann_liouville_norm(binary(), BM, theta, 2.0, 20_000, seed=0)
        proxy = besov_proxy_norm(curve, theta, 2.0, 2).divergent
        ok &= rl.divergent == (theta > 0.5) == proxy
        verdicts.append(f"{theta:g}:{'inf' if rl.divergent else 'fin'}/{'inf' if proxy else 'fin'}")
    detail = "theta:norm/proxy " + " ".join(verdicts)
    assert record("Riemann-Liouville dichotomy", ok, detail), detail


def test_time_net_calculus(record):
    t0 = time.perf_counter()
    checks = [check_theta_mesh(), check_equidistant_mesh(), check_hessian_identity(100)]
    wall = time.perf_counter() - t0
    ok = all(c["pass"] for c in checks) and wall < 10
    detail = ", ".join(f"{c['name']} {c['value']:.3g} (tol {c['tolerance']:g})" for c in checks) + f", {wall:.1f}s"
    assert record("time-net calculus", ok, detail), detail


def test_hardy_suite(record):
    t0 = time.perf_counter()
    hardy = check_hardy()
    t = default_t_grid(301)
    bounds = [derivative_bound_check(smoothness_curves(p, 2.0, t)) for p in (binary(), quadratic(), identity())]
    wall = time.perf_counter() - t0
    ok = hardy["pass"] and all(b.finite for b in bounds) and wall < 10
    sups = ", ".join(f"({b.sup_first:.3g}, {b.sup_second:.3g})" for b in bounds)
    detail = f"worst lhs/(C rhs) = {hardy['value']:.8f}, derivative ratio sups {sups}, {wall:.1f}s"
    assert record("Hardy suite and derivative bounds", ok, detail), detail


@pytest.mark.parametrize(
    "argv",
    [
        ["rates", "--n", "8:512", "--paths", "20000", "--format", "json"],
        ["simulate", "--net", "theta", "--n", "4,16,64", "--p", "2,3,4", "--paths", "20000"],
        ["smoothness", "--payoff", "call", "--model", "gbm", "--param", "K=1", "--t-points", "101", "--format", "json"],
        ["nets", "--net", "rule:curvature", "--n", "8", "--paths", "200", "--format", "json"],
    ],
    ids=["rates", "simulate", "smoothness", "nets"],
)
def test_reproducibility(record, tmp_path, argv):
    blobs = []
    for i, workers in enumerate(("1", "1", "4")):
        out = tmp_path / f"run{i}"
        assert main([*argv, "--workers", workers, "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    detail = f"{argv[0]}: rerun and 4 workers byte-identical ({len(blobs[0])} bytes)"
    assert record(f"reproducibility ({argv[0]})", ok, detail), detail
