"""Experiment orchestration: configuration, rate studies, the psi bound and self-checks."""

from __future__ import annotations

import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy
from scipy import stats

from . import __version__
from .model import DiffusionModel, ModelKind, build_grid, simulate_paths
from .payoff import Payoff, check_bm_gbm_hessian_identity, family, h_squared, make_payoff
from .quadrature import HARDY_FAMILY, HARDY_RTOL, WeightedCurve, hardy_check, weighted_q_norm
from .simulator import (
    GRADIENT,
    EquivalenceRow,
    LpEstimate,
    RatioEstimate,
    error_sample,
    lp_norm,
    paired_ratio,
    simulate_errors,
    write_csv,
)
from .smoothness import (
    besov_proxy_norm,
    default_t_grid,
    derivative_bound_check,
    fit_theta,
    h_norm_curve,
    riemann_liouville_norm,
    smoothness_curves,
)
from .timenet import (
    AdaptiveNetRule,
    constant_rule,
    curvature_rule,
    equidistant,
    mesh,
    mesh_theta,
    proportional_rule,
    realize_random_net,
    theta_net,
)

__all__ = [
    "ExperimentConfig",
    "RateReport",
    "PsiBound",
    "make_model",
    "make_net",
    "run_rate_study",
    "run_simulation",
    "psi_bound",
    "verify_suite",
    "dump_json",
]

HOLDER_TOL = 1e-12


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    ``net`` is ``"equidistant"``, ``"theta"`` (uses ``theta``) or
    ``"rule:<name>"`` with ``name`` in ``constant``, ``proportional``,
    ``curvature``.  ``holder = (q_h, r_h)`` is only needed for the psi bound;
    ``math.inf`` is allowed for either entry.
    """

    model: str = "bm"
    payoff: str = "binary"
    payoff_params: dict = field(default_factory=dict)
    net: str = "equidistant"
    net_params: dict = field(default_factory=dict)
    p_list: tuple = (2.0,)
    theta: float = 0.5
    q: float = math.inf
    holder: tuple | None = None
    n_list: tuple = (8, 16, 32, 64, 128, 256, 512)
    n_paths: int = 100_000
    seed: int = 0
    t_points: int = 701
    t_delta: float = 1e-6
    grid_refine: int = 40
    tolerance: float = 0.1
    workers: int = 1
    dim: int = 1
    out: str | None = None
    format: str = "json"
    timing: bool = False

    def __post_init__(self):
        self.p_list = tuple(float(p) for p in self.p_list)
        self.n_list = tuple(int(n) for n in self.n_list)
        if self.model not in ("bm", "gbm"):
            raise ValueError("model must be 'bm' or 'gbm'")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be 'csv' or 'json'")
        if any(p < 1 for p in self.p_list):
            raise ValueError("p must be >= 1")
        if self.n_paths < 1 or any(n < 1 for n in self.n_list):
            raise ValueError("n_paths and all n must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.holder is not None:
            self.holder = tuple(float(x) for x in self.holder)
            check_holder(self.p_list, *self.holder)

    def to_dict(self) -> dict:
        d = asdict(self)
        # execution details do not change results
        for key in ("timing", "workers", "out"):
            d.pop(key)
        return _jsonable(d)


def check_holder(p_list, q_h: float, r_h: float) -> None:
    """Reject ``(q_h, r_h)`` unless ``1/p = 1/q_h + 1/r_h`` and ``p <= q_h, r_h``."""
    for p in p_list:
        if abs(1.0 / p - 1.0 / q_h - 1.0 / r_h) > HOLDER_TOL:
            raise ValueError(f"Hoelder exponents violate 1/p = 1/q + 1/r for p={p}: q={q_h}, r={r_h}")
        if q_h < p or r_h < p:
            raise ValueError("Hoelder exponents must satisfy p <= q, r")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def dump_json(obj, path=None) -> str:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def make_model(cfg: ExperimentConfig) -> DiffusionModel:
    return DiffusionModel(ModelKind(cfg.model), cfg.dim)


def _payoff(cfg: ExperimentConfig) -> Payoff:
    return make_payoff(cfg.payoff, cfg.dim, **cfg.payoff_params)


def make_net(cfg: ExperimentConfig, n: int, payoff: Payoff | None = None, model: DiffusionModel | None = None):
    """The net of size ``n`` described by ``cfg``."""
    if cfg.net == "equidistant":
        return equidistant(n)
    if cfg.net == "theta":
        return theta_net(n, cfg.theta)
    if cfg.net.startswith("rule:"):
        name = cfg.net.split(":", 1)[1]
        if name == "constant":
            return constant_rule(n)
        if name == "proportional":
            return proportional_rule(float(cfg.net_params.get("c", 0.5)), n)
        if name == "curvature":
            payoff = payoff or _payoff(cfg)
            model = model or make_model(cfg)
            fam = family(payoff, model)
            return curvature_rule(
                lambda t, y: np.sqrt(h_squared(payoff, model, t, y, fam)),
                n,
                cfg.theta,
                float(cfg.net_params.get("scale", 1.0)),
            )
    raise ValueError(f"unknown net {cfg.net!r}")


# ---------------------------------------------------------------------------
# rate studies


@dataclass
class RateReport:
    p: float
    n_list: list
    estimates: list
    slope: float
    slope_ci: tuple
    theory: float | None
    tolerance: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "n": self.n_list,
            "estimates": [{"value": e.value, "std_err": e.std_err, "n_paths": e.n_paths} for e in self.estimates],
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "theory": self.theory,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }


def theory_slope(cfg: ExperimentConfig, payoff: Payoff, p: float) -> float | None:
    """``-theta/2`` for equidistant nets (known smoothness), ``-1/2`` for theta-nets."""
    if cfg.net == "equidistant":
        th = payoff.known_theta(p)
        return None if th is None else -min(th, 1.0) / 2.0
    if cfg.net == "theta":
        return -0.5
    return None


def fit_slope(n_list, estimates: Sequence[LpEstimate]):
    """Weighted least squares of ``log value`` on ``log n`` with a 95% interval."""
    x = np.log(np.asarray(n_list, dtype=float))
    v = np.array([e.value for e in estimates])
    se = np.array([e.std_err for e in estimates])
    y = np.log(v)
    rel = np.where(v > 0, se / np.where(v > 0, v, 1.0), np.inf)
    if np.all(rel > 0) and np.all(np.isfinite(rel)):
        w = 1.0 / rel**2
    else:
        w = np.ones_like(x)
    X = np.stack([np.ones_like(x), x], axis=1)
    W = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * W[:, None], y * W, rcond=None)
    resid = y - X @ coef
    dof = max(x.size - 2, 1)
    sigma2 = max(np.sum(w * resid**2) / dof, 1.0) if np.any(se > 0) else np.sum(resid**2) / dof
    cov = sigma2 * np.linalg.inv((X * w[:, None]).T @ X)
    half = stats.t.ppf(0.975, dof) * math.sqrt(max(cov[1, 1], 0.0))
    return float(coef[1]), (float(coef[1] - half), float(coef[1] + half))


def run_rate_study(cfg: ExperimentConfig) -> list[RateReport]:
    """``||C_1||_p`` over ``cfg.n_list`` for each ``p`` with a fitted log-log slope.

    All nets share the same paths.  The verdict is ``inconclusive`` when an
    error bar exceeds half the log-spacing between neighbouring estimates.
    """
    if len(cfg.n_list) < 4:
        raise ValueError("a rate study needs at least 4 values of n")
    payoff, model = _payoff(cfg), make_model(cfg)
    nets = [make_net(cfg, n, payoff, model) for n in cfg.n_list]
    samples = simulate_errors(
        payoff, model, nets, cfg.n_paths, cfg.seed, square_function=False, workers=cfg.workers
    )
    reports = []
    for p in cfg.p_list:
        est = [lp_norm(s.c_simple, p, cfg.seed) for s in samples]
        slope, ci = fit_slope(cfg.n_list, est)
        theory = theory_slope(cfg, payoff, p)
        logv = np.log([e.value for e in est])
        gaps = np.abs(np.diff(logv))
        rel = np.array([e.std_err / e.value for e in est])
        if np.any(rel[:-1] > 0.5 * gaps) or np.any(rel[1:] > 0.5 * gaps):
            verdict = "inconclusive"
        elif theory is None:
            verdict = "no-theory"
        else:
            verdict = "pass" if abs(slope - theory) <= cfg.tolerance else "fail"
        reports.append(RateReport(p, list(cfg.n_list), est, slope, ci, theory, cfg.tolerance, verdict))
    return reports


def run_simulation(cfg: ExperimentConfig) -> list[EquivalenceRow]:
    """Error and square-function norms with their ratio, per ``n`` and ``p``."""
    payoff, model = _payoff(cfg), make_model(cfg)
    nets = [make_net(cfg, n, payoff, model) for n in cfg.n_list]
    samples = simulate_errors(
        payoff, model, nets, cfg.n_paths, cfg.seed, grid_refine=cfg.grid_refine, workers=cfg.workers
    )
    rows = []
    for n, smp in zip(cfg.n_list, samples):
        for p in cfg.p_list:
            r = paired_ratio(smp.c_simple, smp.sq_fn, p, cfg.seed)
            rows.append(
                EquivalenceRow(cfg.net, n, p, GRADIENT.name, r.numerator, r.denominator, r, cfg.n_paths, cfg.seed, smp.n_tail_failures)
            )
    return rows


def rows_to_dict(rows: Sequence[EquivalenceRow]) -> list[dict]:
    return [
        {
            "net_family": r.net_family,
            "n": r.n,
            "p": r.p,
            "strategy": r.strategy,
            "lp_value": r.error.value,
            "std_err": r.error.std_err,
            "sq_fn_value": r.sq_fn.value,
            "sq_fn_std_err": r.sq_fn.std_err,
            "ratio": r.ratio.value,
            "ratio_std_err": r.ratio.std_err,
            "n_paths": r.n_paths,
            "seed": r.seed,
        }
        for r in rows
    ]


def rate_rows(cfg: ExperimentConfig, reports: Sequence[RateReport]) -> str:
    """Rate-study estimates in the simulation CSV layout (square-function columns empty)."""
    nan = float("nan")
    rows = []
    for rep in reports:
        for n, e in zip(rep.n_list, rep.estimates):
            blank = LpEstimate(rep.p, 0.0, 0.0, e.n_paths, e.seed)
            blank.value = blank.std_err = nan
            rows.append(
                EquivalenceRow(cfg.net, n, rep.p, GRADIENT.name, e, blank, RatioEstimate(nan, nan, e, blank, True), e.n_paths, e.seed)
            )
    return write_csv(rows, config=cfg.to_dict())


# ---------------------------------------------------------------------------
# psi bound


@dataclass
class PsiBound:
    value: float
    integral: float
    sup_factor: float
    divergent: bool
    mesh: float


def _psi_integral(meshes: np.ndarray, q_h: float, theta: float, n_u: int = 20001) -> float:
    """``int_0^1 ||min(|tau|, 1 - t)||_{q_h/2} (1 - t)^(theta - 2) dt`` for per-path meshes."""
    m = np.asarray(meshes, dtype=float).ravel()
    lo = min(float(m.min()), 1.0)
    if np.all(m == m[0]) or np.isinf(q_h):
        M = float(m.max())
        return M * (M ** (theta - 1.0) - 1.0) / (1.0 - theta) + M**theta / theta
    # below the smallest mesh min(|tau|, s) = s, integrated exactly
    s = np.exp(-np.linspace(0.0, -math.log(lo), n_u))
    r = q_h / 2.0
    norm = np.mean(np.minimum(m[None, :], s[:, None]) ** r, axis=1) ** (1.0 / r)
    body = np.trapezoid(norm * s ** (theta - 1.0), -np.log(s))
    return float(body + lo**theta / theta)


def psi_bound(
    net,
    p: float,
    q_h: float,
    r_h: float,
    payoff: Payoff,
    model: DiffusionModel,
    theta: float,
    *,
    n_paths: int = 10_000,
    seed: int = 0,
    t_grid=None,
) -> PsiBound:
    """Bound shape ``(int ||sqrt(psi)||_q^2 (1-t)^(theta-2) dt)^(1/2) sup_t (1-t)^(1-theta/2) ||H_G||_r``.

    ``psi(t) = |tau| ^ (1 - t)`` with ``|tau|`` the mesh of the (per-path)
    net; the constant in front is 1.  Random nets given as rules are realized
    on ``n_paths`` simulated paths.  For ``q_h = inf`` the integral equals
    ``M (M^(theta-1) - 1)/(1 - theta) + M^theta/theta`` with ``M = ||mesh||_inf``.
    """
    check_holder([p], q_h, r_h)
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if isinstance(net, AdaptiveNetRule):
        grid = build_grid([], refine=40, base=8 * net.max_steps)
        batch = simulate_paths(model, grid, n_paths, seed)
        meshes = mesh_theta(realize_random_net(net, batch).knots, 1.0)
    else:
        meshes = np.array([mesh(net)])
    integral = _psi_integral(meshes, q_h, theta)
    t, hr = h_norm_curve(payoff, model, r_h, t_grid, seed=seed)
    sup = weighted_q_norm(WeightedCurve(t, (1.0 - t) ** (1.0 - theta / 2.0) * hr), math.inf)
    value = math.sqrt(integral) * sup.value if sup.value > 0 else 0.0
    return PsiBound(float(value), float(integral), float(sup.value), sup.divergent, float(np.max(meshes)))


# ---------------------------------------------------------------------------
# self-checks


def _check(name, value, tolerance, passed):
    return {"name": name, "value": _jsonable(value), "tolerance": _jsonable(tolerance), "pass": bool(passed)}


def versions() -> dict:
    return {"fracnet": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def check_theta_mesh(theta_net_fn: Callable = theta_net, n_max: int = 1024) -> dict:
    """``|tau_n^theta|_theta <= 1/(theta n)`` for all ``n <= n_max`` and theta in ``{0.1, ..., 1}``.

    The comparison is exact in floating point; the reported value is the
    largest ``|tau_n^theta|_theta * theta * n``.
    """
    worst, ok = 0.0, True
    try:
        for th in np.round(np.arange(1, 11) / 10, 10):
            for n in range(1, n_max + 1):
                m = mesh_theta(theta_net_fn(n, th), th)
                ok &= bool(m <= 1.0 / (th * n))
                worst = max(worst, m * th * n)
    except ValueError:
        worst, ok = math.inf, False
    return _check("theta_net_mesh_bound", worst, 1.0, ok)


def check_equidistant_mesh(n_max: int = 1024) -> dict:
    err = 0.0
    for th in np.round(np.arange(1, 11) / 10, 10):
        for n in range(1, n_max + 1):
            err = max(err, abs(mesh_theta(equidistant(n), th) - n ** (-th)))
    return _check("equidistant_mesh_theta", err, 1e-12, err <= 1e-12)


def check_hessian_identity(n_probes: int = 100, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    probes = [(float(rng.uniform(0.0, 0.95)), float(rng.normal(0.0, 1.0))) for _ in range(n_probes)]
    rep = check_bm_gbm_hessian_identity(make_payoff("call", K=1.0), probes)
    return _check("bm_gbm_hessian_identity_call", rep.max_residual, 1e-6, rep.max_residual <= 1e-6)


def check_hardy() -> dict:
    worst, ok = 0.0, True
    for th in np.round(np.arange(1, 10) / 10, 10):
        for q in (1.0, 2.0, 4.0, math.inf):
            for _, fn, mono in HARDY_FAMILY:
                if q < 2 and not mono:
                    continue
                r = hardy_check(fn, th, q)
                ok &= r.holds
                if np.isfinite(r.ratio):
                    worst = max(worst, r.ratio / r.constant)
    return _check("hardy_inequality_family", worst, 1.0 + HARDY_RTOL, ok)


def check_quadratic_identity(n: int = 16, n_paths: int = 2000, seed: int = 0) -> list[dict]:
    bm = DiffusionModel.bm()
    q = make_payoff("quadratic")
    net = equidistant(n)
    grid = build_grid([net])
    batch = simulate_paths(bm, grid, n_paths, seed)
    es = error_sample(q, bm, batch, net)
    wk = batch.w[:, grid.index_of(net.knots), 0]
    ref = np.sum(np.diff(wk, axis=1) ** 2 - 1.0 / n, axis=1)
    e1 = float(np.max(np.abs(es.c_simple - ref)))
    e2 = float(np.max(np.abs(es.sq_fn - math.sqrt(2.0 / n))))
    return [
        _check("quadratic_error_ito_identity", e1, 1e-10, e1 <= 1e-10),
        _check("quadratic_square_function_exact", e2, 1e-10, e2 <= 1e-10),
    ]


def check_quadratic_rate(n_paths: int, seed: int = 0) -> dict:
    bm = DiffusionModel.bm()
    ns = (4, 16, 64)
    res = simulate_errors(make_payoff("quadratic"), bm, [equidistant(n) for n in ns], n_paths, seed, square_function=False)
    worst = 0.0
    for n, r in zip(ns, res):
        e = lp_norm(r.c_simple, 2, seed)
        worst = max(worst, abs(e.value - math.sqrt(2.0 / n)) / e.std_err)
    return _check("quadratic_l2_error_sqrt_2_over_n", worst, 3.0, worst <= 3.0)


def check_martingale(n_paths: int, seed: int = 0) -> dict:
    bm = DiffusionModel.bm()
    worst = 0.0
    for name in ("binary", "quadratic", "call"):
        res = simulate_errors(make_payoff(name), bm, [equidistant(16), theta_net(16, 0.5)], n_paths, seed, square_function=False)
        for r in res:
            c = r.c_simple
            worst = max(worst, abs(c.mean()) / (c.std(ddof=1) / math.sqrt(c.size)))
    return _check("error_has_zero_mean", worst, 3.0, worst <= 3.0)


def check_binary_curve(t_points: int) -> list[dict]:
    t = default_t_grid(t_points)
    t = t[t <= 1 - 1e-4]
    curve = smoothness_curves(make_payoff("binary"), 2.0, t)
    err = float(np.max(np.abs(curve.d0 - np.sqrt(0.25 - np.arcsin(t) / (2 * np.pi)))))
    fit = fit_theta(curve)
    db = derivative_bound_check(curve)
    return [
        _check("binary_d0_closed_form", err, 1e-6, err <= 1e-6),
        _check("binary_theta_fit", fit.theta_hat, [0.45, 0.55], abs(fit.theta_hat - 0.5) <= 0.05),
        _check("derivative_ratios_finite", [db.sup_first, db.sup_second], "finite", db.finite),
    ]


def check_rl_dichotomy(n_paths: int, seed: int = 0) -> dict:
    bm = DiffusionModel.bm()
    b = make_payoff("binary")
    curve = smoothness_curves(b, 2.0, default_t_grid(301))
    bad = []
    for th in (0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9):
        rl = riemann_liouville_norm(b, bm, th, 2.0, n_paths, seed)
        proxy = besov_proxy_norm(curve, th, 2.0, 2)
        if rl.divergent != (th > 0.5) or rl.divergent != proxy.divergent:
            bad.append(th)
    return _check("riemann_liouville_dichotomy", bad, [], not bad)


def check_reproducible(seed: int = 0) -> dict:
    cfg = ExperimentConfig(payoff="binary", n_list=(4, 8, 16, 32), n_paths=3000, seed=seed)
    a = rate_rows(cfg, run_rate_study(cfg))
    cfg.workers = 3
    b = rate_rows(cfg, run_rate_study(cfg))
    return _check("reproducible_across_workers", a == b, True, a == b)


def check_rates(n_paths: int, seed: int = 0) -> list[dict]:
    out = []
    for net in ("equidistant", "theta"):
        cfg = ExperimentConfig(payoff="binary", net=net, theta=0.5, n_list=(8, 16, 32, 64, 128, 256, 512), n_paths=n_paths, seed=seed)
        (rep,) = run_rate_study(cfg)
        target = -0.25 if net == "equidistant" else -0.5
        out.append(_check(f"binary_rate_{net}", rep.slope, [target - 0.1, target + 0.1], abs(rep.slope - target) <= 0.1))
    return out


def check_equivalence(n_paths: int, seed: int = 0) -> dict:
    worst_lo, worst_hi = math.inf, 0.0
    for name, model, kw in (("binary", "bm", {}), ("call", "gbm", {"K": 1.0}), ("quadratic", "bm", {})):
        for net in ("equidistant", "theta"):
            cfg = ExperimentConfig(
                model=model, payoff=name, payoff_params=kw, net=net, theta=0.5, p_list=(2, 3, 4),
                n_list=(4, 8, 16, 32, 64, 128, 256), n_paths=n_paths, seed=seed,
            )
            for r in run_simulation(cfg):
                worst_lo = min(worst_lo, r.ratio.value)
                worst_hi = max(worst_hi, r.ratio.value)
    ok = 0.1 <= worst_lo and worst_hi <= 10.0
    return _check("error_square_function_ratio", [worst_lo, worst_hi], [0.1, 10.0], ok)


def verify_suite(
    level: str = "fast",
    *,
    theta_net_fn: Callable = theta_net,
    seed: int = 0,
    n_paths: int | None = None,
    timing: bool = False,
) -> tuple[int, dict]:
    """Run the self-checks; returns ``(exit_status, report)``.

    ``fast`` uses 10^4 paths and skips the rate and equivalence studies;
    ``full`` uses 10^5 paths by default and includes them.  ``n_paths``
    overrides the Monte Carlo size of either level.  ``theta_net_fn`` can be
    replaced to confirm that a broken net construction is caught.  The
    report carries ``wall_time`` only when ``timing`` is set, so reruns are
    byte-identical.
    """
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    t0 = time.perf_counter()
    paths = n_paths or (10_000 if level == "fast" else 100_000)
    checks = [
        check_theta_mesh(theta_net_fn),
        check_equidistant_mesh(),
        check_hessian_identity(),
        check_hardy(),
        *check_quadratic_identity(),
        check_quadratic_rate(paths, seed),
        check_martingale(paths, seed),
        *check_binary_curve(201 if level == "fast" else 701),
        check_rl_dichotomy(2000 if level == "fast" else 20_000, seed),
        check_reproducible(seed),
    ]
    if level == "full":
        checks += check_rates(paths, seed)
        checks.append(check_equivalence(paths, seed))
    report = {
        "config": {"level": level, "seed": seed, "n_paths": paths},
        "checks": checks,
        "versions": versions(),
        "wall_time": time.perf_counter() - t0 if timing else None,
    }
    status = 0 if all(c["pass"] for c in checks) else 1
    return status, report
