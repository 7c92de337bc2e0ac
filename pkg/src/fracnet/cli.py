"""Command line entry point ``fracnet``."""

from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from .experiments import (
    ExperimentConfig,
    dump_json,
    make_model,
    make_net,
    rate_rows,
    rows_to_dict,
    run_rate_study,
    run_simulation,
    verify_suite,
)
from .model import build_grid, simulate_paths
from .payoff import make_payoff
from .simulator import write_csv
from .smoothness import besov_proxy_norm, curves_csv, default_t_grid, fit_theta, smoothness_curves
from .timenet import AdaptiveNetRule, mesh, mesh_theta, realize_random_net


def _float_list(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x)


def _int_list(text: str) -> tuple:
    """``8,16,32`` or ``8:512`` (powers of two from 8 to 512)."""
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        out, n = [], lo
        while n <= hi:
            out.append(n)
            n *= 2
        return tuple(out)
    return tuple(int(x) for x in text.split(",") if x)


def _param(text: str):
    key, _, value = text.partition("=")
    if not key or not _:
        raise argparse.ArgumentTypeError(f"expected k=v, got {text!r}")
    try:
        return key, float(value)
    except ValueError:
        return key, value


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=("bm", "gbm"), default="bm")
    common.add_argument("--payoff", default="binary", help="identity, quadratic, call, binary or product:a,b")
    common.add_argument("--param", type=_param, action="append", default=[], metavar="K=V", help="payoff parameter")
    common.add_argument("--dim", type=int, default=1)
    common.add_argument("--net", default="equidistant", help="equidistant, theta or rule:<constant|proportional|curvature>")
    common.add_argument("--net-param", type=_param, action="append", default=[], metavar="K=V")
    common.add_argument("--theta", type=float, default=0.5)
    common.add_argument("--q", type=float, default=math.inf, help="fine index of the proxy norms")
    common.add_argument("--p", type=_float_list, default=(2.0,), help="comma-separated marginal indices")
    common.add_argument("--n", type=_int_list, default=(8, 16, 32, 64, 128, 256, 512), help="list or lo:hi doubling")
    common.add_argument("--paths", type=int, default=None, help="Monte Carlo paths (default 100000; verify: by level)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None)
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--grid-refine", type=int, default=40)
    common.add_argument("--t-points", type=int, default=701)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--tolerance", type=float, default=0.1)
    common.add_argument("--timing", action="store_true", help="record wall time in experiment outputs")

    parser = argparse.ArgumentParser(prog="fracnet", description="Riemann approximation errors and fractional smoothness")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("nets", parents=[common], help="print time-nets and their meshes")
    sub.add_parser("simulate", parents=[common], help="error and square-function norms per net")
    sub.add_parser("rates", parents=[common], help="convergence rate study")
    sub.add_parser("smoothness", parents=[common], help="smoothness proxy curves and theta fit")
    v = sub.add_parser("verify", parents=[common], help="run the self-checks")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    return parser


def _config(args, fmt_default: str) -> ExperimentConfig:
    return ExperimentConfig(
        model=args.model,
        payoff=args.payoff,
        payoff_params=dict(args.param),
        net=args.net,
        net_params=dict(args.net_param),
        p_list=args.p,
        theta=args.theta,
        q=args.q,
        n_list=args.n,
        n_paths=args.paths or 100_000,
        seed=args.seed,
        t_points=args.t_points,
        grid_refine=args.grid_refine,
        tolerance=args.tolerance,
        workers=args.workers,
        dim=args.dim,
        out=args.out,
        format=args.format or fmt_default,
        timing=args.timing,
    )


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _nets(cfg: ExperimentConfig) -> str:
    payoff, model = make_payoff(cfg.payoff, cfg.dim, **cfg.payoff_params), make_model(cfg)
    rows = []
    for n in cfg.n_list:
        net = make_net(cfg, n, payoff, model)
        if isinstance(net, AdaptiveNetRule):
            grid = build_grid([], refine=cfg.grid_refine, base=8 * n)
            realized = realize_random_net(net, simulate_paths(model, grid, min(cfg.n_paths, 1000), cfg.seed))
            k = realized.knots
            rows.append({"n": n, "label": net.name, "mesh": float(np.mean(mesh_theta(k, 1.0))),
                         "mesh_theta": float(np.mean(mesh_theta(k, cfg.theta))), "knots": k[0].tolist()})
        else:
            rows.append({"n": n, "label": net.label, "mesh": mesh(net), "mesh_theta": mesh_theta(net, cfg.theta),
                         "knots": net.knots.tolist()})
    if cfg.format == "json":
        return dump_json({"config": cfg.to_dict(), "nets": rows})
    lines = ["n,label,i,knot,mesh,mesh_theta"]
    for r in rows:
        for i, k in enumerate(r["knots"]):
            lines.append(f"{r['n']},{r['label']},{i},{k!r},{r['mesh']!r},{r['mesh_theta']!r}")
    return "\n".join(lines) + "\n"


def _smoothness(cfg: ExperimentConfig) -> str:
    payoff, model = make_payoff(cfg.payoff, cfg.dim, **cfg.payoff_params), make_model(cfg)
    t = default_t_grid(cfg.t_points, cfg.t_delta)
    curves = [smoothness_curves(payoff, p, t, cfg.n_paths, cfg.seed, model=model) for p in cfg.p_list]
    if cfg.format == "csv":
        parts = [curves_csv(c) for c in curves]
        return parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
    out = []
    for c in curves:
        fit = fit_theta(c)
        norms = [besov_proxy_norm(c, cfg.theta, cfg.q, k) for k in (0, 1, 2)]
        out.append(
            {
                "p": c.p,
                "theta_fit": {"theta_hat": fit.theta_hat, "ci": list(fit.slope_ci), "window": list(fit.window),
                              "r_squared": fit.r_squared, "boundary": fit.boundary},
                "proxy_norms": [{"which": b.which, "value": b.value, "divergent": b.divergent} for b in norms],
                "t": c.t_grid, "d0": c.d0, "d1": c.d1, "d2": c.d2,
            }
        )
    return dump_json({"config": cfg.to_dict(), "curves": out})


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    t0 = time.perf_counter()
    if args.command == "verify":
        status, report = verify_suite(args.level, seed=args.seed, n_paths=args.paths, timing=args.timing)
        _emit(dump_json(report), args.out)
        return status
    try:
        cfg = _config(args, "json" if args.command == "rates" else "csv")
    except ValueError as exc:
        print(f"fracnet: {exc}", file=sys.stderr)
        return 2

    def wall():
        return time.perf_counter() - t0 if cfg.timing else None

    try:
        text = _run(args.command, cfg, wall)
    except (KeyError, ValueError) as exc:
        print(f"fracnet: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return 2
    _emit(text, cfg.out)
    return 0


def _run(command: str, cfg: ExperimentConfig, wall) -> str:
    if command == "nets":
        text = _nets(cfg)
    elif command == "simulate":
        rows = run_simulation(cfg)
        if cfg.format == "csv":
            text = write_csv(rows, config=cfg.to_dict())
        else:
            text = dump_json({"config": cfg.to_dict(), "rows": rows_to_dict(rows), "wall_time": wall()})
    elif command == "rates":
        reports = run_rate_study(cfg)
        if cfg.format == "csv":
            text = rate_rows(cfg, reports)
        else:
            text = dump_json({"config": cfg.to_dict(), "reports": [r.to_dict() for r in reports], "wall_time": wall()})
    else:
        text = _smoothness(cfg)
    return text


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
