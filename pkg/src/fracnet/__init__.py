"""Riemann approximation of stochastic integrals and fractional smoothness on Wiener space."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DiffusionModel,
    ModelKind,
    PathBatch,
    ResourceError,
    TimeGrid,
    build_grid,
    simulate_paths,
)
from .payoff import (  # noqa: E402
    Payoff,
    QuadratureError,
    conditional_expectation,
    gradient,
    h_value,
    hessian,
    make_payoff,
)
from .quadrature import WeightedCurve, hardy_check, kernel_interval_integral, weighted_q_norm  # noqa: E402
from .simulator import (  # noqa: E402
    GRADIENT,
    ZERO,
    LpEstimate,
    Strategy,
    equivalence_ratio,
    error_sample,
    exact_integral,
    lp_norm,
    lp_norm_mc,
    riemann_sum,
    simulate_errors,
    strategy_comparison,
)
from .smoothness import (  # noqa: E402
    besov_proxy_norm,
    fit_theta,
    riemann_liouville_norm,
    smoothness_curves,
)
from .timenet import TimeNet, equidistant, mesh, mesh_theta, realize_random_net, theta_net  # noqa: E402

__all__ = [
    "DiffusionModel",
    "ModelKind",
    "PathBatch",
    "ResourceError",
    "TimeGrid",
    "build_grid",
    "simulate_paths",
    "Payoff",
    "QuadratureError",
    "conditional_expectation",
    "gradient",
    "hessian",
    "h_value",
    "make_payoff",
    "WeightedCurve",
    "weighted_q_norm",
    "kernel_interval_integral",
    "hardy_check",
    "GRADIENT",
    "ZERO",
    "LpEstimate",
    "Strategy",
    "exact_integral",
    "riemann_sum",
    "error_sample",
    "lp_norm",
    "lp_norm_mc",
    "simulate_errors",
    "equivalence_ratio",
    "strategy_comparison",
    "smoothness_curves",
    "besov_proxy_norm",
    "fit_theta",
    "riemann_liouville_norm",
    "TimeNet",
    "equidistant",
    "theta_net",
    "mesh",
    "mesh_theta",
    "realize_random_net",
]
