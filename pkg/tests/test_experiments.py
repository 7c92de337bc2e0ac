import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracnet.experiments import (
    ExperimentConfig,
    _psi_integral,
    check_holder,
    check_theta_mesh,
    dump_json,
    fit_slope,
    make_net,
    psi_bound,
    rate_rows,
    run_rate_study,
    run_simulation,
    verify_suite,
)
from fracnet.model import DiffusionModel
from fracnet.payoff import binary, identity
from fracnet.simulator import LpEstimate, lp_norm, simulate_errors
from fracnet.timenet import AdaptiveNetRule, TimeNet, equidistant, proportional_rule

BM = DiffusionModel.bm(1)


def test_config_validation_and_dict():
    with pytest.raises(ValueError):
        ExperimentConfig(model="heston")
    with pytest.raises(ValueError):
        ExperimentConfig(p_list=(0.5,))
    with pytest.raises(ValueError):
        ExperimentConfig(seed=-1)
    with pytest.raises(ValueError):
        ExperimentConfig(p_list=(2,), holder=(4.0, 3.0))
    cfg = ExperimentConfig(p_list=(2,), holder=(math.inf, 2.0), workers=4, out="x", timing=True)
    d = cfg.to_dict()
    assert d["holder"] == ["inf", 2.0] and "workers" not in d and "out" not in d and "timing" not in d
    assert d["seed"] == 0


@settings(max_examples=50, deadline=None)
@given(st.floats(2.0, 8.0), st.floats(0.01, 0.99))
def test_holder_triples(p, frac):
    # 1/q + 1/r = 1/p splits 1/p in two positive parts
    q, r = p / frac, p / (1 - frac)
    check_holder([p], q, r)
    with pytest.raises(ValueError):
        check_holder([p], q, r * (1 + 1e-9))


def test_make_net():
    assert make_net(ExperimentConfig(net="theta", theta=0.25), 8).label == "theta(8,0.25)"
    assert isinstance(make_net(ExperimentConfig(net="rule:curvature"), 8), AdaptiveNetRule)
    assert make_net(ExperimentConfig(net="rule:proportional", net_params={"c": 0.3}), 4).name == "proportional(0.3,4)"
    with pytest.raises(ValueError):
        make_net(ExperimentConfig(net="rule:nope"), 4)


def test_fit_slope_exact_power_law():
    n = [4, 8, 16, 32]
    est = [LpEstimate(2, 3.0 * k**-0.37, 0.01 * k**-0.37, 100, 0) for k in n]
    slope, ci = fit_slope(n, est)
    assert slope == pytest.approx(-0.37, abs=1e-12) and ci[0] < slope < ci[1]


def test_quadratic_rate_study():
    cfg = ExperimentConfig(payoff="quadratic", n_list=(4, 8, 16, 32, 64), n_paths=20_000, seed=1)
    (rep,) = run_rate_study(cfg)
    assert abs(rep.slope + 0.5) <= 0.05 and rep.theory == -0.5
    for n, e in zip(cfg.n_list, rep.estimates):
        assert abs(e.value - math.sqrt(2 / n)) < 3.5 * e.std_err
    assert rep.verdict == "pass"
    with pytest.raises(ValueError):
        run_rate_study(ExperimentConfig(n_list=(4, 8, 16)))


def test_rate_study_inconclusive_with_few_paths():
    (rep,) = run_rate_study(ExperimentConfig(n_list=(64, 128, 256, 512), n_paths=200))
    assert rep.verdict == "inconclusive"


def test_simulation_rows_and_csv():
    cfg = ExperimentConfig(payoff="call", model="gbm", payoff_params={"K": 1.0}, net="theta", p_list=(2, 4), n_list=(4, 8), n_paths=2000)
    rows = run_simulation(cfg)
    assert [(r.n, r.p) for r in rows] == [(4, 2.0), (4, 4.0), (8, 2.0), (8, 4.0)]
    assert all(0.1 <= r.ratio.value <= 10 for r in rows)
    text = rate_rows(cfg, run_rate_study(ExperimentConfig(n_list=(4, 8, 16, 32), n_paths=500)))
    assert text.startswith("# config ") and text.count("\n") == 2 + 4


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-4, 1.0), st.floats(0.05, 0.95))
def test_psi_integral_closed_form_bound(M, theta):
    val = _psi_integral(np.array([M]), math.inf, theta)
    direct = integrate.quad(lambda s: min(M, s) * s ** (theta - 2), 0, 1, points=[M], limit=200)[0]
    assert val == pytest.approx(direct, rel=1e-7)
    assert val <= M**theta / (theta * (1 - theta)) * (1 + 1e-12)


def test_psi_integral_random_meshes_matches_quadrature():
    m = np.array([0.05, 0.1, 0.2, 0.4])
    theta, qh = 0.5, 4.0
    r = qh / 2

    def integrand(s):
        return np.mean(np.minimum(m, s) ** r) ** (1 / r) * s ** (theta - 2)

    want = integrate.quad(integrand, 0, 1, points=list(m), limit=200)[0]
    assert _psi_integral(m, qh, theta) == pytest.approx(want, rel=1e-5)


def test_psi_bound_shape():
    theta = 0.5
    vals = [psi_bound(equidistant(n), 2.0, math.inf, 2.0, binary(), BM, theta).value for n in (1024, 4096, 16384)]
    slopes = np.diff(np.log(vals)) / math.log(4)
    # integral ~ n^-theta / (theta (1 - theta)) so the bound decays like n^(-theta/2)
    assert np.all(np.abs(slopes + theta / 2) < 0.02)
    zero = psi_bound(equidistant(8), 2.0, math.inf, 2.0, identity(), BM, theta)
    assert zero.value == 0.0 and zero.sup_factor == 0.0
    assert psi_bound(equidistant(8), 2.0, math.inf, 2.0, binary(), BM, 0.8).divergent
    # ||H||_4 ~ (1-t)^(-7/8) keeps the sup factor finite for theta <= 1/4
    rnd = psi_bound(proportional_rule(0.5, 6), 2.0, 4.0, 4.0, binary(), BM, 0.2, n_paths=200)
    assert np.isfinite(rnd.value) and rnd.mesh == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(ValueError):
        psi_bound(equidistant(8), 2.0, 3.0, 3.0, binary(), BM, 0.5)


def test_psi_bound_dominates_error_with_stable_budget():
    ns = (8, 32, 128)
    res = simulate_errors(binary(), BM, [equidistant(n) for n in ns], 20_000, seed=2, square_function=False)
    budgets = [
        lp_norm(r.c_simple, 2).value / psi_bound(equidistant(n), 2.0, math.inf, 2.0, binary(), BM, 0.5).value
        for n, r in zip(ns, res)
    ]
    assert max(budgets) / min(budgets) < 1.5
    assert max(budgets) < 1.0


def test_theta_mesh_check_catches_off_by_one():
    def broken(n, theta):
        return TimeNet(1 - (1 - np.arange(n + 1) / n) ** (1 / theta + 1))

    assert check_theta_mesh()["pass"]
    assert not check_theta_mesh(broken, n_max=64)["pass"]


def test_dump_json_handles_non_finite(tmp_path):
    text = dump_json({"b": math.inf, "a": np.float64(math.nan), "c": np.arange(2)}, tmp_path / "x.json")
    assert json.loads(text) == {"a": "nan", "b": "inf", "c": [0, 1]}
    assert (tmp_path / "x.json").read_text() == text


def test_verify_fast_and_mutation():
    status, report = verify_suite("fast")
    assert status == 0, [c for c in report["checks"] if not c["pass"]]
    assert report["wall_time"] is None and set(report) == {"config", "checks", "versions", "wall_time"}
    for c in report["checks"]:
        assert set(c) == {"name", "value", "tolerance", "pass"}

    def broken(n, theta):
        return TimeNet(1 - (1 - np.arange(n + 1) / n) ** (1 / theta + 1))

    status, report = verify_suite("fast", theta_net_fn=broken, n_paths=2000)
    failed = {c["name"] for c in report["checks"] if not c["pass"]}
    assert status == 1 and "theta_net_mesh_bound" in failed
    with pytest.raises(ValueError):
        verify_suite("medium")
