"""Random time-nets decided along the path, compared with deterministic ones.

A curvature rule shortens steps where H_G is large.  All nets are evaluated
on the same simulated paths, and the error/square-function ratio stays of
order one for every net.
"""

import math

from fracnet import DiffusionModel, equidistant, lp_norm, make_payoff, simulate_errors, theta_net
from fracnet.payoff import family, h_squared
from fracnet.timenet import curvature_rule

bm = DiffusionModel.bm()
digital = make_payoff("binary")
fam = family(digital, bm)
rule = curvature_rule(lambda t, y: (h_squared(digital, bm, t, y, fam)) ** 0.5, 32, theta=0.5, scale=0.05)

nets = [equidistant(32), theta_net(32, 0.5), rule]
for net, s in zip(nets, simulate_errors(digital, bm, nets, n_paths=5_000, seed=1)):
    err, sq = lp_norm(s.c_simple, 2), lp_norm(s.sq_fn, 2)
    name = getattr(net, "label", None) or net.name
    print(f"{name:18s} ||C_1||_2 = {err.value:.4f}  ||sq_fn||_2 = {sq.value:.4f}  ratio = {err.value / sq.value:.3f}")

print("sqrt(1/4 - 1/(2 pi)) (a single step) =", round(math.sqrt(0.25 - 1 / (2 * math.pi)), 4))
