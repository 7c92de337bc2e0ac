"""Convergence rates for the digital payoff 1{W_1 >= 0}.

The digital has fractional smoothness 1/2 in L_2.  On equidistant nets the
L_2 error decays like n^(-1/4); moving knots toward the horizon with
theta-nets speeds this up.  At theta = 1/2 the curvature integral sits exactly
on the edge of integrability, so a logarithmic factor remains and the fitted
slope lands near -0.38 rather than -1/2; smaller theta comes closer to it.
"""

from fracnet.experiments import ExperimentConfig, run_rate_study

for net, theta in (("equidistant", 0.5), ("theta", 0.5), ("theta", 0.3)):
    cfg = ExperimentConfig(payoff="binary", net=net, theta=theta, n_list=(8, 16, 32, 64, 128, 256, 512), n_paths=20_000)
    (rep,) = run_rate_study(cfg)
    label = net if net == "equidistant" else f"theta={theta}"
    values = " ".join(f"{e.value:.4f}" for e in rep.estimates)
    print(f"{label:12s} slope {rep.slope:+.3f} (theory {rep.theory:+.2f})  errors: {values}")
