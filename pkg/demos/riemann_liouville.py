"""The curvature integral that decides whether theta-nets reach the n^(-1/2) rate.

D^theta = (int_0^1 (1-u)^(1-theta) H_G(u, W_u)^2 du)^(1/2) is finite in L_2
for the digital exactly when theta < 1/2.  Path-wise the integral is almost
always finite, so the verdict comes from the moment curve E H_G^2; the sampled
value is kept in raw_value.
"""

from fracnet import DiffusionModel, make_payoff, riemann_liouville_norm

digital = make_payoff("binary")
for theta in (0.1, 0.3, 0.45, 0.55, 0.7, 0.9):
    est = riemann_liouville_norm(digital, DiffusionModel.bm(), theta, 2.0, n_paths=5_000)
    shown = "divergent" if est.divergent else f"{est.value:.4f} +- {est.std_err:.4f}"
    print(f"theta={theta:<5} ||D^theta||_2 = {shown:22s} sampled {est.raw_value:.4f}")
