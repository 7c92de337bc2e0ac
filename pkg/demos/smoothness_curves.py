"""Reading off fractional smoothness from conditional-expectation curves.

d0(t) = ||f(W_1) - E(f(W_1) | W_t)||_p decays like (1 - t)^(theta/2).  For the
digital at p = 2 there is a closed form, the slope gives theta = 1/2, and the
weighted proxy norms agree with each other inside the smoothness range and
diverge together outside it.
"""

import math

import numpy as np

from fracnet import besov_proxy_norm, fit_theta, make_payoff, smoothness_curves
from fracnet.smoothness import default_t_grid, proxy_consistency

curve = smoothness_curves(make_payoff("binary"), 2.0, default_t_grid(401))
t = curve.t_grid
print("max |d0 - sqrt(1/4 - arcsin(t)/(2 pi))| =", float(np.max(np.abs(curve.d0 - np.sqrt(0.25 - np.arcsin(t) / (2 * np.pi))))))

fit = fit_theta(curve)
print(f"theta_hat = {fit.theta_hat:.4f}  95% CI = ({fit.slope_ci[0]:.4f}, {fit.slope_ci[1]:.4f})")

for theta in (0.3, 0.5, 0.7):
    sup = besov_proxy_norm(curve, theta, math.inf, 0)
    pc = proxy_consistency(curve, theta, 2.0)
    state = f"spread {pc.spread:.2f}" if pc.all_finite else "all three diverge"
    print(f"theta={theta}: sup proxy {'inf' if sup.divergent else f'{sup.value:.4f}'}, q=2 proxies: {state}")
