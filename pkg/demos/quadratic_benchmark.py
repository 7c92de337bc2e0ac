"""Hedging x^2 with Riemann sums: the one case where everything is explicit.

For g(x) = x^2 under Brownian motion the error on an equidistant net is
sum_i ((dW_i)^2 - 1/n), so ||C_1||_2 = sqrt(2/n) and the square function is
the constant sqrt(2/n) on every path.
"""

import math

from fracnet import DiffusionModel, equidistant, lp_norm, make_payoff, simulate_errors

bm = DiffusionModel.bm()
ns = [4, 16, 64, 256]
samples = simulate_errors(make_payoff("quadratic"), bm, [equidistant(n) for n in ns], n_paths=20_000, seed=0)

print(f"{'n':>5} {'||C_1||_2':>12} {'se':>9} {'sqrt(2/n)':>10} {'sq_fn':>10}")
for n, s in zip(ns, samples):
    e = lp_norm(s.c_simple, 2)
    print(f"{n:5d} {e.value:12.5f} {e.std_err:9.5f} {math.sqrt(2 / n):10.5f} {s.sq_fn.mean():10.5f}")
