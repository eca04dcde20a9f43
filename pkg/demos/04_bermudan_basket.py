"""Pricing a Bermudan basket put without regression or discretization bias.

The option pays e^{-gamma*t} * max(0, K - mean_i S_t^(i)) on exercise dates
t in {0, 1, 2, 3} years, where the d underlying assets follow independent
geometric Brownian motions (gamma = 5%, sigma = 20%, spot = strike = 100).
Regression-based pricers scale poorly with d and carry a model bias from
the chosen basis; here each replicate is an unbiased draw of the price
whatever the dimension, and d enters only through the cost of simulating
d-dimensional steps.

Published benchmark for d = 5 is 2.161 (s.e. 0.004).  A desk-scale run
lands inside a few standard errors; larger baskets diversify the payoff
away, so the price falls toward zero as d grows.
"""

import math

from musemc import RandomStream, RateSchedule, basket_put, clt_ci, estimate_utility, gbm

DATES = (0.0, 1.0, 2.0, 3.0)
REFERENCE_D5 = 2.161


def price(dim: int, n_replicates: int, seed: int):
    process = gbm(dim, len(DATES), gamma=0.05, div_yield=0.0, sigma=0.2, spot=100.0, times=DATES)
    reward = basket_put(strike=100.0, discount=0.05, times=DATES)
    schedule = RateSchedule.constant(0.6, len(DATES))
    return estimate_utility(process, reward, schedule, n_replicates=n_replicates, stream=RandomStream(seed))


def run() -> None:
    summary = price(dim=5, n_replicates=50_000, seed=41)
    ci = clt_ci(summary)
    gap = (summary.mean - REFERENCE_D5) / math.hypot(summary.std_error, 0.004)
    print(f"d = 5 basket put, {summary.n} replicates:")
    print(f"  estimate {summary.mean:.4f}  (se {summary.std_error:.4f}),  95% CI [{ci.lo:.4f}, {ci.hi:.4f}]")
    print(f"  published 2.161 (se 0.004): gap = {gap:+.2f} combined std errors")
    print(f"  draws consumed: {summary.total_cost}  ({summary.total_cost / summary.n:.1f} per replicate)")
    print()

    print("diversification: the same contract across basket sizes (10 000 replicates each)")
    print(f"{'d':>5} {'price':>8} {'se':>8}")
    for dim, seed in ((2, 42), (5, 43), (10, 44), (20, 45), (100, 46)):
        s = price(dim, 10_000, seed)
        print(f"{dim:>5} {s.mean:>8.4f} {s.std_error:>8.4f}")
    print("\nthe basket mean concentrates at its (rising) expectation, so deep baskets")
    print("almost never finish in the money and the put price decays toward zero.")


if __name__ == "__main__":
    run()
