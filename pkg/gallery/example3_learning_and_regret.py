"""
Example 3: how fast does Thompson sampling stop paying for its mistakes?
========================================================================

One state, two controls with Gaussian rewards. We condition on the first
sample being wrong and follow the posterior error and the residual regret.
"""
import numpy as np

from tsmdp import example3
from tsmdp.regret import (
    expected_residual_regret_mc,
    expected_residual_regret_td,
    frozen_belief_residual_regret,
    posterior_error_curve,
)
from tsmdp.thompson import first_sample_wrong

s = example3()
cond = first_sample_wrong(s)
runs = 5000

curve = posterior_error_curve(s, 60, runs, seed=0, condition=cond)
print(f"fitted error ~ {curve.fitted_a:.3f} * exp(-{curve.fitted_b:.3f} t)")
for t in (0, 1, 5, 10, 20, 40):
    print(f"t={t:2d}  E[1 - pi_t(B)] = {curve.error[t]:.5f}")

###############################################################################
# Residual regret by two independent routes, next to the frozen-belief
# shortcut that scores the period-n sample as if it were never revised.

print("\n  n   residual(MC)  residual(TD)  frozen-belief")
for n in (1, 5, 10, 20, 40):
    mc = expected_residual_regret_mc(s, n, runs, seed=1, condition=cond)
    td = expected_residual_regret_td(s, n, runs, seed=1, condition=cond)
    fz = frozen_belief_residual_regret(s, n, runs, seed=1, condition=cond)
    print(f"{n:3d}   {mc.mean:10.4f}   {td.mean:10.4f}   {fz.mean:10.4f}")

###############################################################################
# In expectation the frozen figure is the larger one, since learning after
# period n can only shorten the time spent on the wrong control. At large n
# all three are within Monte-Carlo noise of each other.
