"""
Example 1: stuck in the wrong room
==================================

Two absorbing rooms, one of which pays 1 per period. Thompson sampling
commits at the first step, so with prior 0.5 half the runs end up in the
room that never pays. The finite-time regret then has a closed form that we
compare with simulation.
"""
import numpy as np

from tsmdp import example1, solve
from tsmdp.regret import estimate_value, expected_finite_regret
from tsmdp.thompson import THOMPSON

s = example1(beta=0.9, prior_a=0.5)
plan = solve(s)
print("states:", s.states)
print("optimal value under the true parameter:", plan.values[s.true_param])

###############################################################################
# Thompson sampling value from the start is the prior mass on the truth times
# beta / (1 - beta).

v = estimate_value(s, THOMPSON, 0, 20_000, seed=1)
print(f"V_TS(0) = {v}   (closed form {0.5 * 9:.3f})")

###############################################################################
# Finite-time regret in period-n units.

for n in (2, 5, 10):
    est = expected_finite_regret(s, n, 20_000, seed=n)
    closed = (s.beta ** (1 - n) - 1) / (1 - s.beta) * 0.5
    print(f"n={n:2d}  MC {est.mean:7.4f} ± {est.std_error:.4f}   closed form {closed:7.4f}")

###############################################################################
# The rewards inside each room tell the parameters apart, so the posterior
# still concentrates on the truth even in runs that are stuck.

from tsmdp.thompson import run_batch

batch = run_batch(s, THOMPSON, 50, 1000, seed=3)
stuck = batch.states[:, -1] != s.state_index("xB")
print(f"runs stuck in xA: {stuck.mean():.3f}")
print(f"final belief on truth in stuck runs: {batch.beliefs[stuck, -1, s.true_param].min():.3f}")
