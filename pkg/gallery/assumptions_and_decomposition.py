"""
Checking identifiability and splitting the regret
=================================================

First the relative-entropy check on both examples, then the three-way split
of total regret into finite-time, state and residual parts.
"""
from tsmdp import example1, example2, example3
from tsmdp.assumptions import DROPPED_FACTOR, check_assumption2, relative_entropy
from tsmdp.regret import regret_report

s3 = example3()
for label in s3.controls:
    u = s3.control_index(label)
    k = relative_entropy(s3, 0, u, s3.true_param, 0)
    k_alt = relative_entropy(s3, 0, u, s3.true_param, 0, convention=DROPPED_FACTOR)
    print(f"control {label}: KL = {k:.4f}  (without the 1/(2 sigma^2) factor: {k_alt:.4f})")

for s in (example1(), s3):
    rep = check_assumption2(s)
    print(f"{s.name}: satisfied={rep.satisfied}", *rep.violations[:3], sep="\n  ")

###############################################################################
# Example 2 starts almost sure of the wrong parameter, so most of its regret
# is state regret: the runs that walk into xA never come back.

s2 = example2()
print("\n  n   finite   state   residual   total   gap")
for n in (1, 5, 20):
    r = regret_report(s2, n, 5000, seed=0)
    print(
        f"{n:3d}  {r.finite_time.mean:7.3f} {r.state.mean:7.3f} {r.residual.mean:9.4f} "
        f"{r.total.mean:7.3f}  {r.identity_gap.mean:.1e}"
    )
