"""Minor players who steer their state instead of choosing when to stop.

In the coupled toy the major player's chance of ending 'high' is (a + c)/2
where c is the share of minor players choosing action 1, and a minor player
in state 1 is paid 1 only if the major ends high.
"""
import numpy as np

from majorminor import SolveConfig, build_path_space
from majorminor.control import (control_model, control_toy, control_toy_coupled, dynamics_residual,
                                family_oracle, solve_control_equilibrium, verify_control)

# With no coupling the loop needs two passes: one to compute the answer and one to confirm it.
cs = control_toy()
space = build_path_space(cs)
rep = solve_control_equilibrium(cs, space, SolveConfig(lam=0.1))
print(f"{cs.name}: {rep.iterations} iterations, converged={rep.converged}")

cs = control_toy_coupled()
space = build_path_space(cs)
rep = solve_control_equilibrium(cs, space, SolveConfig(lam=0.1, tol=1e-12))
cert = verify_control(rep, cs, space, 1e-6)
for line in cert.lines():
    print("  " + line)
cm = control_model(cs, space, rep.alpha, rep.mf)
print("forward-identity residual:", dynamics_residual(rep.flow, cm))

# Grid search over the family "everyone plays action 1 with probability c".
fam = family_oracle(cs, space, 0.1, np.linspace(0, 1, 11))
for c, r in zip(fam["c"], fam["residual"]):
    print(f"  c={c:.1f}  fixed-point residual {r:.3f}")
print("best c:", fam["c"][fam["best"]])
