"""The three-path example: a game whose set of relaxed equilibria is not convex.

The major player starts active and may exit at time 1 or, at the latest, at
time 2.  A continuum of minor players each pick one stopping time.  A minor
player is paid 1/2 for stopping first, 1 for stopping second if the major
exited exactly then, and 1/3 at the end.
"""
import numpy as np

from majorminor import MeanField, SolveConfig, anneal_to_relaxed, build_path_space, get_builtin
from majorminor.equilibrium import example_policy, nonconvexity_details
from majorminor.major import initial_value, solve_unregularized
from majorminor.minor import solve_dp

sc = get_builtin("paper-ex-2.1")
space = build_path_space(sc)

# Three histories survive to the end: exit at 1, exit at 2, or (forced) exit at 3.
for node in space.nodes(sc.horizon):
    print(" -> ".join(space.label_history(node)))

# The major player's rewards do not depend on the crowd, so its plain optimum
# is available at any mean field.
mf = MeanField.uniform(space, sc.n_minor)
V, argmax = solve_unregularized(sc, space, mf)
print("major optimal value:", initial_value(sc, space, V))

# alpha^p exits at time 1 with probability p.  The minor player's best
# response switches from "stop at once" to "wait" as p crosses 1/4.
# The minor clock runs one step behind the major one, so index s + 1 holds
# example time s.
for p in (0.0, 0.2, 0.25, 0.3, 1.0):
    dp, flow = solve_dp(sc, space, mf, example_policy(sc, space, p))
    when = [round(float(a.sum()), 3) for a in flow.mu_tilde[1:]]
    print(f"p={p:4.2f}  minor value={dp.total:.4f}  stopped mass at example times 0,1,2: {when}")

# Stopping everyone at time 0 is an equilibrium with p = 0, stopping everyone
# at time 1 is one with p = 1.  Their midpoint is an equilibrium for no p.
ok, details = nonconvexity_details()
print("midpoint fails for every p:", ok)
for p, gap in details["gaps"].items():
    print(f"  p={p:.1f}  minor gap {gap:.4f}")

# Annealing the entropy weight from 1 to 1e-3 picks the equilibrium where the
# major waits and the minor players split evenly at time 1.
rep = anneal_to_relaxed(sc, space, SolveConfig(anneal=(1.0, 0.5, 1e-3), eps_final=1e-6))
print("annealed:", "certified" if rep.certificate.ok else "NOT certified", f"after {rep.iterations} iterations")
for line in rep.certificate.lines():
    print("  " + line)
print("exit probability at time 1:", np.round(rep.alpha.probs(1)[0, 1], 6))
