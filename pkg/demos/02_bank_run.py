"""Bank run: depositors withdraw (stop) while a bank manager exerts effort.

The manager's chance of an up move is (a + m(S)) / 2 where m(S) is the mass
of depositors still in the bank.  Withdrawals depend on the crowd, and
different starting beliefs about the crowd settle on different equilibria.
"""
import numpy as np

from majorminor import SolveConfig, anneal_to_relaxed, build_path_space, get_builtin, solve_regularized_equilibrium

sc = get_builtin("bankrun-toy")
space = build_path_space(sc)
print(sc.description)
print("effort grid:", sc.actions.points[:, 0])

# The same game from five random starting mean fields.
for seed in range(5):
    rep = solve_regularized_equilibrium(sc, space, SolveConfig(lam=0.2, seed=seed))
    withdrawn = np.cumsum([a.sum() for a in rep.flow.mu_tilde])
    print(f"seed {seed}: {rep.iterations:3d} iterations, withdrawn by t: {np.round(withdrawn, 3)}")

# Annealing from the uniform start.  Neighbouring effort levels differ by
# little, so the schedule goes down to 1e-6 before the policy concentrates.
rep = anneal_to_relaxed(sc, space, SolveConfig(anneal=(1.0, 0.5, 1e-6)))
print("relaxed equilibrium certified:", rep.certificate.ok)
for e in rep.lambda_trace[::4]:
    print(f"  lambda={e['lambda']:.2e}  iterations={e['iterations']:3d}  max|V|={e['max_abs_value']:.4f}")
effort = rep.alpha.probs(0) @ sc.actions.points[:, 0]
print("expected effort at t=0 by start state:", np.round(effort, 3))
