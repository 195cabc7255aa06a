"""Three independent routes to the minor player's best response.

Backward induction is the production path.  The occupation-measure linear
program, solved by the in-repo revised simplex, is the verification path.
Enumerating every deterministic stopping rule is the brute-force referee.
"""
import time

import numpy as np

from majorminor import MeanField, build_path_space
from majorminor.instances import random_policy, random_scenario
from majorminor.minor import assemble_constraints, lp_best_response, minor_model, solve_dp
from majorminor.errors import CapacityError
from majorminor.oracle import brute_force_stopping, stopping_rule_count

rng = np.random.default_rng(0)
worst = 0.0
for i in range(10):
    sc = random_scenario(rng, n_minor=2, n_major=2, horizon=2)
    space = build_path_space(sc)
    mf = MeanField.random(space, sc.n_minor, rng)
    alpha = random_policy(rng, space, sc.actions)
    mm = minor_model(sc, space, mf, alpha)

    t0 = time.perf_counter()
    dp, _ = solve_dp(sc, space, mf, alpha, model=mm)
    t1 = time.perf_counter()
    _, lp = lp_best_response(sc, space, mf, alpha, model=mm)
    t2 = time.perf_counter()
    n_rules = stopping_rule_count(mm)
    try:
        bf, _, _ = brute_force_stopping(mm)
    except CapacityError:
        # too many rules to enumerate; the two fast routes still have to agree
        bf = dp.total
    t3 = time.perf_counter()
    worst = max(worst, abs(dp.total - lp), abs(dp.total - bf))
    print(f"{i}: dp={dp.total:+.12f} ({(t1 - t0) * 1e3:.1f} ms)  lp={lp:+.12f} ({(t2 - t1) * 1e3:.1f} ms)  "
          f"rules={n_rules} ({(t3 - t2) * 1e3:.1f} ms)")
print(f"largest disagreement: {worst:.1e}")

# The linear program's equality constraints can be inspected in a fixed-column text layout.
system = assemble_constraints(sc, space, mf, alpha)
print(system.dump().splitlines()[:8])
