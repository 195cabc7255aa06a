"""Build a scenario from arrays, save it, and run the command line on it.

A two-state economy and a three-cell minor grid.  The only coupling is
through the moment feature: the average minor position raises the chance
that the economy is good next period.
"""
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from majorminor import ActionSpace, AffineTable, FeatureMap, Scenario
from majorminor.scenario import save_scenario

T, S0, A, S = 2, 2, 2, 3
grid = np.array([0.0, 0.5, 1.0])
K = 1  # moment feature: one number in [0, 1]

major = AffineTable(np.zeros((T, S0, A, S0)), np.zeros((K, T, S0, A, S0)))
major.base[:, :, 0] = [0.7, 0.3]
major.base[:, :, 1] = [0.4, 0.6]
major.coef[0, ..., 1] = 0.2   # each unit of average position adds 0.2 to "good"
major.coef[0, ..., 0] = -0.2

walk = np.zeros((T, S, S0, S))
for x in range(S):
    walk[:, x, 1, min(x + 1, S - 1)] += 0.5
    walk[:, x, 1, x] += 0.5
    walk[:, x, 0, max(x - 1, 0)] += 0.5
    walk[:, x, 0, x] += 0.5


def zeros(shape):
    return AffineTable(np.zeros(shape), np.zeros((K,) + shape))


run = zeros((T, S0, A))
run.base[:, 1, :] = 0.5
run.base[:, :, 1] -= 0.1
stop = zeros((T + 1, S0, S))
stop.base[:] = grid
stop.base[:, 0, :] *= 0.5

sc = Scenario(
    name="two-regime", horizon=T, major_states=("bad", "good"), minor_grid=grid,
    actions=ActionSpace.finite([0, 1]), features=FeatureMap("moment", grid),
    major_kernel=major, minor_kernel=AffineTable(walk, np.zeros((K,) + walk.shape)),
    major_running_reward=run, major_terminal_reward=zeros((S0,)),
    minor_continuation_reward=zeros((T, S0, S)), minor_stopping_reward=stop,
    initial_major_law=np.array([0.5, 0.5]), initial_minor_law=np.array([0.3, 0.4, 0.3]),
).validate()

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "two_regime.json"
    save_scenario(sc, path)
    for verb in (["solve", "--lambda", "0.1"], ["anneal"]):
        out = Path(tmp) / verb[0]
        res = subprocess.run([sys.executable, "-m", "majorminor", *verb, "--scenario", str(path), "--out", str(out)],
                             capture_output=True, text=True)
        print(res.stdout, end="")
        print("exit status", res.returncode, "files:", sorted(p.name for p in out.iterdir()))
    res = subprocess.run([sys.executable, "-m", "majorminor", "verify", str(Path(tmp) / "anneal" / "report.json"),
                          "--scenario", str(path)], capture_output=True, text=True)
    print(res.stdout, end="")
