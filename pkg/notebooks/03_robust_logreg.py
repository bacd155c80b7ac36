"""
Robust logistic regression: DREAM against gradient-tracking GDA
===============================================================

1000 digits samples (label +1 for digits 5-9) spread over 8 agents on a
very lazy ring.  Both methods share the same step sizes; DREAM samples
mini-batches and mixes with one FastMix round, the baseline computes full
local gradients and gossips once.
"""

# %%
import os
import warnings

import numpy as np

from dreamopt.harness import ExperimentConfig, primal_at_budget, run_experiment

warnings.simplefilter("ignore")
HERE = os.path.dirname(os.path.abspath(__file__))
DIGITS = os.path.join(HERE, "..", "tests", "data", "digits_binary.libsvm")

TUNED = dict(eta=1.0, gamma=1.0, b=8, b_prime=64, p=0.5, q=0.5, K0=1, K=1, K_prime=1,
             T=1_000_000)
COMM = 12_000


def run(algo, seed, **extra):
    cfg = ExperimentConfig(dataset=DIGITS, d_x=64, subset=1000, subset_seed=seed,
                           partition_seed=seed, m=8, tau=0.999, mode="online", algo=algo,
                           seed=seed, max_comm=COMM, diag_every=50,
                           overrides={**TUNED, **extra})
    return run_experiment(cfg, write=False).records


# %%
rows = []
for seed in range(5):
    d, g = run("dream", seed), run("gt-gda", seed)
    budget = d[-1].sfo
    rows.append((primal_at_budget(d, budget), primal_at_budget(g, budget),
                 primal_at_budget(d, COMM, "comm"), primal_at_budget(g, COMM, "comm")))
    print(f"seed {seed}: DREAM spent {budget} SFO; baseline spent {g[-1].sfo}")

rows = np.array(rows)
print("median primal at equal SFO   DREAM %.6e  GT-GDA %.6e" % tuple(np.median(rows[:, :2], 0)))
print("median primal at equal comm  DREAM %.6e  GT-GDA %.6e" % tuple(np.median(rows[:, 2:], 0)))

# %% [markdown]
# The objective is small (about log 2 / N at x = 0) because the sample
# weights live on the simplex.  At equal communication the gap is modest:
# with one round per step both methods do the same number of steps, and the
# difference comes from FastMix averaging faster than one plain round.
# With more rounds per step (K = 2) DREAM falls behind on this budget, since
# progress here is limited by the step size, not by disagreement:

# %%
d2 = run("dream", 0, K=2, K_prime=2, K0=2)
g0 = run("gt-gda", 0)
print("K=2 at equal comm: DREAM %.6e  GT-GDA %.6e" % (
    primal_at_budget(d2, COMM, "comm"), primal_at_budget(g0, COMM, "comm")))

# %% [markdown]
# Tuned on its own, the baseline can use a larger step than DREAM's small
# batches tolerate (eta = 1.9 against 1.0).  It then reaches a lower primal
# value than DREAM at equal communication (about 5.79e-4 against 5.92e-4 on
# seed 0), while still spending several times the SFO calls.  The equal-comm
# advantage above holds for shared step sizes only.

# %%
g_fast = run("gt-gda", 0, eta=1.9)
print("GT-GDA eta=1.9 at equal comm: %.6e" % primal_at_budget(g_fast, COMM, "comm"))
