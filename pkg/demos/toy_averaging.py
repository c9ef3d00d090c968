# %% [markdown]
# # Two particles, two possible futures
#
# Two particles move on a line with velocities in {-1, +1}.  Every particle
# carries a clock of rate `lam`; when it rings the particle flips with
# probability 1/2, unless the two already agree, in which case nothing ever
# changes again.  For large `lam` the velocities settle almost instantly, so
# the slow positions follow one of two straight lines: both particles moving
# right, or both moving left.  Which one is decided once, at random.

# %%
import numpy as np

from slowfast import build_toy, simulate_averaged, simulate_coupled
from slowfast.markov import absorption_probabilities, decompose

model = build_toy(2, lam=200.0)
x0, v0 = np.array([0.5, 0.0]), (1, -1)

P = model.family.evaluate(x0)
d = decompose(P)
print("closed classes:", [[model.state_space.format(s) for s in c] for c in d.ergodic_classes])
print("transient:", [model.state_space.format(s) for s in d.transient_set])

# %% [markdown]
# Starting from the mixed state `+-`, each consensus is equally likely.

# %%
q = absorption_probabilities(P, d).probabilities[model.state_space.index(v0)]
print("absorption law from +-:", q)

# %% [markdown]
# A handful of coupled paths against the limiting random ODE.  The coupled
# path wanders only during the short transient, after which it runs parallel
# to one of the two limiting lines.

# %%
t_end = 1.0
for r in range(5):
    tr = simulate_coupled(model, x0, v0, t_end, seed=7, report_dt=0.25, replica=r)
    lim = simulate_averaged(model, x0, v0, t_end, seed=7, report_dt=0.25, replica=r)
    final = model.state_space.format(tr.fast_states[-1])
    print(f"replica {r}: X_1 = {tr.slow_states[-1].round(3)}  (fast state {final}, "
          f"{tr.jumped.sum()} jumps);  limit draw zeta={lim.zeta + 1} ends at {lim.path[-1]}")

# %% [markdown]
# The limit draw uses its own uniform, so it does not pick the same branch as
# the coupled path in a given replica; only the laws agree.  Counting branches
# over many coupled paths recovers the 50/50 split.

# %%
from slowfast.simulate import coupled_batch

batch = coupled_batch(model, x0, v0, t_end, seed=1, replicas=np.arange(20_000, dtype=np.uint64))
right = np.mean(batch.x[:, 0] > x0[0])
print(f"fraction drifting right: {right:.4f}  (limit {q[0]:.4f})")
