# %% [markdown]
# # Closed classes with more than one state
#
# In the toy model every closed class is a single consensus state, so the
# averaged drift is just that state's velocity.  Here each consensus `+e` is
# paired with a "mirror" state `+e'` moving at half speed, and the chain keeps
# hopping between the two.  The limit then averages the two velocities with
# the class's stationary law.

# %%
import numpy as np

from slowfast import build_ergodic_class_variant
from slowfast.markov import class_laws, decompose
from slowfast.simulate import averaged_drift, averaged_expectation

for p in (0.2, 0.5, 0.8):
    model = build_ergodic_class_variant(2, lam=1.0, p=p)
    P = model.family.evaluate(np.zeros(2))
    d = decompose(P)
    laws = class_laws(P, d)
    drift = averaged_drift(model, 0, [0.0, 0.0])
    names = [model.state_space.format(s) for s in laws[0].states]
    print(f"p={p}: class 1 = {names}, weights {laws[0].weights.round(3)}, averaged drift {drift}")

# %% [markdown]
# With weights `(1 - p, p)` on speeds `1` and `1/2`, the class-1 drift is
# `1 - p/2` in each coordinate.  The expectation of an observable under the
# random limit sums over the two classes.

# %%
model = build_ergodic_class_variant(2, lam=1.0, p=0.5)
f = lambda x: np.tanh(x[:, 0])
E, q, branches = averaged_expectation(model, [0.5, 0.0], (1, -1), 1.0, f)
print("class law:", q, " branch values:", branches.round(6), " E f =", round(E, 6))
