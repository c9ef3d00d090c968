# %% [markdown]
# # How fast does the coupled system approach its limit?
#
# The weak error `E f(X_t) - E f(Xbar_t)` is estimated over a range of clock
# rates.  A log-log fit of the error against `lam` should have slope near -1.
#
# Each replica also runs the fast chain frozen at `x0` on the same uniforms.
# Its eventual class `c` has exactly the limiting class law, so subtracting
# `f(y_c(t))` per replica leaves the mean unchanged and removes most of the
# branch noise.

# %%
import warnings

import numpy as np

from slowfast import build_coupled_navigation, build_toy
from slowfast.errors import MCErrorDominates
from slowfast.harness import tanh_coordinate, weak_error_experiment

f = tanh_coordinate(0)
grid = [10.0, 100.0, 1000.0]

for model in (build_toy(2, 1.0), build_coupled_navigation(2, 1.0, 2.0)):
    with warnings.catch_warnings():
        warnings.simplefilter("always", MCErrorDominates)
        r = weak_error_experiment(model, [0.5, 0.0], (1, -1), 1.0, f, grid, M=20_000, seed=3)
    print(f"\n{model.name}: E f(Xbar_t) = {r.averaged_value:.6f}, class law {r.class_probabilities.round(4)}")
    for lam, e, c in zip(r.lambda_grid, r.errors, r.ci_half_width):
        print(f"  lam={lam:>7g}  |error|={e:.3e}  +/- {c:.1e}")
    print(f"  fitted slope {r.fitted_slope:.3f}")

# %% [markdown]
# Without the control variate the same sample size cannot resolve the error
# at large `lam`: the half-width is set by the spread between the two branches.

# %%
with warnings.catch_warnings():
    warnings.simplefilter("ignore", MCErrorDominates)
    plain = weak_error_experiment(build_toy(2, 1.0), [0.5, 0.0], (1, -1), 1.0, f, grid, M=20_000,
                                  seed=3, control_variate=False)
print("plain estimator half-widths:", plain.ci_half_width.round(4), " dominated:", plain.dominated)
