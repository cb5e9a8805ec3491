# %% [markdown]
# # Variance-based sensitivity of the Ishigami function
#
# First-order and total Sobol indices from a quasi-random Halton design,
# compared with the closed-form decomposition.

# %%
import math

import numpy as np

from kohcal import builtin_model, evaluate_model, prior_bounds, sobol_indices

model = builtin_model("ishigami")


def f(Q):
    return evaluate_model(model, np.zeros((len(Q), 0)), Q)[:, 0]


result = sobol_indices(f, prior_bounds(model.priors), n_base=2**14, labels=model.labels)

# %%
a, b, pi = 7.0, 0.1, math.pi
v1 = 0.5 * (1 + b * pi**4 / 5) ** 2
v2 = a**2 / 8
v13 = b**2 * pi**8 * (1 / 18 - 1 / 50)
total = v1 + v2 + v13
exact_first = [v1 / total, v2 / total, 0.0]
exact_total = [(v1 + v13) / total, v2 / total, v13 / total]
for lab, s1, st, e1, et in zip(model.labels, result.first_order, result.total_order, exact_first, exact_total):
    print(f"{lab}: S1 {s1:.4f} (exact {e1:.4f})   ST {st:.4f} (exact {et:.4f})")
print("ranking:", " > ".join(model.labels[i] for i in result.ranking()))
