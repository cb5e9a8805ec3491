# %% [markdown]
# # Two-output traction test with surrogate and discrepancy (type D)
#
# A bar under nondimensional force `F` reports elongation and squeezed area.
# Both outputs are stacked into one task-indexed GP whose covariance is zero
# between tasks.

# %%
import numpy as np

from kohcal import CalibrationProblem, ExperimentSet, SamplerConfig, builtin_model, diagnose
from kohcal import generate_synthetic, initialize_walkers, predict_outputs, run_ensemble

rng = np.random.default_rng(2026)
model = builtin_model("traction")
F = np.linspace(0, 0.5, 10)
Y = model(F[:, None], np.array([[1.0, 0.25]])) + rng.normal(0, 0.01, (10, 2))
synthetic = generate_synthetic(model, [(0, 0.5)], [(0.8, 1.6), (0, 0.5)], 50, rng)
problem = CalibrationProblem(model, ExperimentSet(F, Y), "D", synthetic=synthetic)

# %%
config = SamplerConfig(nsteps=3000, seed=0)
init = initialize_walkers(problem, config, np.random.default_rng([0, 2]))
chain = run_ensemble(problem.log_posterior_batch, init, config, vectorize=True, labels=problem.labels)
for row in diagnose(chain).summary:
    print(f"{row.parameter:9s} mean {row.mean:7.4f} CI [{row.ci_lo:.4f}, {row.ci_hi:.4f}]")

# %% [markdown]
# Predicted outputs at the MAP sample, with the observation noise included.

# %%
query = np.array([[0.05], [0.25], [0.45]])
mean, var = predict_outputs(problem, chain.map_point(), query, observation=True)
for f, m, v in zip(query[:, 0], mean, var):
    print(f"F={f:.2f}  elongation {m[0]:.4f} +/- {2 * np.sqrt(v[0]):.4f}   area {m[1]:.4f} +/- {2 * np.sqrt(v[1]):.4f}")
