# %% [markdown]
# # Gaussian-process prediction from a calibrated discrepancy
#
# A straight-line model misses a sinusoidal wiggle.  With the slope and the
# discrepancy hyperparameters fixed, the GP interpolates the residuals
# exactly at noise-free training points and reverts to the prior far away.

# %%
import numpy as np

from kohcal import CalibrationProblem, CalibrationType, ExperimentSet, build_predictor, expression_model, predict
from kohcal.priors import Uniform

model = expression_model(["p0 * x0"], 1, 1, labels=["slope"], priors=[Uniform(0, 3)])
x = np.linspace(0, 1, 6)
y = 1.1 * x + 0.2 * np.sin(6 * x)
problem = CalibrationProblem(model, ExperimentSet(x, y[:, None]), CalibrationType("C", False), sigma=0.0)

# Theta = (slope, beta_d, lambda_d)
predictor = build_predictor(problem, [1.1, 0.3, 0.05])

# %%
query = np.array([0.0, 0.1, 0.2, 0.5, 1.0, 3.0])[:, None]
mean, cov = predict(predictor, query)
for q, m, v in zip(query[:, 0], mean, np.diag(cov)):
    print(f"x={q:4.1f}  delta {m:+.5f}  sd {np.sqrt(max(v, 0.0)):.5f}")
