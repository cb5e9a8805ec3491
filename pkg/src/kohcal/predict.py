"""Gaussian-process prediction at new inputs for calibrated problems.

The training covariance ``Sigma_DD`` carries the measurement noise on the
experimental diagonal only; the cross block ``Sigma_DP`` and the prediction
block ``Sigma_PP`` are noise free, so predictions describe the latent process.
Mean and covariance follow from two triangular solves against the cached
Cholesky factor of ``Sigma_DD``.

What is predicted depends on the calibration type and ``component``:

==========  ===================  ===========================================
type        default component    other components
==========  ===================  ===========================================
B           ``surrogate``        (none)
C           ``discrepancy``      (none)
D           ``process``          ``surrogate``, ``discrepancy``
==========  ===================  ===========================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .calibration import (
    CalibrationProblem,
    assemble_covariance_B,
    assemble_covariance_C,
    assemble_covariance_D,
)
from .kernels import jittered_cholesky, unit_kernel_sq
from .models import evaluate_model

__all__ = [
    "GPPredictor",
    "build_predictor",
    "predict",
    "predict_discrepancy",
    "predict_outputs",
    "model_prediction_errors",
]

Z95 = 1.959963984540054


@dataclass
class GPPredictor:
    """A zero-mean GP conditioned on training data.

    ``cross(X, tasks)`` returns ``Sigma_DP`` (n_train x P) and
    ``prior(X, tasks)`` returns ``Sigma_PP`` (P x P).
    """

    sigma_dd: np.ndarray
    y: np.ndarray
    cross: Callable
    prior: Callable
    xdim: int
    n_tasks: int = 1
    component: str = "process"

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.sigma_dd.shape != (self.y.size, self.y.size):
            raise ValueError("training covariance and targets disagree in size")
        self.factor, self.jitter = jittered_cholesky(self.sigma_dd)
        self._alpha = solve_triangular(self.factor, self.y, lower=True, check_finite=False)

    @property
    def n_train(self) -> int:
        return self.y.size


def _query(points, xdim, tasks, n_tasks):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, xdim) if xdim else X.reshape(-1, 0)
    if X.shape[1] != xdim:
        raise ValueError(f"query points have {X.shape[1]} columns, training inputs have {xdim}")
    if tasks is None:
        if n_tasks > 1:
            raise ValueError("multi-output predictor needs a task index per query point")
        tasks = np.zeros(X.shape[0], dtype=int)
    tasks = np.asarray(tasks, dtype=int).ravel()
    if tasks.shape[0] != X.shape[0] or np.any((tasks < 0) | (tasks >= n_tasks)):
        raise ValueError("invalid task indices for query points")
    return X, tasks


def predict(predictor: GPPredictor, points, tasks=None):
    """Posterior mean ``(P,)`` and covariance ``(P, P)`` at the query inputs."""
    X, tasks = _query(points, predictor.xdim, tasks, predictor.n_tasks)
    k_dp = predictor.cross(X, tasks)
    k_pp = predictor.prior(X, tasks)
    v = solve_triangular(predictor.factor, k_dp, lower=True, check_finite=False)
    mean = v.T @ predictor._alpha
    cov = k_pp - v.T @ v
    cov = 0.5 * (cov + cov.T)
    return mean, cov


# ---------------------------------------------------------------- construction


def _sq(a, b):
    d = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def _same(ta, tb):
    return (np.asarray(ta)[:, None] == np.asarray(tb)[None, :]).astype(float)


def build_predictor(problem: CalibrationProblem, Theta, component: str | None = None) -> GPPredictor:
    """Condition the type's GP on the training data at one full parameter vector."""
    tag = problem.tag
    if tag == "A":
        raise ValueError("type A calibration has no Gaussian process to predict with")
    parts = problem.split(np.asarray(Theta, dtype=float))
    theta = parts["theta"]
    sigma = float(parts["sigma"])
    default = {"B": "surrogate", "C": "discrepancy", "D": "process"}[tag]
    component = component or default
    allowed = {"B": ("surrogate",), "C": ("discrepancy",), "D": ("process", "surrogate", "discrepancy")}[tag]
    if component not in allowed:
        raise ValueError(f"type {tag} cannot predict component {component!r}; choose from {allowed}")
    fam_s, fam_d = problem.surrogate_family, problem.discrepancy_family
    ne = problem.n_exp

    if problem.ctype.discrepancy:
        beta_d, lam_d = (float(v) for v in parts["psi"])

        def k_disc(xa, ta, xb, tb):
            return lam_d * unit_kernel_sq(fam_d, _sq(xa, xb) / beta_d**2) * _same(ta, tb)

    if problem.ctype.surrogate:
        beta_x, beta_t, lam_x = (float(v) for v in parts["chi"])
        t_train = np.vstack([np.repeat(theta[None, :], ne, axis=0), problem.t_syn])
        x_train = np.vstack([problem.x_exp, problem.x_syn])
        task_train = np.concatenate([problem.task_exp, problem.task_syn])

        def k_surr_cross(Xq, tq):
            r2 = _sq(x_train, Xq) / beta_x**2 + _sq(t_train, np.repeat(theta[None, :], Xq.shape[0], axis=0)) / beta_t**2
            return lam_x * unit_kernel_sq(fam_s, r2) * _same(task_train, tq)

        def k_surr_prior(Xq, tq):
            return lam_x * unit_kernel_sq(fam_s, _sq(Xq, Xq) / beta_x**2) * _same(tq, tq)

    if tag == "C":
        resid = problem.y_exp - problem.model_outputs(theta)[0]
        sigma_dd = assemble_covariance_C(problem, parts["psi"], sigma)
        cross = lambda Xq, tq: k_disc(problem.x_exp, problem.task_exp, Xq, tq)
        prior = lambda Xq, tq: k_disc(Xq, tq, Xq, tq)
        return GPPredictor(sigma_dd, resid, cross, prior, problem.model.xdim, problem.n_tasks, component)

    if tag == "B":
        sigma_dd = assemble_covariance_B(problem, theta, parts["chi"], sigma)
        return GPPredictor(sigma_dd, problem.y_all, k_surr_cross, k_surr_prior, problem.model.xdim, problem.n_tasks, component)

    sigma_dd = assemble_covariance_D(problem, theta, parts["chi"], parts["psi"], sigma)
    ns = problem.n_syn

    def disc_cross(Xq, tq):
        out = np.zeros((ne + ns, Xq.shape[0]))
        out[:ne] = k_disc(problem.x_exp, problem.task_exp, Xq, tq)
        return out

    if component == "surrogate":
        cross, prior = k_surr_cross, k_surr_prior
    elif component == "discrepancy":
        cross, prior = disc_cross, (lambda Xq, tq: k_disc(Xq, tq, Xq, tq))
    else:
        cross = lambda Xq, tq: k_surr_cross(Xq, tq) + disc_cross(Xq, tq)
        prior = lambda Xq, tq: k_surr_prior(Xq, tq) + k_disc(Xq, tq, Xq, tq)
    return GPPredictor(sigma_dd, problem.y_all, cross, prior, problem.model.xdim, problem.n_tasks, component)


# ---------------------------------------------------------------- helpers


def _per_task(problem, X, fn):
    """Run ``fn(X, tasks)`` once per task; returns (P, ydim) means and variances."""
    P = X.shape[0]
    means = np.empty((P, problem.n_tasks))
    var = np.empty((P, problem.n_tasks))
    for i in range(problem.n_tasks):
        m, v = fn(X, np.full(P, i))
        means[:, i] = m
        var[:, i] = v
    return means, var


def _gp_marginals(predictor, X, tasks):
    mean, cov = predict(predictor, X, tasks)
    return mean, np.clip(np.diag(cov), 0.0, None)


def predict_discrepancy(problem: CalibrationProblem, chain, grid):
    """Discrepancy mean and 95% band at ``grid`` using the chain's MAP sample.

    Returns ``(mean, lo, hi)``, each of shape ``(P, ydim)``.
    """
    if problem.tag not in ("C", "D"):
        raise ValueError("discrepancy prediction needs a type C or D problem")
    Theta = chain.map_point() if hasattr(chain, "map_point") else np.asarray(chain, dtype=float)
    pred = build_predictor(problem, Theta, component="discrepancy")
    X, _ = _query(grid, problem.model.xdim, None, 1)
    mean, var = _per_task(problem, X, lambda Xq, tq: _gp_marginals(pred, Xq, tq))
    half = Z95 * np.sqrt(var)
    return mean, mean - half, mean + half


def predict_outputs(problem: CalibrationProblem, Theta, X, observation: bool = False):
    """Predicted outputs at inputs ``X`` for one full parameter vector.

    Returns ``(mean, variance)`` of shape ``(P, ydim)``.  Type A uses the model
    itself (zero latent variance); C adds the discrepancy GP to the model; B
    and D use the joint GP.  ``observation=True`` adds the noise variance.
    """
    Theta = np.asarray(Theta, dtype=float)
    parts = problem.split(Theta)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, problem.model.xdim) if problem.model.xdim else X.reshape(-1, 0)
    tag = problem.tag
    if tag in ("A", "C"):
        base = evaluate_model(problem.model, X, parts["theta"])
        if tag == "A":
            mean, var = base, np.zeros_like(base)
        else:
            pred = build_predictor(problem, Theta)
            dmean, var = _per_task(problem, X, lambda Xq, tq: _gp_marginals(pred, Xq, tq))
            mean = base + dmean
    else:
        pred = build_predictor(problem, Theta)
        mean, var = _per_task(problem, X, lambda Xq, tq: _gp_marginals(pred, Xq, tq))
    if observation:
        var = var + float(parts["sigma"]) ** 2
    return mean, var


def model_prediction_errors(problem: CalibrationProblem, Theta) -> np.ndarray:
    """Absolute errors ``|y - prediction|`` at every experimental output, ``(N, ydim)``.

    The prediction is the model at ``Theta``'s parameters, plus the
    discrepancy posterior mean for types C and D.
    """
    Theta = np.asarray(Theta, dtype=float)
    X = problem.experiments.inputs
    if Theta.size == problem.model.pdim and problem.tag == "A":
        theta = Theta
    else:
        theta = problem.split(Theta)["theta"]
    pred = evaluate_model(problem.model, X, theta)
    if problem.tag in ("C", "D"):
        gp = build_predictor(problem, Theta, component="discrepancy")
        dmean, _ = _per_task(problem, X, lambda Xq, tq: _gp_marginals(gp, Xq, tq))
        pred = pred + dmean
    return np.abs(problem.experiments.outputs - pred)
