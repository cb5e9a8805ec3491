"""Likelihoods and log-posteriors for the four calibration types.

=====  ===========  =========  ============================================
type   discrepancy  surrogate  likelihood
=====  ===========  =========  ============================================
A      no           no         iid Gaussian residuals ``y - m(x; theta)``
B      no           yes        joint GP over experimental + synthetic data
C      yes          no         GP on residuals ``y - m(x; theta)``
D      yes          yes        joint GP, discrepancy on the experimental block
=====  ===========  =========  ============================================

The full parameter vector ``Theta`` is laid out as::

    theta (pdim) | beta_x, beta_t, lambda_x (B, D) | beta_d, lambda_d (C, D) | sigma (if inferred)

Every log-posterior routine accepts either one vector ``(dim,)`` or a batch
``(w, dim)``; the batch path is what the ensemble sampler calls.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .data import ExperimentSet, SyntheticSet, augment_multioutput
from .kernels import KernelFamily, NonPSDError, batched_cholesky, jittered_cholesky, unit_kernel_sq
from .models import ModelSpec, evaluate_unchecked
from .priors import Gamma, PriorDistribution

log = logging.getLogger(__name__)

__all__ = [
    "CalibrationType",
    "CalibrationProblem",
    "DEFAULT_HYPERPRIOR",
    "log_likelihood_A",
    "log_likelihood_gp",
    "assemble_covariance_B",
    "assemble_covariance_C",
    "assemble_covariance_D",
    "log_posterior",
]

_LOG_2PI = math.log(2.0 * math.pi)

DEFAULT_HYPERPRIOR = Gamma(2.0, 2.0)

SURROGATE_HYPER = ("beta_x", "beta_t", "lambda_x")
DISCREPANCY_HYPER = ("beta_d", "lambda_d")


@dataclass(frozen=True)
class CalibrationType:
    tag: str
    infer_sigma: bool = True

    def __post_init__(self):
        tag = str(self.tag).upper()
        if tag not in ("A", "B", "C", "D"):
            raise ValueError(f"calibration type must be one of A, B, C, D; got {self.tag!r}")
        object.__setattr__(self, "tag", tag)

    @property
    def surrogate(self) -> bool:
        return self.tag in ("B", "D")

    @property
    def discrepancy(self) -> bool:
        return self.tag in ("C", "D")


@dataclass
class CalibrationProblem:
    """Model, data, priors and calibration type.

    ``sigma`` is either a fixed noise standard deviation or a prior, in which
    case it is calibrated as the last entry of ``Theta``.  Missing kernel
    hyperpriors default to Gamma(shape=2, rate=2).  Kernel families default to
    squared exponential for single-output models and Matern 3/2 for
    multi-output ones.
    """

    model: ModelSpec
    experiments: ExperimentSet
    ctype: CalibrationType | str = "A"
    synthetic: SyntheticSet | None = None
    sigma: float | PriorDistribution = field(default_factory=lambda: DEFAULT_HYPERPRIOR)
    surrogate_family: KernelFamily | str | None = None
    discrepancy_family: KernelFamily | str | None = None
    surrogate_priors: dict = field(default_factory=dict)
    discrepancy_priors: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.ctype, str):
            self.ctype = CalibrationType(self.ctype, isinstance(self.sigma, PriorDistribution))
        elif self.ctype.infer_sigma != isinstance(self.sigma, PriorDistribution):
            raise ValueError("infer_sigma requires sigma to be a prior; a fixed sigma requires infer_sigma=False")
        m, e = self.model, self.experiments
        if any(p is None for p in m.priors):
            raise ValueError("every model parameter needs a prior")
        if e.xdim != m.xdim or e.ydim != m.ydim:
            raise ValueError(
                f"experiments have {e.xdim} inputs/{e.ydim} outputs, model expects {m.xdim}/{m.ydim}"
            )
        if not self.infer_sigma:
            self.sigma = float(self.sigma)
            if not self.sigma >= 0 or not math.isfinite(self.sigma):
                raise ValueError(f"fixed sigma must be finite and >= 0, got {self.sigma}")
        if self.ctype.surrogate:
            s = self.synthetic
            if s is None or len(s) == 0:
                raise ValueError(f"type {self.ctype.tag} calibration needs synthetic data (M >= 1)")
            if s.inputs.shape[1] != m.xdim or s.params.shape[1] != m.pdim or s.outputs.shape[1] != m.ydim:
                raise ValueError("synthetic data columns do not match the model dimensions")
        multi = m.ydim > 1
        default = KernelFamily.MATERN32 if multi else KernelFamily.SQUARED_EXPONENTIAL
        self.surrogate_family = KernelFamily.parse(self.surrogate_family or default)
        self.discrepancy_family = KernelFamily.parse(self.discrepancy_family or default)
        for name in self.surrogate_priors:
            if name not in SURROGATE_HYPER:
                raise ValueError(f"unknown surrogate hyperparameter {name!r}")
        for name in self.discrepancy_priors:
            if name not in DISCREPANCY_HYPER:
                raise ValueError(f"unknown discrepancy hyperparameter {name!r}")
        self._precompute()

    # ------------------------------------------------------------ layout

    @property
    def infer_sigma(self) -> bool:
        return self.ctype.infer_sigma

    @property
    def tag(self) -> str:
        return self.ctype.tag

    @property
    def labels(self) -> list[str]:
        out = list(self.model.labels)
        if self.ctype.surrogate:
            out += list(SURROGATE_HYPER)
        if self.ctype.discrepancy:
            out += list(DISCREPANCY_HYPER)
        if self.infer_sigma:
            out.append("sigma")
        return out

    @property
    def priors(self) -> list[PriorDistribution]:
        out = list(self.model.priors)
        if self.ctype.surrogate:
            out += [self.surrogate_priors.get(k, DEFAULT_HYPERPRIOR) for k in SURROGATE_HYPER]
        if self.ctype.discrepancy:
            out += [self.discrepancy_priors.get(k, DEFAULT_HYPERPRIOR) for k in DISCREPANCY_HYPER]
        if self.infer_sigma:
            out.append(self.sigma)
        return out

    @property
    def dim(self) -> int:
        return len(self.labels)

    def split(self, Theta) -> dict:
        """Named views into a (batch of) full parameter vector(s)."""
        Theta = np.asarray(Theta, dtype=float)
        if Theta.shape[-1] != self.dim:
            raise ValueError(f"Theta has length {Theta.shape[-1]}, layout {self.labels} needs {self.dim}")
        p = self.model.pdim
        out = {"theta": Theta[..., :p]}
        k = p
        if self.ctype.surrogate:
            out["chi"] = Theta[..., k : k + 3]
            k += 3
        if self.ctype.discrepancy:
            out["psi"] = Theta[..., k : k + 2]
            k += 2
        if self.infer_sigma:
            out["sigma"] = Theta[..., k]
        else:
            out["sigma"] = np.full(Theta.shape[:-1], self.sigma)
        return out

    # ------------------------------------------------------------ data prep

    def _precompute(self):
        m, e = self.model, self.experiments
        self.n_tasks = m.ydim
        if m.ydim > 1:
            ae = augment_multioutput(e.inputs, e.outputs)
            self.x_exp, self.task_exp, self.y_exp = ae.inputs, ae.tasks, ae.outputs
        else:
            self.x_exp, self.task_exp, self.y_exp = e.inputs, np.zeros(len(e), dtype=int), e.outputs[:, 0].copy()
        self.n_exp = self.y_exp.shape[0]
        if self.ctype.surrogate:
            s = self.synthetic
            if m.ydim > 1:
                asyn = augment_multioutput(s.inputs, s.outputs)
                self.x_syn, self.task_syn, self.y_syn = asyn.inputs, asyn.tasks, asyn.outputs
                self.t_syn = np.repeat(s.params, m.ydim, axis=0)
            else:
                self.x_syn, self.task_syn = s.inputs, np.zeros(len(s), dtype=int)
                self.y_syn, self.t_syn = s.outputs[:, 0].copy(), s.params
            self.n_syn = self.y_syn.shape[0]
            x_all = np.vstack([self.x_exp, self.x_syn])
            task_all = np.concatenate([self.task_exp, self.task_syn])
            self.y_all = np.concatenate([self.y_exp, self.y_syn])
        else:
            self.n_syn = 0
            x_all, task_all = self.x_exp, self.task_exp
            self.y_all = self.y_exp
        self._dx2 = _sqdist(x_all, x_all)
        self._same = (task_all[:, None] == task_all[None, :]).astype(float)
        if self.ctype.surrogate:
            self._dt2_ss = _sqdist(self.t_syn, self.t_syn)

    # ------------------------------------------------------------ covariance

    def covariance_batch(self, theta, chi=None, psi=None, sigma=None) -> np.ndarray:
        """Stack of un-jittered covariance matrices, one per row of ``theta``.

        For types B/D the order is experimental rows then synthetic rows (both
        augmented for multi-output models); for type C only experimental rows.
        """
        theta = np.atleast_2d(theta)
        w = theta.shape[0]
        ne, ns = self.n_exp, self.n_syn
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (w,))
        if self.ctype.surrogate:
            chi = np.atleast_2d(chi)
            bx, bt, lam = chi[:, 0], chi[:, 1], chi[:, 2]
            n = ne + ns
            r2 = np.empty((w, n, n))
            r2[:] = self._dx2 / (bx * bx)[:, None, None]
            # parameter distance: zero inside the experimental block (same theta)
            dt_es = _sqdist_batch(theta, self.model.pdim, self.t_syn)  # (w, ns)
            inv_bt2 = 1.0 / (bt * bt)
            r2[:, :ne, ne:] += dt_es[:, None, :] * inv_bt2[:, None, None]
            r2[:, ne:, :ne] += dt_es[:, :, None] * inv_bt2[:, None, None]
            r2[:, ne:, ne:] += self._dt2_ss[None] * inv_bt2[:, None, None]
            K = lam[:, None, None] * unit_kernel_sq(self.surrogate_family, r2) * self._same
            if self.ctype.discrepancy:
                psi = np.atleast_2d(psi)
                bd, ld = psi[:, 0], psi[:, 1]
                Kd = ld[:, None, None] * unit_kernel_sq(
                    self.discrepancy_family, self._dx2[:ne, :ne] / (bd * bd)[:, None, None]
                )
                K[:, :ne, :ne] += Kd * self._same[:ne, :ne]
        else:
            psi = np.atleast_2d(psi)
            bd, ld = psi[:, 0], psi[:, 1]
            K = ld[:, None, None] * unit_kernel_sq(self.discrepancy_family, self._dx2 / (bd * bd)[:, None, None])
            K = K * self._same
        idx = np.arange(ne)
        K[:, idx, idx] += (sigma * sigma)[:, None]
        return K

    # ------------------------------------------------------------ likelihoods

    def model_outputs(self, theta) -> np.ndarray:
        """Model at the experimental inputs, ``(w, n_exp)`` in augmented order; nan where invalid."""
        theta = np.atleast_2d(theta)
        w = theta.shape[0]
        N = len(self.experiments)
        X = np.tile(self.experiments.inputs, (w, 1))
        P = np.repeat(theta, N, axis=0)
        out = evaluate_unchecked(self.model, X, P)  # (w*N, ydim)
        return out.reshape(w, N * self.model.ydim)

    def log_likelihood_batch(self, Theta) -> np.ndarray:
        Theta = np.atleast_2d(Theta)
        parts = self.split(Theta)
        theta, sigma = parts["theta"], parts["sigma"]
        tag = self.tag
        w = Theta.shape[0]
        if tag in ("A", "C"):
            pred = self.model_outputs(theta)
            resid = self.y_exp[None, :] - pred
            valid = np.all(np.isfinite(resid), axis=1)
            out = np.full(w, -np.inf)
            if not valid.any():
                return out
            if tag == "A":
                out[valid] = _gaussian_iid(resid[valid], sigma[valid])
            else:
                K = self.covariance_batch(theta[valid], psi=parts["psi"][valid], sigma=sigma[valid])
                out[valid] = _gp_loglike_batch(resid[valid], K)
            return out
        K = self.covariance_batch(theta, parts["chi"], parts.get("psi"), sigma)
        return _gp_loglike_batch(np.broadcast_to(self.y_all, (w, self.y_all.shape[0])), K)

    def log_prior_batch(self, Theta) -> np.ndarray:
        Theta = np.atleast_2d(Theta)
        lp = np.zeros(Theta.shape[0])
        for j, prior in enumerate(self.priors):
            lp = lp + prior.log_density(Theta[:, j])
        return lp

    def log_posterior_batch(self, Theta) -> np.ndarray:
        Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
        if Theta.shape[1] != self.dim:
            raise ValueError(f"Theta has length {Theta.shape[1]}, layout {self.labels} needs {self.dim}")
        lp = self.log_prior_batch(Theta)
        ok = np.isfinite(lp)
        if ok.any():
            with np.errstate(all="ignore"):
                ll = self.log_likelihood_batch(Theta[ok])
            lp[ok] = lp[ok] + ll
        lp[~np.isfinite(lp)] = -np.inf
        return lp

    def __call__(self, Theta):
        return log_posterior(self, Theta)


def _sqdist(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    d = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def _sqdist_batch(theta, pdim, t_syn):
    d = theta[:, None, :pdim] - t_syn[None, :, :]
    return np.einsum("wkp,wkp->wk", d, d)


def _gaussian_iid(resid, sigma):
    n = resid.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ss = np.einsum("wi,wi->w", resid, resid)
        out = -0.5 * n * _LOG_2PI - n * np.log(sigma) - ss / (2.0 * sigma * sigma)
    return np.where(sigma > 0, out, -np.inf)


def _gp_loglike_batch(y, K):
    w, n = y.shape
    L, ok = batched_cholesky(K)
    out = np.full(w, -np.inf)
    for k in np.flatnonzero(ok):
        alpha = solve_triangular(L[k], y[k], lower=True, check_finite=False)
        logdet = 2.0 * np.sum(np.log(np.diagonal(L[k])))
        out[k] = -0.5 * logdet - 0.5 * float(alpha @ alpha) - 0.5 * n * _LOG_2PI
    if not ok.all():
        log.debug("%d of %d covariance matrices rejected as non-PSD", int((~ok).sum()), w)
    return out


# ---------------------------------------------------------------- public API


def log_likelihood_A(problem: CalibrationProblem, theta, sigma: float) -> float:
    """Gaussian iid log-likelihood of the experiments; ``-inf`` on model failure or ``sigma <= 0``."""
    if not sigma > 0:
        return -math.inf
    pred = problem.model_outputs(np.asarray(theta, dtype=float))
    resid = problem.y_exp[None, :] - pred
    if not np.all(np.isfinite(resid)):
        return -math.inf
    return float(_gaussian_iid(resid, np.array([float(sigma)]))[0])


def log_likelihood_gp(y, Sigma) -> float:
    """Zero-mean multivariate normal log-density via a jittered Cholesky factor.

    Returns ``-inf`` (with a logged warning) when the covariance cannot be
    factored.
    """
    y = np.asarray(y, dtype=float).ravel()
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.shape != (y.size, y.size):
        raise ValueError(f"y has length {y.size} but Sigma is {Sigma.shape}")
    try:
        L, _ = jittered_cholesky(Sigma)
    except NonPSDError as exc:
        log.warning("log_likelihood_gp: %s; returning -inf", exc)
        return -math.inf
    alpha = solve_triangular(L, y, lower=True, check_finite=False)
    return float(-np.sum(np.log(np.diagonal(L))) - 0.5 * alpha @ alpha - 0.5 * y.size * _LOG_2PI)


def _require(problem, tag):
    if problem.tag not in tag:
        raise ValueError(f"operation needs a type {'/'.join(tag)} problem, got type {problem.tag}")


def assemble_covariance_B(problem: CalibrationProblem, theta, chi, sigma: float) -> np.ndarray:
    """``[[C11, C12], [C21, C22]]`` over experimental then synthetic rows (no jitter).

    ``chi = (beta_x, beta_t, lambda_x)``.
    """
    _require(problem, "B")
    return problem.covariance_batch(np.asarray(theta, dtype=float), np.asarray(chi, dtype=float), None, sigma)[0]


def assemble_covariance_C(problem: CalibrationProblem, psi, sigma: float) -> np.ndarray:
    """``c_delta(x_i, x_j) + sigma^2 delta_ij`` over experimental rows; ``psi = (beta_d, lambda_d)``."""
    _require(problem, "C")
    theta = np.zeros((1, problem.model.pdim))
    return problem.covariance_batch(theta, None, np.asarray(psi, dtype=float), sigma)[0]


def assemble_covariance_D(problem: CalibrationProblem, theta, chi, psi, sigma: float) -> np.ndarray:
    """Type-B blocks with the discrepancy kernel added to the experimental block."""
    _require(problem, "D")
    return problem.covariance_batch(
        np.asarray(theta, dtype=float), np.asarray(chi, dtype=float), np.asarray(psi, dtype=float), sigma
    )[0]


def log_posterior(problem: CalibrationProblem, Theta):
    """Unnormalised log-posterior: sum of prior log-densities plus the type's log-likelihood.

    Short-circuits to ``-inf`` (without evaluating the model) when any prior
    term is ``-inf``.  A 1-D ``Theta`` returns a float, a 2-D batch an array.
    """
    Theta = np.asarray(Theta, dtype=float)
    if Theta.ndim == 1:
        return float(problem.log_posterior_batch(Theta[None, :])[0])
    return problem.log_posterior_batch(Theta)
