"""Isotropic covariance kernels, surrogate/discrepancy covariances and Cholesky with jitter.

All kernels are functions of a scalar distance ``r``.  The surrogate kernel
acts on ``(x, t)`` pairs with separate lengthscales for inputs and parameters;
the per-block scaled squared distances are summed before the one-argument
kernel is applied, so ``beta_x == beta_t`` recovers the plain isotropic kernel.

Multi-output problems use a task-indexed kernel that is exactly zero between
different tasks.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "KernelFamily",
    "SurrogateKernel",
    "DiscrepancyKernel",
    "InvalidHyperparameterError",
    "NonPSDError",
    "kernel_value",
    "unit_kernel",
    "scaled_distance",
    "multitask_value",
    "covariance_matrix",
    "jittered_cholesky",
    "batched_cholesky",
    "JITTER_START",
    "JITTER_MAX",
]

SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)

# relative to the mean diagonal
JITTER_START = 1e-10
JITTER_MAX = 1e-4


class InvalidHyperparameterError(ValueError):
    pass


class NonPSDError(np.linalg.LinAlgError):
    """Cholesky failed even at the largest allowed jitter."""

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class KernelFamily(enum.Enum):
    SQUARED_EXPONENTIAL = "sqexp"
    MATERN32 = "matern32"
    MATERN52 = "matern52"
    EXPONENTIAL = "exponential"
    RATIONAL_QUADRATIC = "rq1"

    @classmethod
    def parse(cls, value) -> "KernelFamily":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(f.value for f in cls)
            raise ValueError(f"unknown kernel family {value!r}; expected one of {names}") from None


def unit_kernel(family: KernelFamily, r):
    """Kernel with unit signal variance evaluated at an already-scaled distance ``r``."""
    r = np.asarray(r, dtype=float)
    if family is KernelFamily.SQUARED_EXPONENTIAL:
        return np.exp(-0.5 * r * r)
    if family is KernelFamily.MATERN32:
        s = SQRT3 * r
        return (1.0 + s) * np.exp(-s)
    if family is KernelFamily.MATERN52:
        s = SQRT5 * r
        return (1.0 + s + s * s / 3.0) * np.exp(-s)
    if family is KernelFamily.EXPONENTIAL:
        return np.exp(-r)
    if family is KernelFamily.RATIONAL_QUADRATIC:
        return 1.0 / (1.0 + 0.5 * r * r)
    raise ValueError(f"unsupported kernel family {family!r}")


def unit_kernel_sq(family: KernelFamily, r2):
    """Same as :func:`unit_kernel` but takes the squared scaled distance."""
    if family is KernelFamily.SQUARED_EXPONENTIAL:
        return np.exp(-0.5 * r2)
    if family is KernelFamily.RATIONAL_QUADRATIC:
        return 1.0 / (1.0 + 0.5 * r2)
    return unit_kernel(family, np.sqrt(r2))


def _check_positive(**kw):
    for name, value in kw.items():
        if not (value > 0) or not math.isfinite(value):
            raise InvalidHyperparameterError(f"{name} must be positive and finite, got {value}")


def kernel_value(family, r, lam: float, beta: float):
    """Evaluate ``lam * k(r / beta)`` for the given family.

    ``k(0) == lam`` exactly for every family, and the kernel decays
    monotonically to zero.
    """
    family = KernelFamily.parse(family)
    _check_positive(lam=lam, beta=beta)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be non-negative")
    out = lam * unit_kernel(family, r / beta)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SurrogateKernel:
    """Covariance ``c_S`` of the model emulator over (input, parameter) pairs."""

    family: KernelFamily = KernelFamily.SQUARED_EXPONENTIAL
    lambda_x: float = 1.0
    beta_x: float = 1.0
    beta_t: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily.parse(self.family))
        _check_positive(lambda_x=self.lambda_x, beta_x=self.beta_x, beta_t=self.beta_t)

    @property
    def variance(self) -> float:
        return self.lambda_x

    def __call__(self, x, t, x2, t2) -> float:
        r = scaled_distance(x, t, x2, t2, self.beta_x, self.beta_t)
        return self.lambda_x * float(unit_kernel(self.family, r))


@dataclass(frozen=True)
class DiscrepancyKernel:
    """Covariance ``c_delta`` of the discrepancy process over inputs only."""

    family: KernelFamily = KernelFamily.SQUARED_EXPONENTIAL
    lambda_d: float = 1.0
    beta_d: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily.parse(self.family))
        _check_positive(lambda_d=self.lambda_d, beta_d=self.beta_d)

    @property
    def variance(self) -> float:
        return self.lambda_d

    def __call__(self, x, t, x2, t2) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        if x.shape != x2.shape:
            raise ValueError(f"input dimension mismatch: {x.shape} vs {x2.shape}")
        r = math.sqrt(float(np.sum((x - x2) ** 2))) / self.beta_d
        return self.lambda_d * float(unit_kernel(self.family, r))


def scaled_distance(x, t, x2, t2, beta_x: float, beta_t: float) -> float:
    """``sqrt(|x - x2|^2 / beta_x^2 + |t - t2|^2 / beta_t^2)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    if x.shape != x2.shape:
        raise ValueError(f"input dimension mismatch: {x.shape} vs {x2.shape}")
    if t.shape != t2.shape:
        raise ValueError(f"parameter dimension mismatch: {t.shape} vs {t2.shape}")
    _check_positive(beta_x=beta_x, beta_t=beta_t)
    dx2 = float(np.sum((x - x2) ** 2))
    dt2 = float(np.sum((t - t2) ** 2))
    return math.sqrt(dx2 / beta_x**2 + dt2 / beta_t**2)


def multitask_value(x_aug, x2_aug, kernel, n_tasks: int, t=(), t2=()) -> float:
    """Task-indexed kernel: the within-task kernel when tasks match, exactly 0 otherwise.

    ``x_aug`` and ``x2_aug`` are ``(input_vector, task_index)`` tuples.
    """
    x, i = x_aug
    x2, j = x2_aug
    for idx in (i, j):
        if int(idx) != idx or not 0 <= idx < n_tasks:
            raise ValueError(f"task index {idx} outside [0, {n_tasks})")
    if i != j:
        return 0.0
    return kernel(x, t, x2, t2)


def covariance_matrix(points, kernel, noise_variance: float = 0.0, noise_mask=None, tasks=None) -> np.ndarray:
    """Dense covariance over ``points`` (a list of ``(input, parameter)`` pairs).

    ``noise_variance`` is added to the diagonal entries flagged in
    ``noise_mask``.  With ``tasks`` given, entries between different tasks are
    exactly zero.  No jitter is added here; factor the result with
    :func:`jittered_cholesky`.
    """
    n = len(points)
    if n == 0:
        raise ValueError("covariance_matrix needs at least one point")
    if noise_variance < 0:
        raise ValueError("noise_variance must be >= 0")
    K = np.empty((n, n))
    for a in range(n):
        xa, ta = points[a]
        for b in range(a, n):
            xb, tb = points[b]
            if tasks is not None and tasks[a] != tasks[b]:
                v = 0.0
            else:
                v = kernel(xa, ta, xb, tb)
            K[a, b] = v
            K[b, a] = v
    if noise_mask is not None:
        mask = np.asarray(noise_mask, dtype=bool)
        K[np.diag_indices(n)] += np.where(mask, noise_variance, 0.0)
    return K


def jittered_cholesky(K: np.ndarray):
    """Lower Cholesky factor of ``K + jitter*I``.

    ``K`` itself is tried first.  On failure jitter starts at
    ``1e-10 * mean(diag K)`` and grows tenfold per failure up to
    ``1e-4 * mean(diag K)``.  Returns ``(L, jitter)``; raises
    :class:`NonPSDError` if every attempt fails.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    scale = float(np.mean(np.diag(K)))
    if not math.isfinite(scale) or scale <= 0:
        raise NonPSDError(f"covariance has non-positive mean diagonal {scale}", jitter=0.0)
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START * scale
    limit = JITTER_MAX * scale * (1.0 + 1e-9)
    idx = np.diag_indices(n)
    while jitter <= limit:
        Kj = K.copy()
        Kj[idx] += jitter
        try:
            return np.linalg.cholesky(Kj), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NonPSDError(
        f"covariance not positive definite after jitter {jitter / 10.0:.3g}", jitter=jitter / 10.0
    )


def batched_cholesky(K: np.ndarray):
    """Jittered Cholesky for a stack ``(w, n, n)``.

    Returns ``(L, ok)``; rows whose factorization failed at the maximum jitter
    have ``ok == False`` and an undefined factor.
    """
    w, n, _ = K.shape
    scale = np.einsum("wii->w", K) / n
    ok = np.isfinite(scale) & (scale > 0)
    try:
        if ok.all():
            return np.linalg.cholesky(K), ok
    except np.linalg.LinAlgError:
        pass
    L = np.zeros_like(K)
    for k in range(w):
        if not ok[k]:
            continue
        try:
            L[k], _ = jittered_cholesky(K[k])
        except NonPSDError as exc:
            log.debug("walker covariance rejected: %s", exc)
            ok[k] = False
    return L, ok
