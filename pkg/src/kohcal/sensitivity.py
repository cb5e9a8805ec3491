"""First- and total-order Sobol indices from a Halton quasi-Monte Carlo design."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .priors import Gamma, Normal, PriorDistribution, Uniform

__all__ = [
    "PRIMES",
    "SensitivityError",
    "halton_sequence",
    "SobolResult",
    "sobol_indices",
    "prior_bounds",
]

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97)
DEFAULT_SKIP = 20


class SensitivityError(ValueError):
    pass


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(indices.shape, dtype=float)
    k = indices.astype(np.int64).copy()
    scale = 1.0 / base
    while np.any(k > 0):
        out += (k % base) * scale
        k //= base
        scale /= base
    return out


def halton_sequence(dim: int, n: int, skip: int = DEFAULT_SKIP) -> np.ndarray:
    """``(n, dim)`` Halton points; entry ``(i, d)`` is the radical inverse of ``i + skip + 1`` in base ``PRIMES[d]``."""
    if dim > len(PRIMES):
        raise SensitivityError(f"Halton sequence supports at most {len(PRIMES)} dimensions, got {dim}")
    if dim < 0 or n < 0 or skip < 0:
        raise SensitivityError("dim, n and skip must be non-negative")
    idx = np.arange(n, dtype=np.int64) + skip + 1
    return np.column_stack([_radical_inverse(idx, b) for b in PRIMES[:dim]]) if dim else np.zeros((n, 0))


@dataclass(frozen=True)
class SobolResult:
    first_order: np.ndarray
    total_order: np.ndarray
    variance: float
    n_base: int
    n_evaluations: int
    labels: tuple = ()

    def ranking(self) -> list[int]:
        """Parameter indices ordered by decreasing first-order index (stable)."""
        return [int(i) for i in np.argsort(-self.first_order, kind="stable")]


def _evaluate(model, Q, what):
    try:
        y = np.asarray(model(Q), dtype=float).reshape(-1)
    except Exception as exc:  # noqa: BLE001 - surfaced with context
        raise SensitivityError(f"model evaluation failed on the {what} design: {exc}") from exc
    if y.shape[0] != Q.shape[0]:
        raise SensitivityError(f"model returned {y.shape[0]} values for {Q.shape[0]} rows of the {what} design")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise SensitivityError(f"model evaluation failed at row {int(bad[0])} of the {what} design (non-finite output)")
    return y


def sobol_indices(model, bounds, n_base: int = 2**14, skip: int = DEFAULT_SKIP, labels=()) -> SobolResult:
    """Sobol indices of a scalar ``model`` mapping an ``(n, p)`` batch to ``n`` outputs.

    ``A`` and ``B`` are the first and second ``p`` columns of a ``2p``
    dimensional Halton design mapped into ``bounds``.  ``AB_i`` is ``A``
    with column ``i`` taken from ``B``.  First order uses
    ``mean(f_B (f_ABi - f_A)) / V`` and total order the Jansen form
    ``mean((f_A - f_ABi)^2) / (2 V)``, with ``V`` the variance of the pooled
    ``f_A`` and ``f_B`` values.  Costs ``n_base * (p + 2)`` evaluations.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    p = bounds.shape[0]
    if p < 1:
        raise SensitivityError("need at least one parameter")
    if n_base < 64:
        raise SensitivityError(f"n_base must be >= 64, got {n_base}")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if not np.all(np.isfinite(bounds)) or np.any(lo >= hi):
        raise SensitivityError(f"invalid bounds {bounds.tolist()}")
    H = halton_sequence(2 * p, n_base, skip)
    A = lo + H[:, :p] * (hi - lo)
    B = lo + H[:, p:] * (hi - lo)
    fA = _evaluate(model, A, "A")
    fB = _evaluate(model, B, "B")
    V = float(np.var(np.concatenate([fA, fB])))
    if not V > 0.0:
        raise SensitivityError("model output is constant over the design; Sobol indices are undefined")
    s1 = np.empty(p)
    st = np.empty(p)
    for i in range(p):
        ABi = A.copy()
        ABi[:, i] = B[:, i]
        fABi = _evaluate(model, ABi, f"AB{i}")
        s1[i] = np.mean(fB * (fABi - fA)) / V
        st[i] = 0.5 * np.mean((fA - fABi) ** 2) / V
    return SobolResult(s1, st, V, n_base, n_base * (p + 2), tuple(labels))


def prior_bounds(priors, mass: float = 0.99) -> list[tuple[float, float]]:
    """Box from prior supports; unbounded priors use their central ``mass`` interval."""
    out = []
    for pr in priors:
        if isinstance(pr, Uniform):
            out.append((float(pr.a), float(pr.b)))
        elif isinstance(pr, (Normal, Gamma, PriorDistribution)):
            lo, hi = pr.central_interval(mass)
            out.append((float(lo), float(hi)))
        else:
            raise SensitivityError(f"unsupported prior {pr!r}")
    return out
