"""Experimental and synthetic data sets, multi-output augmentation, Latin hypercube designs."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, evaluate_model

__all__ = [
    "DataError",
    "ExperimentSet",
    "SyntheticSet",
    "AugmentedSet",
    "augment_multioutput",
    "deaugment",
    "lhs_sample",
    "generate_synthetic",
    "load_data",
    "save_data",
]


class DataError(ValueError):
    pass


def _as_matrix(a, name, cols=None):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1) if cols in (None, 1) else a.reshape(1, -1)
    if a.ndim != 2:
        raise DataError(f"{name} must be a 2-D array, got shape {a.shape}")
    if cols is not None and a.shape[1] != cols:
        raise DataError(f"{name} has {a.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class ExperimentSet:
    inputs: np.ndarray  # (N, d)
    outputs: np.ndarray  # (N, ydim)

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        x = _as_matrix(x, "experiment inputs")
        y = _as_matrix(self.outputs, "experiment outputs")
        if x.shape[0] != y.shape[0]:
            raise DataError(f"experiment inputs have {x.shape[0]} rows but outputs have {y.shape[0]}")
        if x.shape[0] < 1:
            raise DataError("at least one experiment is required")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def xdim(self):
        return self.inputs.shape[1]

    @property
    def ydim(self):
        return self.outputs.shape[1]


@dataclass(frozen=True)
class SyntheticSet:
    inputs: np.ndarray  # (M, d)
    params: np.ndarray  # (M, p)
    outputs: np.ndarray  # (M, ydim)

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        x = _as_matrix(x, "synthetic inputs")
        t = np.asarray(self.params, dtype=float)
        if t.ndim == 1:
            t = t.reshape(-1, 1)
        t = _as_matrix(t, "synthetic parameters")
        y = _as_matrix(self.outputs, "synthetic outputs")
        if not (x.shape[0] == t.shape[0] == y.shape[0]):
            raise DataError(
                f"synthetic row counts differ: inputs {x.shape[0]}, params {t.shape[0]}, outputs {y.shape[0]}"
            )
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "params", t)
        object.__setattr__(self, "outputs", y)

    def __len__(self):
        return self.inputs.shape[0]


@dataclass(frozen=True)
class AugmentedSet:
    """Rows of ``(input, task index, scalar output)``."""

    inputs: np.ndarray  # (n*ntasks, d)
    tasks: np.ndarray  # (n*ntasks,) int
    outputs: np.ndarray  # (n*ntasks,)
    n_tasks: int

    def __len__(self):
        return self.outputs.shape[0]


def augment_multioutput(inputs, outputs) -> AugmentedSet:
    """Repeat every input once per output and stack the outputs into one column.

    Row ``k*ydim + i`` carries input row ``k``, task ``i`` and ``outputs[k, i]``.
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    y = np.asarray(outputs, dtype=float)
    if y.ndim != 2 or y.shape[1] < 2:
        raise DataError(f"augment_multioutput needs at least 2 output columns, got shape {y.shape}")
    n, ydim = y.shape
    if x.shape[0] != n:
        raise DataError(f"inputs have {x.shape[0]} rows but outputs have {n}")
    return AugmentedSet(
        inputs=np.repeat(x, ydim, axis=0),
        tasks=np.tile(np.arange(ydim), n),
        outputs=y.reshape(-1).copy(),
        n_tasks=ydim,
    )


def deaugment(aug: AugmentedSet) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`augment_multioutput`: ``(inputs, outputs)`` matrices."""
    k = aug.n_tasks
    return aug.inputs[::k].copy(), aug.outputs.reshape(-1, k).copy()


def lhs_sample(bounds, n: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube design of ``n`` points in the box ``bounds = [(lo, hi), ...]``.

    Each dimension has exactly one point in each of its ``n`` equal strata,
    placed uniformly at random inside the stratum; the stratum order is
    permuted independently per dimension.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if n < 1:
        raise ValueError("n must be >= 1")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if not np.all(np.isfinite(bounds)) or np.any(lo >= hi):
        raise ValueError(f"invalid bounds {bounds.tolist()}; need finite lo < hi")
    d = bounds.shape[0]
    u = rng.random((n, d))
    strata = np.column_stack([rng.permutation(n) for _ in range(d)]) if d else np.zeros((n, 0))
    unit = (strata + u) / n
    return lo + unit * (hi - lo)


def generate_synthetic(model: ModelSpec, x_bounds, t_bounds, M: int, rng: np.random.Generator) -> SyntheticSet:
    """Evaluate ``model`` on an LHS design over the joint (input, parameter) box."""
    if M < 1:
        raise ValueError("M must be >= 1")
    x_bounds = list(x_bounds)
    t_bounds = list(t_bounds)
    if len(x_bounds) != model.xdim or len(t_bounds) != model.pdim:
        raise ValueError(
            f"need {model.xdim} input bounds and {model.pdim} parameter bounds, "
            f"got {len(x_bounds)} and {len(t_bounds)}"
        )
    design = lhs_sample(x_bounds + t_bounds, M, rng)
    X, T = design[:, : model.xdim], design[:, model.xdim :]
    Y = evaluate_model(model, X, T)
    return SyntheticSet(X, T, Y)


def load_data(path, xdim: int, ydim: int = 1, pdim: int | None = None):
    """Read a whitespace-delimited data file.

    Experimental layout (``pdim`` is None): ``xdim`` input columns then
    ``ydim`` output columns.  Synthetic layout: ``xdim + pdim + ydim``
    columns.  Lines starting with ``#`` and blank lines are skipped.
    """
    ncol = xdim + ydim + (pdim or 0)
    rows = []
    if not os.path.exists(path):
        raise DataError(f"{path}: file not found")
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            tokens = s.split()
            if len(tokens) != ncol:
                raise DataError(f"{path}: line {lineno}: expected {ncol} columns, found {len(tokens)}")
            try:
                rows.append([float(tok) for tok in tokens])
            except ValueError:
                bad = next(t for t in tokens if not _is_float(t))
                raise DataError(f"{path}: line {lineno}: non-numeric token {bad!r}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    a = np.array(rows, dtype=float)
    if not np.all(np.isfinite(a)):
        raise DataError(f"{path}: non-finite values")
    if pdim is None:
        return ExperimentSet(a[:, :xdim], a[:, xdim:])
    return SyntheticSet(a[:, :xdim], a[:, xdim : xdim + pdim], a[:, xdim + pdim :])


def save_data(path, data, header: str | None = None):
    """Write an :class:`ExperimentSet` or :class:`SyntheticSet` in the :func:`load_data` layout."""
    if isinstance(data, SyntheticSet):
        a = np.hstack([data.inputs, data.params, data.outputs])
    else:
        a = np.hstack([data.inputs, data.outputs])
    np.savetxt(path, a, fmt="%.17g", header=header or "", comments="# ")


def _is_float(tok):
    try:
        float(tok)
        return True
    except ValueError:
        return False
