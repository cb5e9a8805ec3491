"""Model definitions: built-in examples and expression-defined models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expr import compile_expression
from .priors import Normal, PriorDistribution, Uniform

__all__ = [
    "ModelSpec",
    "ModelDomainError",
    "evaluate_model",
    "evaluate_unchecked",
    "expression_model",
    "builtin_model",
    "BUILTIN_MODELS",
]


class ModelDomainError(ValueError):
    """The model produced a non-finite value; ``row`` is the first offending row."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


@dataclass
class ModelSpec:
    """A model ``m(x; theta)`` with ``xdim`` inputs, ``ydim`` outputs and labelled parameters.

    ``evaluator(X, P)`` receives an ``(n, xdim)`` input batch and a matching
    ``(n, pdim)`` parameter batch and returns ``(n, ydim)`` (or ``(n,)`` when
    ``ydim == 1``).  It must be pure.
    """

    xdim: int
    pdim: int
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    parameters: list = field(default_factory=list)
    ydim: int = 1
    name: str = "model"
    expressions: Sequence[str] | None = None

    def __post_init__(self):
        if self.xdim < 0 or self.pdim < 1 or self.ydim < 1:
            raise ValueError(f"invalid model dimensions xdim={self.xdim}, pdim={self.pdim}, ydim={self.ydim}")
        if not self.parameters:
            self.parameters = [(f"p{i}", None) for i in range(self.pdim)]
        if len(self.parameters) != self.pdim:
            raise ValueError(f"pdim={self.pdim} but {len(self.parameters)} parameters declared")

    @property
    def labels(self) -> list[str]:
        return [lab for lab, _ in self.parameters]

    @property
    def priors(self) -> list[PriorDistribution]:
        return [pr for _, pr in self.parameters]

    def with_priors(self, priors) -> "ModelSpec":
        if len(priors) != self.pdim:
            raise ValueError(f"expected {self.pdim} priors, got {len(priors)}")
        params = [(lab, pr) for (lab, _), pr in zip(self.parameters, priors)]
        return ModelSpec(self.xdim, self.pdim, self.evaluator, params, self.ydim, self.name, self.expressions)

    def __call__(self, X, P):
        return evaluate_model(self, X, P)


def evaluate_unchecked(model: ModelSpec, X: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Evaluate without domain checks; invalid rows come back as nan/inf."""
    with np.errstate(all="ignore"):
        out = np.asarray(model.evaluator(X, P), dtype=float)
    n = X.shape[0]
    if out.ndim == 1:
        out = out.reshape(n, 1) if model.ydim == 1 else out.reshape(n, model.ydim)
    if out.shape != (n, model.ydim):
        raise ValueError(f"model returned shape {out.shape}, expected ({n}, {model.ydim})")
    return out


def evaluate_model(model: ModelSpec, X, P) -> np.ndarray:
    """Row ``i`` of the result is ``m(X[i]; P[i])``, shape ``(n, ydim)``.

    A single parameter vector is broadcast over all input rows.  Raises
    :class:`ModelDomainError` naming the first row with a non-finite output.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, model.xdim) if model.xdim else X.reshape(-1, 0)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if X.shape[1] != model.xdim:
        raise ValueError(f"expected {model.xdim} input columns, got {X.shape[1]}")
    if P.shape[1] != model.pdim:
        raise ValueError(f"expected {model.pdim} parameter columns, got {P.shape[1]}")
    if P.shape[0] == 1 and X.shape[0] != 1:
        P = np.repeat(P, X.shape[0], axis=0)
    if X.shape[0] == 0 and model.xdim == 0:
        X = np.zeros((P.shape[0], 0))
    if P.shape[0] != X.shape[0]:
        raise ValueError(f"row mismatch: {X.shape[0]} inputs vs {P.shape[0]} parameter rows")
    out = evaluate_unchecked(model, X, P)
    bad = ~np.all(np.isfinite(out), axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ModelDomainError(
            f"{model.name}: non-finite output at row {row} (x={X[row].tolist()}, p={P[row].tolist()})", row=row
        )
    return out


def expression_model(expressions: Sequence[str], xdim: int, pdim: int, labels=None, priors=None, name="expression"):
    """Model whose outputs are given by expression strings, one per output."""
    if isinstance(expressions, str):
        expressions = [expressions]
    funcs = [compile_expression(e, xdim, pdim) for e in expressions]

    def evaluator(X, P):
        return np.column_stack([np.broadcast_to(f(X, P), (X.shape[0],)) for f in funcs])

    labels = list(labels) if labels else [f"p{i}" for i in range(pdim)]
    priors = list(priors) if priors else [None] * pdim
    return ModelSpec(
        xdim=xdim,
        pdim=pdim,
        evaluator=evaluator,
        parameters=list(zip(labels, priors)),
        ydim=len(funcs),
        name=name,
        expressions=list(expressions),
    )


# ---------------------------------------------------------------- built-ins


def _gravity(X, P):
    return np.sqrt(2.0 * X[:, 0] / P[:, 0])


def _cobb_douglas(X, P):
    # x = (T, L/L0, K/K0), p = (alpha, gamma)
    return X[:, 0] * X[:, 1] ** P[:, 0] * X[:, 2] ** P[:, 1]


def _traction(X, P):
    # nondimensional force; p = (E/E0, nu); unit length and area
    L_hat = 1.0
    A_hat = 1.0
    F = X[:, 0]
    E = P[:, 0]
    nu = P[:, 1]
    y1 = L_hat * (1.0 + F / (A_hat * E))
    y2 = A_hat * (1.0 - F * nu / (A_hat * E)) ** 2
    return np.column_stack([y1, y2])


def _ishigami(X, P, a=7.0, b=0.1):
    q1, q2, q3 = P[:, 0], P[:, 1], P[:, 2]
    return np.sin(q1) + a * np.sin(q2) ** 2 + b * q3**4 * np.sin(q1)


def _builtin(name):
    if name == "gravity":
        return ModelSpec(1, 1, _gravity, [("g", Uniform(7.0, 12.0))], 1, name, ["sqrt(2*x0/p0)"])
    if name == "cobb_douglas":
        return ModelSpec(
            3,
            2,
            _cobb_douglas,
            [("alpha", Uniform(0.3, 1.6)), ("gamma", Normal(0.35, 0.1))],
            1,
            name,
            ["x0 * x1^p0 * x2^p1"],
        )
    if name == "traction":
        return ModelSpec(
            1,
            2,
            _traction,
            [("E", Uniform(200.0 / 250.0, 400.0 / 250.0)), ("nu", Uniform(0.0, 0.5))],
            2,
            name,
            ["1 + x0/p0", "(1 - x0*p1/p0)^2"],
        )
    if name == "ishigami":
        pi = math.pi
        return ModelSpec(
            0,
            3,
            _ishigami,
            [("Q1", Uniform(-pi, pi)), ("Q2", Uniform(-pi, pi)), ("Q3", Uniform(-pi, pi))],
            1,
            name,
        )
    raise KeyError(name)


BUILTIN_MODELS = ("gravity", "cobb_douglas", "traction", "ishigami")


def builtin_model(name: str) -> ModelSpec:
    """One of ``gravity``, ``cobb_douglas``, ``traction`` or ``ishigami``."""
    try:
        return _builtin(name)
    except KeyError:
        raise ValueError(f"unknown builtin model {name!r}; expected one of {', '.join(BUILTIN_MODELS)}") from None
