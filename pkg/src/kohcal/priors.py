"""Prior distributions for parameters, kernel hyperparameters and the noise level.

Three families are supported: uniform, normal and gamma (shape-rate
convention, density proportional to ``x**(shape-1) * exp(-rate*x)``).
Log-densities return ``-inf`` outside the support instead of raising, so the
posterior can reject proposals uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "PriorDistribution",
    "Uniform",
    "Normal",
    "Gamma",
    "log_density",
    "sample",
    "prior_from_dict",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class PriorDistribution:
    """Base class. Subclasses are frozen dataclasses."""

    kind: str = ""

    def log_density(self, x):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def central_interval(self, mass: float = 0.99) -> tuple[float, float]:
        """Equal-tailed interval holding ``mass`` of the probability."""
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def variance(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(PriorDistribution):
    a: float
    b: float
    kind = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or not self.a < self.b:
            raise ValueError(f"Uniform prior requires finite a < b, got a={self.a}, b={self.b}")

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.a) & (x <= self.b)
        out = np.where(inside, -math.log(self.b - self.a), -np.inf)
        return out if out.ndim else float(out)

    def sample(self, rng, n):
        return rng.uniform(self.a, self.b, size=n)

    def support(self):
        return (self.a, self.b)

    def central_interval(self, mass=0.99):
        return (self.a, self.b)

    @property
    def mean(self):
        return 0.5 * (self.a + self.b)

    @property
    def variance(self):
        return (self.b - self.a) ** 2 / 12.0

    def to_dict(self):
        return {"type": "uniform", "a": self.a, "b": self.b}

    def __str__(self):
        return f"Uniform(a={self.a:g}, b={self.b:g})"


@dataclass(frozen=True)
class Normal(PriorDistribution):
    mu: float
    sigma: float
    kind = "normal"

    def __post_init__(self):
        if not math.isfinite(self.mu) or not self.sigma > 0 or not math.isfinite(self.sigma):
            raise ValueError(f"Normal prior requires finite mu and sigma > 0, got {self.mu}, {self.sigma}")

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mu) / self.sigma
        out = -0.5 * z * z - math.log(self.sigma) - _LOG_SQRT_2PI
        return out if out.ndim else float(out)

    def sample(self, rng, n):
        return rng.normal(self.mu, self.sigma, size=n)

    def support(self):
        return (-math.inf, math.inf)

    def central_interval(self, mass=0.99):
        half = self.sigma * math.sqrt(2.0) * float(special.erfinv(mass))
        return (self.mu - half, self.mu + half)

    @property
    def mean(self):
        return self.mu

    @property
    def variance(self):
        return self.sigma**2

    def to_dict(self):
        return {"type": "normal", "mu": self.mu, "sigma": self.sigma}

    def __str__(self):
        return f"Normal(mu={self.mu:g}, sigma={self.sigma:g})"


@dataclass(frozen=True)
class Gamma(PriorDistribution):
    shape: float
    rate: float
    kind = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0) or not (math.isfinite(self.shape) and math.isfinite(self.rate)):
            raise ValueError(f"Gamma prior requires shape > 0 and rate > 0, got {self.shape}, {self.rate}")

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            logx = np.log(np.where(x > 0, x, 1.0))
            out = (
                self.shape * math.log(self.rate)
                + (self.shape - 1.0) * logx
                - self.rate * x
                - math.lgamma(self.shape)
            )
        out = np.where(x > 0, out, -np.inf)
        return out if out.ndim else float(out)

    def sample(self, rng, n):
        return rng.gamma(self.shape, 1.0 / self.rate, size=n)

    def support(self):
        return (0.0, math.inf)

    def central_interval(self, mass=0.99):
        tail = 0.5 * (1.0 - mass)
        lo = special.gammaincinv(self.shape, tail) / self.rate
        hi = special.gammaincinv(self.shape, 1.0 - tail) / self.rate
        return (float(lo), float(hi))

    @property
    def mean(self):
        return self.shape / self.rate

    @property
    def variance(self):
        return self.shape / self.rate**2

    def to_dict(self):
        return {"type": "gamma", "shape": self.shape, "rate": self.rate}

    def __str__(self):
        return f"Gamma(shape={self.shape:g}, rate={self.rate:g})"


def log_density(prior: PriorDistribution, x):
    """Natural-log density of ``prior`` at ``x``; ``-inf`` outside the support."""
    return prior.log_density(x)


def sample(prior: PriorDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` independent values from ``prior`` using ``rng``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return prior.sample(rng, n)


def prior_from_dict(d: dict) -> PriorDistribution:
    """Build a prior from its config form, e.g. ``{"type": "uniform", "a": 7, "b": 12}``.

    Gamma accepts ``shape``/``rate`` or the ``alpha``/``beta`` aliases.
    """
    kind = str(d.get("type", "")).lower()
    try:
        if kind == "uniform":
            return Uniform(float(d["a"]), float(d["b"]))
        if kind == "normal":
            return Normal(float(d["mu"]), float(d["sigma"]))
        if kind == "gamma":
            shape = d.get("shape", d.get("alpha"))
            rate = d.get("rate", d.get("beta"))
            if shape is None or rate is None:
                raise KeyError("shape/rate")
            return Gamma(float(shape), float(rate))
    except KeyError as exc:
        raise ValueError(f"prior {d!r} is missing field {exc}") from None
    raise ValueError(f"unknown prior type {d.get('type')!r}; expected uniform, normal or gamma")
