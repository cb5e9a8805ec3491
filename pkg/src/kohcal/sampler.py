"""Affine-invariant ensemble sampler (stretch move) with a red-black update scheme.

The ensemble is split into two fixed halves.  Each step updates the first
half against companions drawn from the second, then the second half against
the (already updated) first half.  All random numbers for step ``s`` come from
a counter-based Philox stream keyed by ``(seed, s)``; walker ``k`` always
consumes row ``k`` of that step's draw.  Because posterior evaluations consume
no randomness, results are bit-identical however the evaluations are
scheduled (serial, batched or threaded).
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import Executor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "SamplerConfig",
    "ChainResult",
    "InitializationError",
    "stretch_move",
    "draw_stretch",
    "run_ensemble",
    "initialize_walkers",
    "save_chain",
    "load_chain",
]

_MASK64 = (1 << 64) - 1


class InitializationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    nwalkers: int = 16
    nsteps: int = 20000
    burn: float = 0.2
    thin: int = 1
    stretch_a: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.nwalkers < 2 or self.nwalkers % 2:
            raise ValueError(f"nwalkers must be even and >= 2, got {self.nwalkers}")
        if self.nsteps < 1:
            raise ValueError("nsteps must be >= 1")
        if not 0.0 <= self.burn < 1.0:
            raise ValueError(f"burn must be in [0, 1), got {self.burn}")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not self.stretch_a > 1.0:
            raise ValueError(f"stretch_a must be > 1, got {self.stretch_a}")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def burn_steps(self) -> int:
        return int(math.floor(self.burn * self.nsteps))

    @property
    def kept_steps(self) -> int:
        return (self.nsteps - self.burn_steps) // self.thin


@dataclass
class ChainResult:
    samples: np.ndarray  # (kept_steps, nwalkers, dim)
    log_posteriors: np.ndarray  # (kept_steps, nwalkers)
    acceptance_fraction: np.ndarray  # (nwalkers,)
    config: SamplerConfig
    labels: list = field(default_factory=list)
    steps: np.ndarray | None = None  # sampler step index of each kept row

    @property
    def kept_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def nwalkers(self) -> int:
        return self.samples.shape[1]

    @property
    def dim(self) -> int:
        return self.samples.shape[2]

    def flat_samples(self) -> np.ndarray:
        return self.samples.reshape(-1, self.dim)

    def flat_log_posteriors(self) -> np.ndarray:
        return self.log_posteriors.reshape(-1)

    def map_point(self) -> np.ndarray:
        """Stored sample with the largest log-posterior (first occurrence on ties)."""
        k = int(np.argmax(self.flat_log_posteriors()))
        return self.flat_samples()[k].copy()


def draw_stretch(u, a: float):
    """Inverse-CDF draw from ``g(z) ~ 1/sqrt(z)`` on ``[1/a, a]``."""
    return ((a - 1.0) * u + 1.0) ** 2 / a


def stretch_move(current, companion, a: float, z: float, dim: int):
    """Proposal ``companion + z (current - companion)`` and its log Hastings factor ``(dim-1) ln z``."""
    current = np.asarray(current, dtype=float)
    companion = np.asarray(companion, dtype=float)
    proposal = companion + z * (current - companion)
    return proposal, (dim - 1) * math.log(z)


def _step_uniforms(seed: int, step: int, nwalkers: int) -> np.ndarray:
    key = (int(step) << 64) | (int(seed) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key)).random((nwalkers, 3))


def _evaluator(log_post, vectorize: bool, pool: Executor | None, nchunks: int):
    def evaluate(P):
        if vectorize:
            if pool is not None and nchunks > 1 and P.shape[0] > 1:
                parts = np.array_split(P, min(nchunks, P.shape[0]))
                out = np.concatenate(list(pool.map(log_post, parts)))
            else:
                out = log_post(P)
        elif pool is not None:
            out = list(pool.map(log_post, list(P)))
        else:
            out = [log_post(p) for p in P]
        out = np.asarray(out, dtype=float).reshape(P.shape[0])
        return np.where(np.isnan(out), -np.inf, out)

    return evaluate


def run_ensemble(
    log_post: Callable,
    init,
    config: SamplerConfig,
    vectorize: bool = False,
    pool: Executor | None = None,
    nthreads: int = 1,
    labels=None,
    progress: Callable[[int], None] | None = None,
) -> ChainResult:
    """Run the stretch-move ensemble sampler.

    ``log_post`` maps one parameter vector to a log-density; with
    ``vectorize=True`` it maps a ``(k, dim)`` batch to ``k`` values instead.
    Every row of ``init`` must have a finite log-posterior.  The first
    ``floor(burn * nsteps)`` steps are discarded and every ``thin``-th step
    after that is kept.
    """
    init = np.array(init, dtype=float)
    nw, dim = init.shape
    if nw != config.nwalkers:
        raise ValueError(f"init has {nw} walkers, config says {config.nwalkers}")
    if nw < 2 * dim:
        log.warning("nwalkers=%d is less than 2*dim=%d; consider raising nwalkers", nw, 2 * dim)
    evaluate = _evaluator(log_post, vectorize, pool, nthreads)
    pos = init
    lp = evaluate(pos)
    if not np.all(np.isfinite(lp)):
        bad = np.flatnonzero(~np.isfinite(lp)).tolist()
        raise InitializationError(f"initial walkers {bad} have non-finite log-posterior")

    a = float(config.stretch_a)
    half = nw // 2
    groups = (np.arange(half), np.arange(half, nw))
    burn = config.burn_steps
    thin = config.thin
    kept = config.kept_steps
    samples = np.empty((kept, nw, dim))
    lps = np.empty((kept, nw))
    steps = np.empty(kept, dtype=np.int64)
    accepted = np.zeros(nw, dtype=np.int64)
    row = 0
    for s in range(config.nsteps):
        u = _step_uniforms(config.seed, s, nw)
        for g in (0, 1):
            active, other = groups[g], groups[1 - g]
            z = draw_stretch(u[active, 0], a)
            comp_idx = other[np.minimum((u[active, 1] * other.size).astype(np.int64), other.size - 1)]
            comp = pos[comp_idx]
            prop = comp + z[:, None] * (pos[active] - comp)
            lp_prop = evaluate(prop)
            log_ratio = (dim - 1) * np.log(z) + lp_prop - lp[active]
            with np.errstate(divide="ignore"):
                acc = np.log(u[active, 2]) < log_ratio
            if acc.any():
                idx = active[acc]
                pos[idx] = prop[acc]
                lp[idx] = lp_prop[acc]
                accepted[idx] += 1
        if s >= burn and (s - burn + 1) % thin == 0 and row < kept:
            samples[row] = pos
            lps[row] = lp
            steps[row] = s
            row += 1
        if progress is not None:
            progress(s)
    return ChainResult(
        samples=samples,
        log_posteriors=lps,
        acceptance_fraction=accepted / config.nsteps,
        config=config,
        labels=list(labels) if labels is not None else [f"theta{i}" for i in range(dim)],
        steps=steps,
    )


def initialize_walkers(problem, config: SamplerConfig, rng: np.random.Generator | None = None, max_tries: int = 1000):
    """Draw each walker from the joint prior, redrawing until its posterior is finite."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    priors = problem.priors
    labels = problem.labels
    dim = len(priors)
    nw = config.nwalkers
    if nw < 2 * dim:
        log.warning("nwalkers=%d < 2*dim=%d for parameters %s; raise nwalkers", nw, 2 * dim, labels)
    out = np.empty((nw, dim))
    pending = np.arange(nw)
    last = None
    for _ in range(max_tries):
        draw = np.column_stack([pr.sample(rng, pending.size) for pr in priors])
        lp = np.asarray(problem.log_posterior_batch(draw))
        good = np.isfinite(lp)
        out[pending[good]] = draw[good]
        if (~good).any():
            last = draw[~good][0]
        pending = pending[~good]
        if pending.size == 0:
            return out
    region = ", ".join(f"{lab}={v:.6g} ~ {pr}" for lab, v, pr in zip(labels, last, priors))
    raise InitializationError(
        f"{pending.size} walker(s) found no finite posterior after {max_tries} prior draws; last draw: {region}"
    )


def save_chain(path, chain: ChainResult):
    """Text chain file: header ``# step walker <labels...> log_posterior``, one row per (step, walker)."""
    kept, nw, dim = chain.samples.shape
    steps = chain.steps if chain.steps is not None else np.arange(kept)
    cols = [
        np.repeat(steps, nw).astype(float),
        np.tile(np.arange(nw), kept).astype(float),
    ]
    flat = chain.samples.reshape(kept * nw, dim)
    table = np.column_stack(cols + [flat, chain.log_posteriors.reshape(-1)])
    header = "step walker " + " ".join(chain.labels) + " log_posterior"
    meta = {
        "config": asdict(chain.config),
        "acceptance_fraction": [float(f) for f in chain.acceptance_fraction],
    }
    fmt = ["%d", "%d"] + ["%.17g"] * (dim + 1)
    with open(path, "w") as fh:
        fh.write("# " + header + "\n")
        fh.write("# meta " + json.dumps(meta, sort_keys=True) + "\n")
        np.savetxt(fh, table, fmt=fmt)


def load_chain(path) -> ChainResult:
    with open(path) as fh:
        first = fh.readline()
        second = fh.readline()
    if not first.startswith("# step walker"):
        raise ValueError(f"{path}: not a chain file (missing header)")
    names = first[2:].split()
    labels = names[2:-1]
    meta = json.loads(second[len("# meta ") :]) if second.startswith("# meta ") else {}
    table = np.loadtxt(path, comments="#", ndmin=2)
    if table.shape[1] != len(names):
        raise ValueError(f"{path}: expected {len(names)} columns, found {table.shape[1]}")
    steps_col = table[:, 0].astype(np.int64)
    walkers = table[:, 1].astype(np.int64)
    nw = int(walkers.max()) + 1
    kept = table.shape[0] // nw
    if kept * nw != table.shape[0]:
        raise ValueError(f"{path}: row count {table.shape[0]} is not a multiple of {nw} walkers")
    dim = len(labels)
    samples = table[:, 2 : 2 + dim].reshape(kept, nw, dim)
    lps = table[:, 2 + dim].reshape(kept, nw)
    cfg = SamplerConfig(**meta["config"]) if "config" in meta else SamplerConfig(nwalkers=nw, nsteps=kept, burn=0.0)
    acc = np.asarray(meta.get("acceptance_fraction", [np.nan] * nw))
    return ChainResult(samples, lps, acc, cfg, labels, steps_col.reshape(kept, nw)[:, 0])
