"""Convergence diagnostics and posterior summaries for ensemble chains.

- integrated autocorrelation time from the walker-averaged autocorrelation
  function with a self-consistent window (``M >= 5 tau(M)``);
- effective sample size ``kept_steps * nwalkers / tau``;
- plain (not rank-normalised) split-R-hat with each walker as one chain;
- posterior summaries and prediction-error statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DiagnosticsError",
    "autocorrelation_function",
    "integrated_autocorrelation_time",
    "effective_sample_size",
    "split_rhat",
    "split_rhat_from_subchains",
    "summarize",
    "prediction_error_stats",
    "DiagnosticsReport",
    "diagnose",
]

WINDOW_C = 5.0
MIN_LENGTH = 50


class DiagnosticsError(ValueError):
    pass


def _next_pow_two(n):
    i = 1
    while i < n:
        i <<= 1
    return i


def autocorrelation_function(x) -> np.ndarray:
    """Normalised autocorrelation of a 1-D series via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    f = np.fft.rfft(x - x.mean(), n=2 * _next_pow_two(n))
    acf = np.fft.irfft(f * np.conjugate(f))[:n]
    if acf[0] <= 0:
        raise DiagnosticsError("series is constant; autocorrelation undefined")
    return acf / acf[0]


def integrated_autocorrelation_time(series, c: float = WINDOW_C) -> float:
    """Integrated autocorrelation time of one parameter.

    ``series`` is ``(nsteps,)`` for a single walker or ``(nsteps, nwalkers)``.
    The autocorrelation function is averaged over walkers, then summed up to
    the smallest window ``M`` with ``M >= c * tau(M)``.
    """
    s = np.asarray(series, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    n, nw = s.shape
    if n < MIN_LENGTH:
        raise DiagnosticsError(f"series too short for autocorrelation time ({n} < {MIN_LENGTH} steps)")
    if np.all(s.var(axis=0) == 0):
        raise DiagnosticsError("series is constant; autocorrelation undefined")
    rho = np.zeros(n)
    used = 0
    for k in range(nw):
        if s[:, k].var() == 0:
            continue
        rho += autocorrelation_function(s[:, k])
        used += 1
    rho /= used
    taus = 2.0 * np.cumsum(rho) - 1.0  # taus[M] = 1 + 2 sum_{t=1}^{M} rho(t)
    m = np.arange(n) < c * taus
    window = int(np.argmin(m)) if not m.all() else n - 1
    return float(taus[window])


def effective_sample_size(chain, column: int, tau: float | None = None) -> float:
    """``kept_steps * nwalkers / tau`` for parameter ``column``."""
    if tau is None:
        tau = integrated_autocorrelation_time(chain.samples[:, :, column])
    kept, nw = chain.samples.shape[:2]
    return kept * nw / tau


def split_rhat_from_subchains(subchains) -> float:
    """R-hat for an ``(m, n)`` array of ``m`` chains of length ``n``.

    ``W`` is the mean within-chain variance, ``B = n * var(chain means)``,
    ``var+ = (n-1)/n W + B/n`` and ``R = sqrt(var+ / W)``.
    """
    c = np.asarray(subchains, dtype=float)
    m, n = c.shape
    if n < 2 or m < 2:
        raise DiagnosticsError("need at least two chains of length >= 2")
    W = float(np.mean(c.var(axis=1, ddof=1)))
    if W <= 0:
        raise DiagnosticsError("zero within-chain variance; R-hat undefined")
    B = n * float(c.mean(axis=1).var(ddof=1))
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def split_rhat(chain, column: int) -> float:
    """Split-R-hat treating each walker as a chain split into halves.

    An odd number of kept steps drops the first step.
    """
    x = chain.samples[:, :, column] if hasattr(chain, "samples") else np.asarray(chain)[:, :, column]
    n = x.shape[0]
    if n < 4:
        raise DiagnosticsError("split-R-hat needs at least 4 kept steps")
    half = n // 2
    x = x[n - 2 * half :]
    sub = np.concatenate([x[:half].T, x[half:].T], axis=0)
    return split_rhat_from_subchains(sub)


@dataclass
class SummaryRow:
    parameter: str
    mean: float
    median: float
    map: float
    variance: float
    ci_lo: float
    ci_hi: float


def summarize(chain, labels=None) -> list[SummaryRow]:
    """Posterior mean, median, MAP, variance and 95% credible interval per parameter.

    The MAP is the stored sample with the largest log-posterior; percentiles
    use linear interpolation.
    """
    flat = chain.flat_samples()
    if flat.shape[0] == 0:
        raise DiagnosticsError("empty chain")
    lps = chain.flat_log_posteriors()
    best = flat[int(np.argmax(lps))]
    labels = labels or chain.labels or [f"theta{i}" for i in range(flat.shape[1])]
    rows = []
    for j, lab in enumerate(labels):
        col = flat[:, j]
        lo, hi = np.percentile(col, [2.5, 97.5])
        rows.append(
            SummaryRow(lab, float(col.mean()), float(np.median(col)), float(best[j]), float(col.var()), float(lo), float(hi))
        )
    return rows


def prediction_error_stats(errors) -> tuple[float, float, float]:
    """``(mean, max, std)`` of absolute prediction errors."""
    e = np.abs(np.asarray(errors, dtype=float)).ravel()
    return float(e.mean()), float(e.max()), float(e.std())


@dataclass
class DiagnosticsReport:
    labels: list
    tau: np.ndarray
    ess: np.ndarray
    split_rhat: np.ndarray
    acceptance_fraction: float
    summary: list
    prediction_errors: tuple | None = None
    notes: list = field(default_factory=list)

    @property
    def mean_ess(self) -> float:
        return _finite_mean(self.ess)

    @property
    def mean_tau(self) -> float:
        return _finite_mean(self.tau)


def _finite_mean(values) -> float:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    return float(values.mean()) if values.size else float("nan")


def diagnose(chain, prediction_errors=None) -> DiagnosticsReport:
    """Compute tau, ESS and split-R-hat for every parameter, plus the summary table.

    Parameters whose autocorrelation time cannot be computed (too short or
    constant) get ``nan`` and a note instead of aborting the report.
    """
    dim = chain.dim
    tau = np.full(dim, np.nan)
    ess = np.full(dim, np.nan)
    rhat = np.full(dim, np.nan)
    notes = []
    for j in range(dim):
        lab = chain.labels[j] if chain.labels else f"theta{j}"
        try:
            tau[j] = integrated_autocorrelation_time(chain.samples[:, :, j])
            ess[j] = effective_sample_size(chain, j, tau[j])
        except DiagnosticsError as exc:
            notes.append(f"{lab}: tau/ESS unavailable ({exc})")
        try:
            rhat[j] = split_rhat(chain, j)
        except DiagnosticsError as exc:
            notes.append(f"{lab}: split-R-hat unavailable ({exc})")
    return DiagnosticsReport(
        labels=list(chain.labels),
        tau=tau,
        ess=ess,
        split_rhat=rhat,
        acceptance_fraction=float(np.mean(chain.acceptance_fraction)),
        summary=summarize(chain),
        prediction_errors=prediction_errors,
        notes=notes,
    )
