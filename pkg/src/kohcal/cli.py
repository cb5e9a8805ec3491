"""Command-line front end: ``kohcal {calibrate,sensitivity,predict,check}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .calibration import CalibrationProblem
from .config import ConfigError, build_model, build_problem, fill_defaults, load_config, sampler_config
from .data import DataError, save_data
from .diagnostics import diagnose, prediction_error_stats
from .kernels import NonPSDError
from .models import ModelDomainError, evaluate_model
from .predict import model_prediction_errors, predict_discrepancy, predict_outputs
from .sampler import InitializationError, initialize_walkers, load_chain, run_ensemble, save_chain
from .sensitivity import SensitivityError, prior_bounds, sobol_indices

log = logging.getLogger("kohcal")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
Z95 = 1.959963984540054
HIST_BINS = 40


class NumericalError(RuntimeError):
    pass


# ---------------------------------------------------------------- output helpers


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def write_csv(path, header, rows, comments=()):
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            if len(r) != len(header):
                raise AssertionError("row length differs from header")
            w.writerow([_fmt(v) for v in r])


def _out_dir(cfg):
    out = cfg["output"]
    os.makedirs(out, exist_ok=True)
    return out


def _echo_config(cfg, out):
    with open(os.path.join(out, "config.effective.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _warn_inputs(problem: CalibrationProblem):
    X = problem.experiments.inputs
    if X.shape[1] >= 2:
        spans = X.max(axis=0) - X.min(axis=0)
        spans = spans[spans > 0]
        if spans.size >= 2 and spans.max() / spans.min() > 100.0:
            log.warning(
                "input column ranges differ by more than 100x (%.3g vs %.3g); scale inputs to order one",
                spans.max(),
                spans.min(),
            )
    if problem.tag in ("B", "D"):
        mean_y = float(np.mean(problem.y_all))
        if abs(mean_y) > 5.0:
            log.warning("mean output %.3g exceeds 5 in magnitude; the zero-mean GP expects order-one outputs", mean_y)


# ---------------------------------------------------------------- calibrate


def _report_text(problem, chain, report, err_stats, cfg):
    lines = []
    s = problem.model
    lines.append(f"calibration type {problem.tag} ({'sigma inferred' if problem.infer_sigma else 'sigma fixed'})")
    lines.append(f"model: {s.name}  inputs={s.xdim}  outputs={s.ydim}  parameters={s.pdim}")
    lines.append(f"experiments N={len(problem.experiments)}  synthetic M={len(problem.synthetic) if problem.synthetic else 0}")
    c = chain.config
    lines.append(
        f"sampler: nwalkers={c.nwalkers} nsteps={c.nsteps} burn={c.burn} thin={c.thin} a={c.stretch_a} seed={c.seed}"
    )
    lines.append(f"kept samples: {chain.kept_steps} steps x {chain.nwalkers} walkers")
    lines.append(f"mean acceptance fraction: {report.acceptance_fraction:.4f}")
    lines.append("")
    head = f"{'parameter':<12}{'mean':>13}{'median':>13}{'MAP':>13}{'variance':>13}{'ci95_lo':>13}{'ci95_hi':>13}"
    lines.append("posterior summary (MAP = stored sample with the largest log-posterior)")
    lines.append(head)
    for r in report.summary:
        lines.append(
            f"{r.parameter:<12}{r.mean:>13.6g}{r.median:>13.6g}{r.map:>13.6g}{r.variance:>13.6g}{r.ci_lo:>13.6g}{r.ci_hi:>13.6g}"
        )
    lines.append("")
    lines.append("convergence (plain split-R-hat, not rank-normalised; thresholds 1.01 strict, 1.05 loose)")
    lines.append(f"{'parameter':<12}{'tau':>11}{'ESS':>11}{'R-hat':>11}  flag")
    for j, lab in enumerate(report.labels):
        rh = report.split_rhat[j]
        flag = "" if not np.isfinite(rh) else ("ok" if rh < 1.01 else ("check" if rh < 1.05 else "not converged"))
        lines.append(f"{lab:<12}{report.tau[j]:>11.4g}{report.ess[j]:>11.4g}{rh:>11.5f}  {flag}")
    lines.append(f"mean ESS: {report.mean_ess:.4g}")
    lines.append("")
    if err_stats is not None:
        lines.append("prediction errors at the MAP sample (absolute, pooled over outputs)")
        lines.append(f"avg={err_stats[0]:.6g}  max={err_stats[1]:.6g}  std={err_stats[2]:.6g}")
    for n in report.notes:
        lines.append(f"note: {n}")
    return "\n".join(lines) + "\n"


def _histograms(problem, chain):
    rows = []
    flat = chain.flat_samples()
    for j, (lab, pr) in enumerate(zip(problem.labels, problem.priors)):
        col = flat[:, j]
        lo, hi = float(col.min()), float(col.max())
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        dens, edges = np.histogram(col, bins=HIST_BINS, range=(lo, hi), density=True)
        centers = 0.5 * (edges[:-1] + edges[1:])
        prior = np.exp(pr.log_density(centers))
        for k in range(HIST_BINS):
            rows.append([lab, edges[k], edges[k + 1], dens[k], prior[k]])
    return rows


def _band_columns(ydim):
    cols = []
    for i in range(ydim):
        cols += [f"mean_y{i}", f"ci_lo_y{i}", f"ci_hi_y{i}"]
    return cols


def _band_rows(X, mean, lo, hi):
    rows = []
    for k in range(X.shape[0]):
        r = list(X[k])
        for i in range(mean.shape[1]):
            r += [mean[k, i], lo[k, i], hi[k, i]]
        rows.append(r)
    return rows


def _discrepancy_grid(problem, npts):
    X = problem.experiments.inputs
    if X.shape[1] == 1:
        return np.linspace(X[:, 0].min(), X[:, 0].max(), npts)[:, None]
    return X.copy()


def _map_comment(problem, theta_map):
    return "evaluated at the MAP sample: " + ", ".join(f"{l}={v:.10g}" for l, v in zip(problem.labels, theta_map))


def cmd_calibrate(cfg, threads=1):
    model = build_model(cfg)
    problem, generated = build_problem(cfg, model)
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    _warn_inputs(problem)
    if generated:
        save_data(os.path.join(out, "synthetic.txt"), problem.synthetic, header="generated synthetic data: x t y")
    sc = sampler_config(cfg)
    if sc.nwalkers < 2 * problem.dim:
        log.warning("nwalkers=%d is below 2 x %d parameters; raise sampler.nwalkers", sc.nwalkers, problem.dim)
    init = initialize_walkers(problem, sc, np.random.default_rng([cfg["seed"], 2]))
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        chain = run_ensemble(
            problem.log_posterior_batch, init, sc, vectorize=True, pool=pool, nthreads=threads, labels=problem.labels
        )
    finally:
        if pool is not None:
            pool.shutdown()
    save_chain(os.path.join(out, "chain.txt"), chain)

    theta_map = chain.map_point()
    try:
        errors = model_prediction_errors(problem, theta_map)
        err_stats = prediction_error_stats(errors)
    except ModelDomainError as exc:
        log.warning("prediction errors unavailable at the MAP sample: %s", exc)
        err_stats = None
    report = diagnose(chain, err_stats)
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(_report_text(problem, chain, report, err_stats, cfg))

    summary_cols = ["parameter", "mean", "median", "map", "variance", "ci_lo", "ci_hi"]
    srows = [[r.parameter, r.mean, r.median, r.map, r.variance, r.ci_lo, r.ci_hi] for r in report.summary]
    write_csv(os.path.join(out, "summary.csv"), summary_cols, srows)
    drows = [
        s + [report.tau[j], report.ess[j], report.split_rhat[j]] for j, s in enumerate(srows)
    ]
    write_csv(
        os.path.join(out, "diagnostics.csv"),
        summary_cols + ["tau", "ess", "rhat"],
        drows,
        comments=["rhat is the plain split-R-hat (not rank-normalised)"],
    )

    X = problem.experiments.inputs
    mean, var = predict_outputs(problem, theta_map, X)
    half = Z95 * np.sqrt(var)
    Y = problem.experiments.outputs
    ccols = [f"x{i}" for i in range(X.shape[1])]
    for i in range(Y.shape[1]):
        ccols += [f"y_obs{i}", f"y_pred{i}", f"ci_lo{i}", f"ci_hi{i}"]
    crows = []
    for k in range(X.shape[0]):
        r = list(X[k])
        for i in range(Y.shape[1]):
            r += [Y[k, i], mean[k, i], mean[k, i] - half[k, i], mean[k, i] + half[k, i]]
        crows.append(r)
    write_csv(
        os.path.join(out, "comparison.csv"),
        ccols,
        crows,
        comments=[_map_comment(problem, theta_map), "band: 95% of the latent prediction"],
    )
    write_csv(
        os.path.join(out, "histograms.csv"),
        ["parameter", "bin_lo", "bin_hi", "posterior_density", "prior_density"],
        _histograms(problem, chain),
    )
    if problem.tag in ("C", "D"):
        grid = _discrepancy_grid(problem, cfg["prediction"]["grid_points"])
        dm, dlo, dhi = predict_discrepancy(problem, theta_map, grid)
        write_csv(
            os.path.join(out, "discrepancy.csv"),
            [f"x{i}" for i in range(grid.shape[1])] + _band_columns(dm.shape[1]),
            _band_rows(grid, dm, dlo, dhi),
            comments=[_map_comment(problem, theta_map), "band: mean +- 1.96 sd of the discrepancy GP"],
        )
    return EXIT_OK


# ---------------------------------------------------------------- sensitivity


def cmd_sensitivity(cfg, threads=1):
    model = build_model(cfg)
    block = cfg["sensitivity"]
    out_idx = block["output"]
    if out_idx >= model.ydim:
        raise ConfigError(f"config error at sensitivity/output: model has {model.ydim} output(s)")
    labels = list(model.labels)
    bounds = prior_bounds(model.priors)
    n_x = 0
    if model.xdim:
        if "x_bounds" in block:
            if len(block["x_bounds"]) != model.xdim:
                raise ConfigError(f"config error at sensitivity/x_bounds: expected {model.xdim} pairs")
            bounds = bounds + [tuple(b) for b in block["x_bounds"]]
            labels += [f"x{i}" for i in range(model.xdim)]
            n_x = model.xdim
        elif "x_fixed" in block:
            if len(block["x_fixed"]) != model.xdim:
                raise ConfigError(f"config error at sensitivity/x_fixed: expected {model.xdim} values")
        else:
            raise ConfigError("config error at sensitivity: model has inputs; set 'x_fixed' or 'x_bounds'")
    x_fixed = np.asarray(block.get("x_fixed", []), dtype=float)
    p = model.pdim

    def f(Q):
        X = Q[:, p:] if n_x else np.broadcast_to(x_fixed, (Q.shape[0], model.xdim))
        return evaluate_model(model, X, Q[:, :p])[:, out_idx]

    out = _out_dir(cfg)
    _echo_config(cfg, out)
    res = sobol_indices(f, bounds, block["n_base"], labels=labels)
    rank = np.empty(len(labels), dtype=int)
    rank[res.ranking()] = np.arange(1, len(labels) + 1)
    rows = [[labels[i], res.first_order[i], res.total_order[i], rank[i]] for i in range(len(labels))]
    write_csv(
        os.path.join(out, "sensitivity.csv"),
        ["parameter", "S1", "ST", "rank"],
        rows,
        comments=[f"n_base={res.n_base} evaluations={res.n_evaluations} variance={res.variance:.12g} output=y{out_idx}"],
    )
    order = " > ".join(labels[i] for i in res.ranking())
    print(f"ranking by S1: {order}")
    return EXIT_OK


# ---------------------------------------------------------------- predict


def _load_query(path, xdim):
    if not os.path.exists(path):
        raise DataError(f"{path}: query file not found")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            tok = s.split()
            if len(tok) != xdim:
                raise DataError(f"{path}: line {lineno}: expected {xdim} columns, found {len(tok)}")
            try:
                rows.append([float(t) for t in tok])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric token") from None
    if not rows:
        raise DataError(f"{path}: query file has no points")
    return np.asarray(rows, dtype=float).reshape(len(rows), xdim)


def cmd_predict(cfg, chain_path, query_path, observation=None):
    model = build_model(cfg)
    problem, _ = build_problem(cfg, model)
    if not os.path.exists(chain_path):
        raise DataError(f"{chain_path}: chain file not found")
    try:
        chain = load_chain(chain_path)
    except (ValueError, KeyError) as exc:
        raise DataError(f"{chain_path}: unreadable chain ({exc})") from None
    if chain.dim != problem.dim:
        raise DataError(
            f"chain has {chain.dim} parameters ({' '.join(chain.labels)}), "
            f"config layout expects {problem.dim} ({' '.join(problem.labels)})"
        )
    X = _load_query(query_path, model.xdim)
    observation = cfg["prediction"]["observation"] if observation is None else observation
    theta_map = chain.map_point()
    mean, var = predict_outputs(problem, theta_map, X, observation=observation)
    half = Z95 * np.sqrt(var)
    out = _out_dir(cfg)
    write_csv(
        os.path.join(out, "prediction.csv"),
        [f"x{i}" for i in range(model.xdim)] + _band_columns(model.ydim),
        _band_rows(X, mean, mean - half, mean + half),
        comments=[
            _map_comment(problem, theta_map),
            "band: 95% " + ("observation (noise included)" if observation else "latent process"),
        ],
    )
    return EXIT_OK


# ---------------------------------------------------------------- check


def cmd_check(cfg):
    model = build_model(cfg)
    sampler_config(cfg)
    if "data" in cfg and "experiments" in cfg["data"]:
        problem, _ = build_problem(cfg, model)
        _warn_inputs(problem)
        print(
            f"config OK: type {problem.tag}, N={len(problem.experiments)}, "
            f"M={len(problem.synthetic) if problem.synthetic else 0}, parameters: {' '.join(problem.labels)}"
        )
    else:
        print(f"config OK: model {model.name}, parameters: {' '.join(model.labels)} (no experimental data)")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="kohcal", description="Bayesian calibration of computational models.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides config 'output')")
        p.add_argument("--seed", type=int, help="random seed (overrides config 'seed')")
        p.add_argument("--threads", type=int, default=1, help="threads for posterior evaluation")
        p.add_argument("--check", action="store_true", help="validate config and data, then stop")

    common(sub.add_parser("calibrate", help="run MCMC calibration"))
    common(sub.add_parser("sensitivity", help="Sobol indices over the prior box"))
    p = sub.add_parser("predict", help="predict at query points using the MAP sample of a chain")
    common(p)
    p.add_argument("--chain", required=True, help="chain file written by 'calibrate'")
    p.add_argument("--query", required=True, help="whitespace-delimited query inputs")
    p.add_argument("--observation", action="store_true", default=None, help="include measurement noise in the band")
    common(sub.add_parser("check", help="validate config and data"))
    return parser


def _prepare(args):
    cfg = load_config(args.config)
    if args.out is not None:
        cfg["output"] = os.path.abspath(args.out)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg["seed"] = args.seed
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return fill_defaults(cfg)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _prepare(args)
        if args.check or args.command == "check":
            return cmd_check(cfg)
        t0 = time.perf_counter()
        if args.command == "calibrate":
            code = cmd_calibrate(cfg, args.threads)
        elif args.command == "sensitivity":
            code = cmd_sensitivity(cfg, args.threads)
        else:
            code = cmd_predict(cfg, args.chain, args.query, args.observation)
        log.info("%s finished in %.1f s", args.command, time.perf_counter() - t0)
        return code
    except ConfigError as exc:
        print(f"kohcal: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ModelDomainError) as exc:
        print(f"kohcal: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonPSDError, InitializationError, SensitivityError, NumericalError) as exc:
        print(f"kohcal: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="kohcal: %(levelname)s: %(message)s", stream=sys.stderr)
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
