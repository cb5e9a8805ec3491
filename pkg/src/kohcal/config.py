"""JSON run configuration: schema, default filling and object construction."""

from __future__ import annotations

import copy
import json
import os

import jsonschema
import numpy as np

from .calibration import DISCREPANCY_HYPER, SURROGATE_HYPER, CalibrationProblem, CalibrationType
from .data import DataError, generate_synthetic, load_data
from .kernels import KernelFamily
from .models import BUILTIN_MODELS, ModelDomainError, ModelSpec, builtin_model, expression_model
from .priors import prior_from_dict
from .sampler import SamplerConfig
from .sensitivity import prior_bounds

__all__ = ["ConfigError", "SCHEMA", "load_config", "fill_defaults", "build_model", "build_problem", "sampler_config"]


class ConfigError(ValueError):
    pass


_PRIOR = {
    "type": "object",
    "properties": {
        "type": {"enum": ["uniform", "normal", "gamma"]},
        "a": {"type": "number"},
        "b": {"type": "number"},
        "mu": {"type": "number"},
        "sigma": {"type": "number"},
        "shape": {"type": "number"},
        "rate": {"type": "number"},
        "alpha": {"type": "number"},
        "beta": {"type": "number"},
    },
    "required": ["type"],
    "additionalProperties": False,
}

_BOX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}
_KERNEL = {"enum": [f.value for f in KernelFamily]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "builtin": {"enum": list(BUILTIN_MODELS)},
                "expressions": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "xdim": {"type": "integer", "minimum": 0},
                "parameters": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["label", "prior"],
                        "properties": {"label": {"type": "string"}, "prior": _PRIOR},
                    },
                },
                "priors": {"type": "object", "additionalProperties": _PRIOR},
            },
            "oneOf": [{"required": ["builtin"]}, {"required": ["expressions", "xdim", "parameters"]}],
        },
        "calibration": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["A", "B", "C", "D"]},
                "method": {"type": "string"},
                "infer_sigma": {"type": "boolean"},
                "sigma": {"oneOf": [{"type": "number", "minimum": 0}, _PRIOR]},
                "surrogate_kernel": _KERNEL,
                "discrepancy_kernel": _KERNEL,
                "hyperpriors": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {k: _PRIOR for k in SURROGATE_HYPER + DISCREPANCY_HYPER},
                },
            },
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "nwalkers": {"type": "integer", "minimum": 2},
                "nsteps": {"type": "integer", "minimum": 1},
                "burn": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "thin": {"type": "integer", "minimum": 1},
                "stretch_a": {"type": "number", "exclusiveMinimum": 1},
            },
        },
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"experiments": {"type": "string"}, "synthetic": {"type": "string"}},
        },
        "synthetic_generation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["x_bounds", "M"],
            "properties": {"x_bounds": _BOX, "t_bounds": _BOX, "M": {"type": "integer", "minimum": 1}},
        },
        "sensitivity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_base": {"type": "integer", "minimum": 64},
                "output": {"type": "integer", "minimum": 0},
                "x_fixed": {"type": "array", "items": {"type": "number"}},
                "x_bounds": _BOX,
            },
        },
        "prediction": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"observation": {"type": "boolean"}, "grid_points": {"type": "integer", "minimum": 2}},
        },
        "output": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

_DEFAULTS = {
    "calibration": {
        "type": "A",
        "method": "mcmc",
        "infer_sigma": True,
    },
    "sampler": {"nwalkers": 16, "nsteps": 20000, "burn": 0.2, "thin": 1, "stretch_a": 2.0},
    "sensitivity": {"n_base": 16384, "output": 0},
    "prediction": {"observation": False, "grid_points": 50},
    "output": "kohcal_out",
    "seed": 0,
}


def load_config(path) -> dict:
    """Parse and schema-check a JSON config; relative paths are resolved against its directory."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    validate(raw)
    base = os.path.dirname(os.path.abspath(path))
    cfg = copy.deepcopy(raw)
    for key in ("experiments", "synthetic"):
        if key in cfg.get("data", {}):
            cfg["data"][key] = os.path.normpath(os.path.join(base, cfg["data"][key]))
    if "output" in cfg:
        cfg["output"] = os.path.normpath(os.path.join(base, cfg["output"]))
    return cfg


def validate(cfg: dict):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def fill_defaults(cfg: dict) -> dict:
    """Return a copy with every optional block and field filled in."""
    out = copy.deepcopy(cfg)
    for key, default in _DEFAULTS.items():
        if isinstance(default, dict):
            block = out.setdefault(key, {})
            for k, v in default.items():
                block.setdefault(k, v)
        else:
            out.setdefault(key, default)
    cal = out["calibration"]
    if cal["infer_sigma"]:
        cal.setdefault("sigma", {"type": "gamma", "shape": 2.0, "rate": 2.0})
    if cal["method"] != "mcmc":
        if cal["method"] == "vbmc":
            raise ConfigError(
                "calibration.method 'vbmc' is not implemented; use method 'mcmc' (affine-invariant ensemble sampler)"
            )
        raise ConfigError(f"calibration.method {cal['method']!r} is unknown; use 'mcmc'")
    multi = build_model(out).ydim > 1
    family = "matern32" if multi else "sqexp"
    if cal["type"] in ("B", "D"):
        cal.setdefault("surrogate_kernel", family)
    if cal["type"] in ("C", "D"):
        cal.setdefault("discrepancy_kernel", family)
    hp = cal.setdefault("hyperpriors", {})
    names = (SURROGATE_HYPER if cal["type"] in ("B", "D") else ()) + (
        DISCREPANCY_HYPER if cal["type"] in ("C", "D") else ()
    )
    for name in names:
        hp.setdefault(name, {"type": "gamma", "shape": 2.0, "rate": 2.0})
    return out


def _prior(d, where):
    try:
        return prior_from_dict(d)
    except ValueError as exc:
        raise ConfigError(f"config error at {where}: {exc}") from None


def build_model(cfg: dict) -> ModelSpec:
    block = cfg["model"]
    try:
        if "builtin" in block:
            model = builtin_model(block["builtin"])
            overrides = block.get("priors", {})
            unknown = set(overrides) - set(model.labels)
            if unknown:
                raise ConfigError(f"config error at model/priors: unknown parameter(s) {sorted(unknown)}")
            priors = [
                _prior(overrides[lab], f"model/priors/{lab}") if lab in overrides else pr
                for lab, pr in zip(model.labels, model.priors)
            ]
            return model.with_priors(priors)
        params = block["parameters"]
        labels = [p["label"] for p in params]
        priors = [_prior(p["prior"], f"model/parameters/{i}/prior") for i, p in enumerate(params)]
        return expression_model(block["expressions"], block["xdim"], len(params), labels, priors)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"config error at model: {exc}") from None


def sampler_config(cfg: dict) -> SamplerConfig:
    try:
        return SamplerConfig(**cfg["sampler"], seed=cfg["seed"])
    except ValueError as exc:
        raise ConfigError(f"config error at sampler: {exc}") from None


def _check_box(box, n, where):
    if len(box) != n:
        raise ConfigError(f"config error at {where}: expected {n} (lo, hi) pairs, found {len(box)}")
    for lo, hi in box:
        if not lo < hi:
            raise ConfigError(f"config error at {where}: need lo < hi, got ({lo}, {hi})")


def build_problem(cfg: dict, model: ModelSpec | None = None):
    """Model, data and problem from a default-filled config.

    Returns ``(problem, synthetic_was_generated)``.
    """
    model = model or build_model(cfg)
    cal = cfg["calibration"]
    tag = cal["type"]
    data = cfg.get("data", {})
    if "experiments" not in data:
        raise ConfigError("config error at data: missing field 'experiments'")
    if tag in ("B", "D") and "synthetic" not in data and "synthetic_generation" not in cfg:
        raise ConfigError(
            f"config error: calibration type {tag} needs synthetic data; set 'data.synthetic' or 'synthetic_generation'"
        )
    if cal["infer_sigma"]:
        if not isinstance(cal["sigma"], dict):
            raise ConfigError("config error at calibration/sigma: infer_sigma=true needs a prior, not a number")
        sigma = _prior(cal["sigma"], "calibration/sigma")
    else:
        if "sigma" not in cal or isinstance(cal["sigma"], dict):
            raise ConfigError("config error at calibration/sigma: infer_sigma=false needs a numeric sigma")
        sigma = float(cal["sigma"])
    hp = {k: _prior(v, f"calibration/hyperpriors/{k}") for k, v in cal.get("hyperpriors", {}).items()}
    surrogate_priors = {k: v for k, v in hp.items() if k in SURROGATE_HYPER}
    discrepancy_priors = {k: v for k, v in hp.items() if k in DISCREPANCY_HYPER}

    experiments = load_data(data["experiments"], model.xdim, model.ydim)
    synthetic = None
    generated = False
    if tag in ("B", "D"):
        if "synthetic" in data:
            synthetic = load_data(data["synthetic"], model.xdim, model.ydim, model.pdim)
        else:
            gen = cfg["synthetic_generation"]
            _check_box(gen["x_bounds"], model.xdim, "synthetic_generation/x_bounds")
            t_bounds = gen.get("t_bounds") or prior_bounds(model.priors)
            _check_box(t_bounds, model.pdim, "synthetic_generation/t_bounds")
            rng = np.random.default_rng([cfg["seed"], 1])
            try:
                synthetic = generate_synthetic(model, gen["x_bounds"], t_bounds, gen["M"], rng)
            except ModelDomainError as exc:
                raise DataError(f"synthetic data generation failed: {exc}") from None
            generated = True
    try:
        problem = CalibrationProblem(
            model,
            experiments,
            CalibrationType(tag, cal["infer_sigma"]),
            synthetic=synthetic,
            sigma=sigma,
            surrogate_family=cal.get("surrogate_kernel"),
            discrepancy_family=cal.get("discrepancy_kernel"),
            surrogate_priors=surrogate_priors,
            discrepancy_priors=discrepancy_priors,
        )
    except ValueError as exc:
        raise DataError(str(exc)) from None
    return problem, generated
