"""Experiment configuration: one JSON document with per-command sections.

Every key has a default; user documents are merged over the defaults and
unknown keys are rejected. A run's ``manifest.json`` embeds the fully
resolved config and can be passed back as ``--config``.
"""

import copy
import json
import os

from .exceptions import ConfigError

DEFAULTS = {
    "master_seed": 0,
    "output_dir": None,
    "sdi": {"gamma": 0.5, "epsilon": 0.1, "s0": [2.0, 0.0]},
    "reward": {"w_pos": 0.9, "w_ctrl": 0.1},
    "ctrnn": {"k": 2, "kappa": 0.01, "freeze_tau": False},
    "oua": {"lambda_": 2.0, "sigma": 0.1, "eta": 5.0, "rho": 2.0, "adapt_sigma": False},
    "solver": {"dt": 0.1, "method": "heun", "record_stride": 1},
    "simulate": {"horizon": 1000.0, "discount_rate": 0.0, "s0": None},
    "learn": {"horizon": 1000.0, "discount_rate": 0.0, "n_seeds": 1, "s0": [0.0, 0.0]},
    "gp": {
        "n_islands": 10,
        "pop_size": 100,
        "n_generations": 50,
        "tournament_size": 5,
        "p_crossover": 0.7,
        "p_mutate_subtree": 0.15,
        "p_mutate_point": 0.1,
        "p_mutate_const": 0.05,
        "const_jitter_std": 0.5,
        "elitism_count": 1,
        "migration_interval": 10,
        "migration_count": 2,
        "const_init_range": [-5.0, 5.0],
        "max_depth": 8,
        "max_nodes": 64,
        "init_max_depth": 4,
        "mutation_subtree_depth": 3,
        "rollouts_per_eval": 4,
        "penalty_fitness": -1e6,
        "n_state": 2,
        "tanh_readout": False,
    },
    "evolve": {"horizon": 50.0, "discount_rate": 0.0, "final_eval_seeds": 20},
    "eval_expr": {"individual": None, "n_seeds": 20, "horizon": 50.0, "discount_rate": 0.0,
                  "tanh_readout": False},
}

# values that may legitimately be null, or a list, in place of the default's type
_NULLABLE = {("output_dir",), ("simulate", "s0"), ("eval_expr", "individual")}


def _merge(base, update, path=()):
    out = copy.deepcopy(base)
    for key, value in update.items():
        where = ".".join(path + (key,))
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        default = base[key]
        if isinstance(default, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be an object")
            out[key] = _merge(default, value, path + (key,))
        else:
            out[key] = _check_type(value, default, path + (key,))
    return out


def _check_type(value, default, path):
    where = ".".join(path)
    if value is None:
        if path in _NULLABLE:
            return None
        raise ConfigError(f"{where} may not be null")
    if path in _NULLABLE and default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        value = float(value)
    elif isinstance(default, list):
        if not isinstance(value, list) or len(value) != len(default):
            raise ConfigError(f"{where} must be a list of {len(default)} numbers")
        value = [float(v) for v in value]
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
    return value


def resolve(doc=None):
    """Defaults merged with ``doc``; raises :class:`ConfigError` on bad input."""
    return _merge(DEFAULTS, doc or {})


def load(path):
    """Read a config or manifest file and return ``(resolved_config, command_or_None)``."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    command = None
    if "manifest_version" in doc:
        command = doc.get("command")
        doc = doc.get("config", {})
    return resolve(doc), command


def manifest(command, config, version):
    return {"manifest_version": 1, "command": command, "dynlab_version": version,
            "config": config}


def output_root(cli_out, config):
    return cli_out or config.get("output_dir") or os.environ.get("DYNLAB_OUT") or "runs"


# ---------------------------------------------------------------------------
# builders: resolved config sections -> library objects


def make_env(config, s0=None):
    from .environments import RewardWeights, SdiParams, StochasticDoubleIntegrator

    sdi = config["sdi"]
    try:
        params = SdiParams(sdi["gamma"], sdi["epsilon"], tuple(s0 if s0 is not None else sdi["s0"]))
        return StochasticDoubleIntegrator(params, RewardWeights(**config["reward"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def make_solver(config):
    from .sde import SolverConfig

    sol = config["solver"]
    try:
        return SolverConfig(dt=sol["dt"], method=sol["method"], record_stride=sol["record_stride"])
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def make_return(section):
    from .experiments import ReturnConfig

    try:
        return ReturnConfig(discount_rate=section["discount_rate"], horizon=section["horizon"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def make_hyper(config):
    from .oua import OuaHyper

    try:
        return OuaHyper(**config["oua"])
    except NotImplementedError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(f"oua: {exc}") from exc


def make_gp(config):
    from .dgp import GpConfig

    gp = dict(config["gp"])
    gp["const_init_range"] = tuple(gp["const_init_range"])
    try:
        return GpConfig(**gp)
    except ValueError as exc:
        raise ConfigError(f"gp: {exc}") from exc
