"""Command-line runner: ``dynlab simulate|learn|evolve|eval-expr``.

Each command writes into ``<out>/<command>-seed<S>``, starting from an
empty directory, and records the fully resolved configuration in
``manifest.json``. Passing that manifest back as ``--config`` reproduces
every CSV byte for byte.

Exit codes: 0 ok, 2 configuration error, 3 numerical blow-up, 4 parse error.
"""

import argparse
import json
import logging
import math
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .ctrnn import ctrnn_system, init_params, readout
from .dgp import (
    evaluate_fitness,
    individual_to_system,
    null_individual,
    parse_individual,
    rollout_individual,
    run_dgp,
    serialize_individual,
)
from .exceptions import ConfigError, NonFiniteState, ParseError
from .experiments import compare_learning, map_ordered, rollout
from .sde import couple, derive_stream_id, write_csv

logger = logging.getLogger("dynlab")

COMMANDS = ("simulate", "learn", "evolve", "eval-expr")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARSE = 0, 2, 3, 4


def _finite_or_str(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _finite_or_str(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_finite_or_str(x) for x in v]
    if isinstance(v, np.floating):
        return _finite_or_str(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    return v


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_finite_or_str(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _pad(columns):
    """Stack 1-D columns of unequal length, padding the short ones with NaN."""
    n = max(len(c) for c in columns)
    out = np.full((n, len(columns)), np.nan)
    for j, c in enumerate(columns):
        out[: len(c), j] = c
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(config, run_dir, threads=1):
    """Zero-initialised CTRNN driving the SDI, without learning."""
    env = cfgmod.make_env(config, config["simulate"]["s0"])
    sim, rc = cfgmod.make_solver(config), cfgmod.make_return(config["simulate"])
    p = init_params(config["ctrnn"]["k"], env.dim_obs, env.dim_ctrl, config["ctrnn"]["kappa"])
    joint = couple(ctrnn_system(p), env.as_system(), env.observe, lambda a: readout(a, p))
    x0 = np.concatenate([np.zeros(p.k), env.initial_state])

    def tap(x):
        u = readout(x[: p.k], p)
        return u, env.reward(x[p.k:], u)

    seed_key = (config["master_seed"], derive_stream_id("simulate"))
    rec = rollout(joint, x0, sim, rc, tap, seed_key)
    traj = rec.trajectory
    header = (["t"] + [f"alpha{i + 1}" for i in range(p.k)]
              + [f"s{i + 1}" for i in range(env.dim_state)] + ["u", "r"])
    write_csv(run_dir / "trajectory.csv", header,
              np.column_stack([traj.times, traj.states, rec.controls, rec.rewards]))
    k = p.k
    n = len(traj.times)
    tail = traj.states[int(math.floor(n * 0.8)):, k]
    summary = {"return": rec.return_, "seed_key": list(seed_key),
               "final_abs_s1": float(np.mean(np.abs(tail))), "n_records": n,
               "env": env.to_dict()}
    write_json(run_dir / "summary.json", summary)
    return EXIT_OK


PANELS = {
    "a": "panel_a_position.csv",
    "b": "panel_b_velocity.csv",
    "c": "panel_c_return.csv",
    "d": "panel_d_alpha.csv",
    "e": "panel_e_theta.csv",
    "f": "panel_f_reward.csv",
}


def _write_learning_run(path, run):
    lay = run.layout
    n = lay.n_theta
    header = (["t", "s1", "s2", "u", "r", "nu", "delta"]
              + [f"theta_{i}" for i in range(n)] + [f"mu_{i}" for i in range(n)])
    st = run.states
    rows = np.column_stack([run.times, st[:, lay.s], run.controls[:, :1], run.rewards,
                            st[:, lay.nu], run.deltas, st[:, lay.theta], st[:, lay.mu]])
    write_csv(path, header, rows)


def _write_panels(seed_dir, learn, base):
    lay = learn.layout
    t = base.times if len(base.times) >= len(learn.times) else learn.times
    for key, col, name in (("a", 0, "position"), ("b", 1, "velocity")):
        write_csv(seed_dir / PANELS[key], ["t", f"{name}_learning", f"{name}_baseline"],
                  _pad([t, learn.states[:, col], base.states[:, col]]))
    write_csv(seed_dir / PANELS["c"], ["t", "return_learning", "return_baseline"],
              _pad([t, learn.cumulative_return, base.cumulative_return]))
    write_csv(seed_dir / PANELS["d"], ["t"] + [f"alpha{i + 1}" for i in range(lay.k)],
              np.column_stack([learn.times, learn.states[:, lay.alpha]]))
    write_csv(seed_dir / PANELS["e"], ["t"] + [f"theta_{i}" for i in range(lay.n_theta)],
              np.column_stack([learn.times, learn.states[:, lay.theta]]))
    write_csv(seed_dir / PANELS["f"], ["t", "r", "nu", "delta"],
              np.column_stack([learn.times, learn.rewards, learn.states[:, lay.nu], learn.deltas]))


def cmd_learn(config, run_dir, threads=1):
    """Paired runs with and without OUA; exits 3 if a learning arm blew up."""
    sec = config["learn"]
    env = cfgmod.make_env(config, sec["s0"])
    sim, rc, h = cfgmod.make_solver(config), cfgmod.make_return(sec), cfgmod.make_hyper(config)
    if sec["n_seeds"] < 1:
        raise ConfigError("learn.n_seeds must be >= 1")
    seeds = [(config["master_seed"], derive_stream_id("learn", j)) for j in range(sec["n_seeds"])]
    ct = config["ctrnn"]
    report = compare_learning(env, seeds, h, sim, rc, k=ct["k"], kappa=ct["kappa"],
                              freeze_tau=ct["freeze_tau"], threads=threads)
    rows = report.rows()
    cols = ["seed_index", "return_learning", "return_baseline", "final_abs_s1_learning",
            "final_abs_s1_baseline", "learning_diverged", "baseline_diverged", "tau_clamped"]
    write_csv(run_dir / "comparison.csv", cols, [[float(r[c]) for c in cols] for r in rows])
    for j, (a, b) in enumerate(zip(report.learning, report.baseline)):
        seed_dir = run_dir / f"seed_{j:02d}"
        seed_dir.mkdir()
        _write_learning_run(seed_dir / "learning_run.csv", a)
        _write_panels(seed_dir, a, b)
    summary = report.summary()
    summary["seeds"] = [list(s) for s in seeds]
    summary["failed_times"] = [a.failed_time for a in report.learning]
    write_json(run_dir / "summary.json", summary)
    if summary["learning_diverged"]:
        logger.error("%d learning run(s) produced a non-finite state", summary["learning_diverged"])
        return EXIT_NUMERIC
    return EXIT_OK


def _final_eval(ind, env, config, section, sim, rc, label, threads=1, tanh_readout=False):
    """Matched-seed comparison of ``ind`` against the null controller."""
    n = section["final_eval_seeds"] if "final_eval_seeds" in section else section["n_seeds"]
    seeds = [(config["master_seed"], derive_stream_id(label, i)) for i in range(n)]
    penalty = config["gp"]["penalty_fitness"]
    a, b = ind.copy(), null_individual(ind.n_state)
    fa, fb = map_ordered(lambda x: evaluate_fitness(x, env, seeds, sim, rc, penalty, tanh_readout),
                         [a, b], threads)
    return seeds, {"fitness": fa, "null_fitness": fb, "beats_null": fa > fb, "n_seeds": n}


def cmd_evolve(config, run_dir, threads=1):
    env = cfgmod.make_env(config)
    sim, rc, gp = cfgmod.make_solver(config), cfgmod.make_return(config["evolve"]), cfgmod.make_gp(config)

    def progress(gen, report):
        logger.info("generation %d: best %.6g", gen, report.best_per_generation[-1].fitness)

    report = run_dgp(gp, env, config["master_seed"], sim, rc, threads=threads, progress=progress)
    write_csv(run_dir / "fitness.csv", ["generation", "island", "best_fitness", "mean_fitness"],
              report.rows())
    best_dir = run_dir / "best"
    best_dir.mkdir()
    for gen, text in enumerate(report.best_expressions()):
        (best_dir / f"gen_{gen:03d}.txt").write_text(text)
    final = report.final_best
    (run_dir / "best_individual.txt").write_text(serialize_individual(final))
    _, comparison = _final_eval(final, env, config, config["evolve"], sim, rc, "final-eval",
                                threads, gp.tanh_readout)
    summary = {"max_fitness_per_generation": report.max_fitness(),
               "final_best_fitness": final.fitness, "final_comparison": comparison}
    write_json(run_dir / "summary.json", summary)
    return EXIT_OK


def _write_rollout(path, ind, env, rec, tanh_readout):
    _, control = individual_to_system(ind, env, tanh_readout)
    k = ind.n_state
    states = rec.trajectory.states
    with np.errstate(all="ignore"):
        u = np.array([control(x[:k])[0] for x in states])
        r = np.array([env.reward(x[k:], [ui]) for x, ui in zip(states, u)])
    header = (["t"] + [f"z{i + 1}" for i in range(k)]
              + [f"s{i + 1}" for i in range(env.dim_state)] + ["u", "r"])
    write_csv(path, header, np.column_stack([rec.trajectory.times, states, u, r]))


def load_individual(path):
    if not path:
        raise ConfigError("eval-expr needs an individual file (--individual or eval_expr.individual)")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read individual {path!r}: {exc}") from exc
    return parse_individual(text)


def cmd_eval_expr(config, run_dir, threads=1, individual=None):
    sec = config["eval_expr"]
    ind = load_individual(individual or sec["individual"])
    env = cfgmod.make_env(config)
    sim, rc = cfgmod.make_solver(config), cfgmod.make_return(sec)
    tanh_readout = sec["tanh_readout"]
    seeds, comparison = _final_eval(ind, env, config, sec, sim, rc, "eval-expr", threads,
                                    tanh_readout)
    penalty = config["gp"]["penalty_fitness"]
    null = null_individual(ind.n_state)
    roll_dir = run_dir / "rollouts"
    roll_dir.mkdir()
    per_seed = []
    for i, s in enumerate(seeds):
        rec = rollout_individual(ind, env, sim, rc, s, penalty, tanh_readout)
        rec0 = rollout_individual(null, env, sim, rc, s, penalty, tanh_readout)
        _write_rollout(roll_dir / f"seed_{i:02d}.csv", ind, env, rec, tanh_readout)
        _write_rollout(roll_dir / f"seed_{i:02d}_null.csv", null, env, rec0, tanh_readout)
        per_seed.append({"seed_key": list(s), "return": rec.return_, "null_return": rec0.return_,
                         "diverged": rec.diverged})
    report = dict(comparison, individual=serialize_individual(ind).splitlines(),
                  per_seed=per_seed)
    write_json(run_dir / "report.json", report)
    return EXIT_OK


_RUNNERS = {"simulate": cmd_simulate, "learn": cmd_learn, "evolve": cmd_evolve,
            "eval-expr": cmd_eval_expr}


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="dynlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dynlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config or a previous run's manifest.json")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--plots", action="store_true", help="also write SVG figures")
        p.add_argument("--threads", type=int, default=1, help="max worker threads")
        p.add_argument("--out", help="output root (default: $DYNLAB_OUT or ./runs)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "eval-expr":
            p.add_argument("--individual", help="s-expression file, one tree per line")
    return parser


def prepare(args):
    """Resolve config and create an empty run directory; returns ``(config, run_dir)``."""
    if args.config:
        config, manifest_cmd = cfgmod.load(args.config)
        if manifest_cmd is not None and manifest_cmd != args.command:
            raise ConfigError(f"manifest was written by {manifest_cmd!r}, not {args.command!r}")
    else:
        config = cfgmod.resolve()
    if args.seed is not None:
        config["master_seed"] = args.seed
    if args.command == "eval-expr":
        # fail on a bad individual before touching a previous run directory
        load_individual(args.individual or config["eval_expr"]["individual"])
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    root = Path(cfgmod.output_root(args.out, config))
    run_dir = root / f"{args.command}-seed{config['master_seed']}"
    if run_dir.exists():
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True)
    manifest = cfgmod.manifest(args.command, config, __version__)
    if args.command == "eval-expr" and getattr(args, "individual", None):
        manifest["config"]["eval_expr"]["individual"] = os.path.abspath(args.individual)
    write_json(run_dir / "manifest.json", manifest)
    return config, run_dir


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config, run_dir = prepare(args)
        kwargs = {"individual": args.individual} if args.command == "eval-expr" else {}
        code = _RUNNERS[args.command](config, run_dir, args.threads, **kwargs)
        if args.plots:
            from .plots import plot_run

            plot_run(args.command, run_dir)
    except ConfigError as exc:
        print(f"dynlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as exc:
        print(f"dynlab: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NonFiniteState as exc:
        print(f"dynlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(run_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
