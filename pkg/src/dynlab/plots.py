"""SVG figures regenerated from a run directory's CSV files.

Plots read only the CSVs, so deleting and regenerating them loses nothing.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sde import read_csv  # noqa: E402

# fixed ids and no timestamp, so reruns give identical SVG text
matplotlib.rcParams["svg.hashsalt"] = "dynlab"
_META = {"Date": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def _lines(ax, path, columns=None, ylabel=""):
    header, data = read_csv(path)
    for j, name in enumerate(header[1:], start=1):
        if columns is None or name in columns:
            ax.plot(data[:, 0], data[:, j], label=name, lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    if len(header) <= 8:
        ax.legend(fontsize="small")


def plot_simulate(run_dir):
    fig, ax = plt.subplots(figsize=(6, 3))
    _lines(ax, run_dir / "trajectory.csv", {"s1", "s2"}, "state")
    _save(fig, run_dir / "trajectory.svg")


def plot_learn(run_dir):
    from .cli import PANELS

    labels = {"a": "position", "b": "velocity", "c": "cumulative reward", "d": "neuron state",
              "e": "parameters", "f": "reward / filter / RPE"}
    for seed_dir in sorted(p for p in run_dir.iterdir() if p.name.startswith("seed_")):
        fig, axes = plt.subplots(2, 3, figsize=(12, 6))
        for ax, (key, name) in zip(axes.T.ravel(), PANELS.items()):
            _lines(ax, seed_dir / name, ylabel=labels[key])
            ax.set_title(key, loc="left")
        _save(fig, seed_dir / "panels.svg")


def plot_evolve(run_dir):
    header, data = read_csv(run_dir / "fitness.csv")
    fig, ax = plt.subplots(figsize=(6, 3))
    for island in sorted(set(data[:, 1].astype(int))):
        rows = data[data[:, 1] == island]
        ax.plot(rows[:, 0], rows[:, 2], lw=0.8, label=f"island {island}")
    ax.set_xlabel("generation")
    ax.set_ylabel("best fitness")
    ax.set_yscale("symlog")
    _save(fig, run_dir / "fitness.svg")


def plot_eval_expr(run_dir):
    fig, ax = plt.subplots(figsize=(6, 3))
    _lines(ax, run_dir / "rollouts" / "seed_00.csv", {"s1", "u"}, "position / control")
    _save(fig, run_dir / "rollout_seed_00.svg")


def plot_run(command, run_dir):
    run_dir = Path(run_dir)
    {"simulate": plot_simulate, "learn": plot_learn, "evolve": plot_evolve,
     "eval-expr": plot_eval_expr}[command](run_dir)
