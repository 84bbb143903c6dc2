import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib
import numpy as np

from pushforward.envs.latent_riverswim import LatentRiverSwimSpec, encoder_table


matplotlib.use("Agg")
# svg ids are derived from this salt instead of a random one, and text is emitted as paths, so equal inputs give
# equal bytes
matplotlib.rcParams.update({"svg.hashsalt": "pushforward", "svg.fonttype": "path", "axes.unicode_minus": False})

import matplotlib.pyplot as plt  # noqa: E402


@dataclass(frozen=True)
class Curve:
    env: str
    agent: str
    steps: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray

    @property
    def label(self) -> str:
        return f"{self.env} / {self.agent}"


def read_aggregate_csv(path: str) -> List[Curve]:
    """One curve per (env, agent) in an aggregate CSV, rows ordered by step."""
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ValueError(f"{path} has no rows")

    grouped: Dict[Tuple[str, str], List[Tuple[int, float, float]]] = {}
    for row in rows:
        try:
            point = (int(row["step"]), float(row["mean"]), float(row["stderr"]))
            grouped.setdefault((row["env"], row["agent"]), []).append(point)
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"{path}: malformed aggregate row {row}") from e

    curves = []
    for (env, agent), points in grouped.items():
        points.sort()
        steps, mean, stderr = (np.array(c) for c in zip(*points))
        curves.append(Curve(env, agent, steps, mean, stderr))
    return curves


def check_common_grid(curves: Sequence[Curve]) -> np.ndarray:
    if not curves:
        raise ValueError("nothing to plot")
    grid = curves[0].steps
    for c in curves[1:]:
        if not np.array_equal(c.steps, grid):
            raise ValueError(f"step grid of {c.label} differs from that of {curves[0].label}")
    return grid


def _save_svg(fig, output_path: str):
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_learning_curves(csv_paths: Sequence[str], output_path: str, title: str = "") -> int:
    """
    Mean visitation frequency per (env, agent) with a shaded ±stderr band. All curves must share one step grid.
    Returns the number of curves drawn.
    """
    curves = [c for path in csv_paths for c in read_aggregate_csv(path)]
    check_common_grid(curves)
    curves.sort(key=lambda c: (c.env, c.agent))

    fig, ax = plt.subplots(figsize=(7, 4.2), constrained_layout=True)
    for c in curves:
        (line,) = ax.plot(c.steps, c.mean, label=c.label, linewidth=1.5)
        ax.fill_between(c.steps, c.mean - c.stderr, c.mean + c.stderr, color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("Interaction step")
    ax.set_ylabel("Visitation frequency of the most desired state")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    _save_svg(fig, output_path)
    return len(curves)


def plot_latent_map(spec: LatentRiverSwimSpec, output_path: str):
    """The grid of observations (i, j) colored and labeled by the latent state they encode to."""
    table = encoder_table(spec)
    fig, ax = plt.subplots(figsize=(5, 5), constrained_layout=True)
    ax.imshow(table, cmap="viridis", origin="lower", extent=(0.5, spec.n + 0.5, 0.5, spec.n + 0.5))
    for i in range(spec.n):
        for j in range(spec.n):
            ax.text(j + 1, i + 1, str(table[i, j]), ha="center", va="center", fontsize=8, color="white")
    ax.set_xlabel("j")
    ax.set_ylabel("i")
    ax.set_title(f"Latent state of each observation (n={spec.n}, α={spec.mix_alpha})")
    _save_svg(fig, output_path)
