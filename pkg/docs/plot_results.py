"""Quick look at a result table. Needs the `plot` extra.

    python docs/plot_results.py ising-memory.csv [figure.png]
"""

import json
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from catising.logger import metadata_path, read_csv


def load(path: Path) -> tuple[tuple[str, ...], list[tuple], dict]:
    metadata = json.loads(metadata_path(path).read_text(encoding="utf-8"))
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        return tuple(data["columns"]), [tuple(row) for row in data["rows"]], metadata
    columns, rows = read_csv(path)
    return columns, rows, metadata


def column(columns, rows, name):
    return np.array([row[columns.index(name)] for row in rows])


def plot_lines(ax, columns, rows, x, y, group):
    groups = column(columns, rows, group)
    for key in dict.fromkeys(groups):
        mask = groups == key
        ax.plot(column(columns, rows, x)[mask], column(columns, rows, y)[mask], "o-", label=f"{group} = {key}")
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.legend()


def plot_phase(ax, columns, rows):
    ranks = {"trivial": 0, "cat_only": 1, "ferro_cat": 2}
    phase = np.array([ranks[p] for p in column(columns, rows, "phase")])
    ax.scatter(column(columns, rows, "kappa1"), column(columns, rows, "kappad"), c=phase, marker="s", vmin=0, vmax=2)
    ax.set_xlabel("kappa1")
    ax.set_ylabel("kappad")


def main():
    if len(sys.argv) not in (2, 3):
        sys.exit(__doc__)
    path = Path(sys.argv[1])
    columns, rows, metadata = load(path)
    kind = metadata["spec"]["kind"]

    fig, ax = plt.subplots()
    if kind == "ising-memory":
        x = metadata["extras"].get("sweep_axis", "M")
        ax.errorbar(column(columns, rows, x), column(columns, rows, "success_prob"),
                    yerr=column(columns, rows, "stderr"), fmt="o-")
        ax.set_xlabel(x)
        ax.set_ylabel("success_prob")
    elif kind == "cavity-steady":
        plot_lines(ax, columns, rows, "N", "overlap", "kappa1")
    elif kind == "gap-scan":
        plot_lines(ax, columns, rows, "N", "gap", "model")
    elif kind == "toy-fidelity":
        plot_lines(ax, columns, rows, "N", "fidelity", "recovery_mode")
    elif kind == "meanfield-phase":
        plot_phase(ax, columns, rows)
    else:
        sys.exit(f"nothing to plot for {kind}")
    ax.set_title(path.name)
    fig.tight_layout()
    if len(sys.argv) == 3:
        fig.savefig(sys.argv[2])
    else:
        plt.show()


if __name__ == "__main__":
    main()
