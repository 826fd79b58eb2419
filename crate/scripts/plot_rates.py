#!/usr/bin/env python3
"""Log-log plot of error ladders written by `rough-mlmc strong-rate/weak-rate`.

Usage: plot_rates.py ladder.csv [more.csv ...] [--out figure.png]
Each CSV has the columns mesh, error, stderr.
"""
import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_ladder(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return ([float(r["mesh"]) for r in rows],
            [float(r["error"]) for r in rows],
            [float(r["stderr"]) for r in rows])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("ladders", nargs="+")
    parser.add_argument("--out", default="rates.png")
    args = parser.parse_args()

    fig, ax = plt.subplots(figsize=(5, 4))
    for path in args.ladders:
        mesh, err, se = read_ladder(path)
        ax.errorbar(mesh, err, yerr=[1.96 * s for s in se], marker="o", capsize=2, label=path)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("mesh")
    ax.set_ylabel("error")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
