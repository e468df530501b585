#!/usr/bin/env python3
"""Plot generalization error vs perturbation strength from a sweep CSV.

Demonstration only; the CSV schema is documented in README.md. Usage:

    python3 scripts/plot_sweep.py out.csv plot.png
"""

import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main(csv_path: str, out_path: str) -> None:
    series = defaultdict(list)  # (scheme, engine) -> [(sigma, E)]
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["status"] != "converged":
                continue
            series[(row["scheme"], row["engine"])].append(
                (float(row["sigma_eta_bar"]), float(row["E_generalization"]))
            )

    fig, ax = plt.subplots(figsize=(6, 4))
    for (scheme, engine), points in sorted(series.items()):
        points.sort()
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        style = "-" if engine == "se" else "o"
        ax.plot(xs, ys, style, label=f"{scheme} ({engine})", alpha=0.8)
    ax.set_xlabel(r"$\sigma_\eta$")
    ax.set_ylabel("generalization error")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    print(f"wrote {out_path}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
