#!/usr/bin/env python3
"""Plot mean MAE with 95% intervals against r from a sweep's aggregate.csv.

usage: plot_results.py OUT_DIR [--png FILE]
"""
import argparse
import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir")
    ap.add_argument("--png", default=None)
    args = ap.parse_args()

    rows = defaultdict(list)
    with open(os.path.join(args.out_dir, "aggregate.csv")) as f:
        for r in csv.DictReader(f):
            if not r["mean_mae"]:
                continue
            rows[r["method"]].append(
                (float(r["r"]), float(r["mean_mae"]), float(r["ci_low"]), float(r["ci_high"]))
            )

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for method, pts in sorted(rows.items()):
        pts.sort()
        r = [p[0] for p in pts]
        m = [p[1] for p in pts]
        err = [[p[1] - p[2] for p in pts], [p[3] - p[1] for p in pts]]
        ax.errorbar(r, m, yerr=err, marker="o", capsize=3, label=method)
    ax.set_xlabel("r = n_t / n_s")
    ax.set_ylabel("mean MAE")
    ax.legend()
    fig.tight_layout()
    out = args.png or os.path.join(args.out_dir, "mae.png")
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
