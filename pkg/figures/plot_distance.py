#!/usr/bin/env python3
"""Planar distance between two vehicles over time, with a threshold line.

Usage:
    plot_distance.py traj_a.csv traj_b.csv --threshold 0.64 --out figure_base

Accepts ibckit trajectory CSVs (t, x1, x2, ...) and obstacle traces
(t, x, y); the second track is resampled onto the first one's time grid
by linear interpolation. Writes figure_base.png and figure_base.svg.
"""

import argparse
import sys

import numpy as np

import figstyle
import matplotlib.pyplot as plt


def load_track(path: str):
    """(t, xy) from either a trajectory CSV or an obstacle trace CSV."""
    with open(path) as f:
        names = f.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if names[1:3] == ["x", "y"] or names[1:3] == ["x1", "x2"]:
        return data[:, 0], data[:, 1:3]
    raise SystemExit(f"{path}: expected t,x,y or t,x1,x2,... columns")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("traj_a")
    ap.add_argument("traj_b")
    ap.add_argument("--threshold", type=float, default=0.64)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    ta, xa = load_track(args.traj_a)
    tb, xb = load_track(args.traj_b)
    xb_on_a = np.column_stack(
        [np.interp(ta, tb, xb[:, 0]), np.interp(ta, tb, xb[:, 1])]
    )
    dist = np.linalg.norm(xa - xb_on_a, axis=1)

    fig, ax = plt.subplots()
    ax.plot(ta, dist, color="tab:blue", label="distance")
    ax.axhline(args.threshold, color="tab:red", ls="--", label=f"threshold {args.threshold}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("distance [m]")
    ax.set_ylim(bottom=0.0)
    ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    print(f"min distance: {dist.min():.17g}")
    for path in figstyle.save_figure(fig, args.out):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
