#!/usr/bin/env python3
"""Phase portrait: region boundaries, the zero-speed line, and
trajectories from ibckit CSV output.

Usage:
    plot_phase.py --region X.json [--region X2.json ...]
                  [--traj run.csv ...] --out figure_base
                  [--xlabel L] [--ylabel L] [--xlim lo,hi] [--ylim lo,hi]

Writes figure_base.png and figure_base.svg. Inputs are never modified.
"""

import argparse
import json
import sys

import numpy as np

import figstyle
import matplotlib.pyplot as plt


def load_region(path: str) -> np.ndarray:
    """Return the region's vertices ordered around the boundary."""
    with open(path) as f:
        doc = json.load(f)
    verts = np.asarray(doc["vertices"], dtype=float)
    if verts.shape[1] != 2:
        raise SystemExit(f"{path}: phase portraits need 2-D regions")
    center = verts.mean(axis=0)
    ang = np.arctan2(verts[:, 1] - center[1], verts[:, 0] - center[0])
    return verts[np.argsort(ang)]


def load_trajectory(path: str) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:3]  # (x1, x2) columns


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--region", action="append", required=True)
    ap.add_argument("--traj", action="append", default=[])
    ap.add_argument("--out", required=True)
    ap.add_argument("--xlabel", default="position")
    ap.add_argument("--ylabel", default="speed")
    ap.add_argument("--xlim")
    ap.add_argument("--ylim")
    args = ap.parse_args(argv)

    fig, ax = plt.subplots()
    span = [np.inf, -np.inf]
    for k, path in enumerate(args.region):
        ring = load_region(path)
        closed = np.vstack([ring, ring[:1]])
        color = figstyle.REGION_COLORS[k % len(figstyle.REGION_COLORS)]
        ax.plot(closed[:, 0], closed[:, 1], color=color, ls="--", label=f"region {k+1}")
        span = [min(span[0], ring[:, 0].min()), max(span[1], ring[:, 0].max())]
    ax.plot(span, [0.0, 0.0], color="gray", lw=0.8, label="zero-speed set")

    for k, path in enumerate(args.traj):
        xy = load_trajectory(path)
        color = figstyle.TRAJ_COLORS[k % len(figstyle.TRAJ_COLORS)]
        ax.plot(xy[:, 0], xy[:, 1], color=color, label=f"run {k+1}")
        ax.plot(xy[0, 0], xy[0, 1], marker="x", ms=7, color=color)

    ax.set_xlabel(args.xlabel)
    ax.set_ylabel(args.ylabel)
    if args.xlim:
        ax.set_xlim(*map(float, args.xlim.split(",")))
    if args.ylim:
        ax.set_ylim(*map(float, args.ylim.split(",")))
    ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    for path in figstyle.save_figure(fig, args.out):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
