"""Shared matplotlib configuration for the batch figure scripts.

Scripts only read the toolkit's CSV/JSON outputs; rendering is pinned to
the Agg backend with hashed-id SVG output so reruns on identical inputs
produce identical files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update(
    {
        "figure.figsize": (4.8, 3.6),
        "figure.dpi": 150,
        "savefig.dpi": 150,
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "lines.linewidth": 1.3,
        "svg.hashsalt": "ibckit-figures",
    }
)

REGION_COLORS = ["black", "tab:red", "tab:purple"]
TRAJ_COLORS = ["tab:blue", "tab:green", "tab:orange", "tab:cyan", "magenta"]


def save_figure(fig, out_base: str) -> list[str]:
    """Write PNG and SVG next to each other; returns the paths."""
    paths = []
    for ext in ("png", "svg"):
        path = f"{out_base}.{ext}"
        fig.savefig(path, metadata={"Date": None} if ext == "svg" else None)
        paths.append(path)
    return paths
