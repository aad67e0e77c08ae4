"""Fixtures generating figure inputs through the toolkit's CLI only."""

import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

FIGDIR = Path(__file__).resolve().parents[1]


def run_cli(*args, cwd=None):
    proc = subprocess.run(
        [sys.executable, "-m", "ibckit.cli", *map(str, args)],
        capture_output=True,
        text=True,
        cwd=cwd,
    )
    assert proc.returncode == 0, proc.stderr + proc.stdout
    return proc


def run_script(name, *args, cwd=None):
    return subprocess.run(
        [sys.executable, str(FIGDIR / name), *map(str, args)],
        capture_output=True,
        text=True,
        cwd=cwd or FIGDIR,
    )


@pytest.fixture(scope="session")
def data(tmp_path_factory):
    """Region JSONs and trajectory CSVs produced by the primary CLI."""
    root = tmp_path_factory.mktemp("figdata")

    def write(name, doc):
        path = root / name
        path.write_text(json.dumps(doc))
        return path

    system = write("system.json", {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "a": [0, 0]})
    pbox = write(
        "pbox.json", {"vertices": [[-0.8, -1], [0.8, -1], [0.8, 1], [-0.8, 1]]}
    )
    hex_region = root / "hex.json"
    run_cli("construct", system, pbox, "--alpha", "1.25", "--out", hex_region)

    scen = write(
        "scen_pwl.json",
        {
            "policy": "pwl",
            "region": json.loads(hex_region.read_text()),
            "x0": [0.79, 0.99],
            "dt": 1e-3,
            "T": 5.0,
        },
    )
    pwl_traj = root / "pwl.csv"
    run_cli("simulate", scen, "--out", pwl_traj)

    half = 5 * math.pi / 12
    arm_loose = write(
        "arm_loose.json", {"pos": [-half, half], "vel": [-1, 1], "input": [-5, 5], "alpha": 1.2}
    )
    arm_tight = write(
        "arm_tight.json", {"pos": [-half, half], "vel": [-1, 1], "input": [-3, 3], "alpha": 1.2}
    )
    run_cli("profile", arm_loose, "--out", root / "armX")
    run_cli("profile", arm_tight, "--out", root / "armXp")

    from ibckit.sim import crossing_sinusoids  # trace synthesis only

    _, trace = crossing_sinusoids(T=6.0)
    obstacle = root / "obstacle.csv"
    trace.to_csv(obstacle)
    scen_on = write("scen_on.json", {"policy": "avoid", "T": 6.0, "replan": True})
    scen_off = write("scen_off.json", {"policy": "avoid", "T": 6.0, "replan": False})
    run_cli("avoid", scen_on, obstacle, "--out", root / "avoid_on.csv")
    run_cli("avoid", scen_off, obstacle, "--out", root / "avoid_off.csv")

    return {
        "root": root,
        "hex_region": hex_region,
        "pwl_traj": pwl_traj,
        "armX": root / "armX.region.json",
        "armXp": root / "armXp.region.json",
        "obstacle": obstacle,
        "avoid_on": root / "avoid_on.csv",
        "avoid_off": root / "avoid_off.csv",
    }
