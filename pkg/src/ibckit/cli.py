"""Command-line surface: analysis, certification, construction, profiles,
simulation runs, and the obstacle-avoidance harness.

Every command validates its JSON inputs against a closed schema (unknown
fields are rejected), writes deterministic outputs, and drops a manifest
next to the main output recording input hashes, versions, and timing.
"""

import argparse
import hashlib
import json
import logging
import os
import sys as _sys
import time

import numpy as np

from . import __version__
from . import ibc, linsys
from .feedback import (
    AssignmentFails,
    DegenerateSimplex,
    FeedbackError,
    OutsideDomain,
    SingularGramian,
    build_pwl,
    eval_pwl,
    gramian_steering,
)
from .geometry import GeometryError, Polytope
from .ibc import (
    AlphaTooSmall,
    ConstructionError,
    InputSet,
    NoFeasibleScale,
    NotControllable,
    UNBOUNDED,
    check_ibc,
    construct_ibc_polytope,
)
from .linsys import AffineSystem, DecompositionFails, NoShiftExists, shift_to_linear
from .lp import LPFailure
from .models import AxisSpec, QuadrotorParams, UnicycleParams, safe_speed_profile
from .sim import (
    ObstacleTrace,
    ReplanInfeasible,
    SimulationError,
    SteeringFailed,
    crossing_sinusoids,
    integrate,
    linear_field,
    obstacle_avoidance_run,
    pd_baseline_unicycle,
    safe_steer,
    unicycle_mission,
)

log = logging.getLogger("ibckit")

EXIT_SCHEMA = 2
EXIT_DECOMPOSITION = 3
EXIT_LP = 4
EXIT_CONSTRUCTION = 5
EXIT_RESCALE = 6
EXIT_FEEDBACK = 7
EXIT_STEERING = 8
EXIT_REPLAN = 9
EXIT_GEOMETRY = 10


class SchemaError(Exception):
    pass


def _check_schema(doc: dict, fields: dict, where: str) -> None:
    """fields: name -> required flag. Unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    unknown = sorted(set(doc) - set(fields))
    if unknown:
        raise SchemaError(f"{where}: unknown fields {unknown}")
    missing = sorted(k for k, req in fields.items() if req and k not in doc)
    if missing:
        raise SchemaError(f"{where}: missing fields {missing}")


def _load_json(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"{path}: {e}") from e


def _dump_json(doc: dict, path: str) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


def _write_manifest(command, args, inputs, outputs, t_start, seed) -> None:
    if not outputs:
        return
    manifest = {
        "command": command,
        "argv": list(args),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": sorted(outputs),
        "versions": {
            "ibckit": __version__,
            "numpy": np.__version__,
            "python": _sys.version.split()[0],
        },
        "wall_time_s": time.perf_counter() - t_start,
        "seed": seed,
    }
    _dump_json(manifest, outputs[0] + ".manifest.json")


def _load_system(path: str) -> tuple[AffineSystem, linsys.LinearSystem]:
    doc = _load_json(path)
    _check_schema(doc, {"A": True, "B": True, "a": False}, path)
    aff = AffineSystem.from_dict(doc)
    return aff, shift_to_linear(aff)


def _load_polytope(path: str) -> Polytope:
    doc = _load_json(path)
    _check_schema(doc, {"dim": False, "vertices": False, "halfspaces": False}, path)
    return Polytope.from_dict(doc)


def _parse_input_box(text: str) -> InputSet:
    vals = [float(v) for v in text.split(",")]
    if len(vals) % 2:
        raise SchemaError("--input-box needs lo,hi pairs")
    lo, hi = vals[0::2], vals[1::2]
    return InputSet.box(lo, hi)


def _parse_lambda_grid(text: str):
    vals = tuple(float(v) for v in text.split(","))
    if not vals or any(v <= 0 for v in vals):
        raise SchemaError("--lambda-grid needs positive values")
    return vals


def cmd_analyze(args) -> int:
    _, sys_ = _load_system(args.system)
    O = linsys.equilibrium_set(sys_)
    spans = linsys.spans_state_space(sys_)
    report = {
        "n": sys_.n,
        "m": sys_.m,
        "controllable": linsys.is_controllable(sys_),
        "dim_O": int(O.shape[1]),
        "O_plus_B_full": bool(spans),
    }
    if spans:
        dec = linsys.decompose(sys_)
        report["T_condition"] = float(np.linalg.cond(dec.T))
    for k, v in report.items():
        print(f"{k}: {v}")
    if args.out:
        _dump_json(report, args.out)
        _write_manifest("analyze", args.argv, [args.system], [args.out], args.t0, args.seed)
    if not spans:
        raise DecompositionFails("O + Im(B) != R^n")
    return 0


def cmd_check(args) -> int:
    _, sys_ = _load_system(args.system)
    X = _load_polytope(args.polytope)
    U = _parse_input_box(args.input_box) if args.input_box else UNBOUNDED
    cert = check_ibc(sys_, X, U, assume_input_mild=args.assume_input_mild)
    print(f"verdict: {cert.verdict.value}" + (f" (route {cert.route})" if cert.route else ""))
    print(f"{'vertex':<28}{'in_O':<7}{'inv':<12}{'bwd':<12}{'dip':<7}")
    for r in cert.records:
        print(
            f"{np.array2string(r.vertex, precision=4):<28}{str(r.in_O):<7}"
            f"{r.invariance.margin:<12.3e}{r.backward.margin:<12.3e}"
            f"{str(r.cone_dip.feasible):<7}"
        )
    for i in cert.failing:
        print(f"failing vertex: {cert.records[i].vertex.tolist()}")
    if args.out:
        _dump_json(cert.to_dict(), args.out)
        _write_manifest(
            "check", args.argv, [args.system, args.polytope], [args.out], args.t0, args.seed
        )
    return 0


def cmd_construct(args) -> int:
    _, sys_ = _load_system(args.system)
    P = _load_polytope(args.pbox)
    X = construct_ibc_polytope(sys_, P, args.alpha)
    out = args.out or "polytope.json"
    _dump_json(X.to_dict(), out)
    print(f"constructed polytope with {len(X.vertices)} vertices -> {out}")
    _write_manifest("construct", args.argv, [args.system, args.pbox], [out], args.t0, args.seed)
    return 0


def cmd_profile(args) -> int:
    doc = _load_json(args.axis)
    _check_schema(doc, {"pos": True, "vel": True, "input": True, "alpha": True}, args.axis)
    spec = AxisSpec.from_dict(doc)
    grid = _parse_lambda_grid(args.lambda_grid) if args.lambda_grid else ibc.DEFAULT_LAMBDA_GRID
    prof = safe_speed_profile(spec, lam_grid=grid)
    out = args.out or "profile"
    region_path, ctrl_path = out + ".region.json", out + ".controller.json"
    _dump_json(prof.absolute_region().to_dict(), region_path)
    _dump_json(prof.controller.to_dict(), ctrl_path)
    print(f"lambda*: {prof.lam}")
    print(f"region -> {region_path}\ncontroller -> {ctrl_path}")
    _write_manifest(
        "profile", args.argv, [args.axis], [region_path, ctrl_path], args.t0, args.seed
    )
    return 0


_SCENARIO_FIELDS = {
    "system": False,
    "model": False,
    "region": False,
    "axis": False,
    "policy": True,
    "x0": False,
    "xf": False,
    "obstacle": False,
    "dt": False,
    "T": False,
    "seed": False,
    "params": False,
    "safety_radius": False,
    "tick": False,
    "replan": False,
    "reference": False,
}


def _scenario_system(doc) -> linsys.LinearSystem:
    if "system" in doc:
        return shift_to_linear(AffineSystem.from_dict(doc["system"]))
    from .models import double_integrator

    return double_integrator()


def _scenario_region(doc):
    if "region" in doc:
        return Polytope.from_dict(doc["region"]), None
    if "axis" in doc:
        prof = safe_speed_profile(AxisSpec.from_dict(doc["axis"]))
        return prof.region, prof
    return None, None


def cmd_simulate(args) -> int:
    doc = _load_json(args.scenario)
    _check_schema(doc, _SCENARIO_FIELDS, args.scenario)
    policy_name = doc["policy"]
    dt = float(doc.get("dt", args.dt or 1e-3))
    T = float(doc.get("T", args.horizon or 10.0))
    out = args.out or "trajectory.csv"

    if policy_name == "unicycle_mission":
        p = UnicycleParams(**doc.get("params", {}))
        prof = safe_speed_profile(p.axis_spec())
        traj = unicycle_mission(p, (prof, prof), doc["x0"], doc["xf"], dt=dt)
    elif policy_name == "pd_unicycle":
        p = UnicycleParams(**doc.get("params", {}))
        traj = pd_baseline_unicycle(p, doc["x0"], doc["xf"], dt=dt, T=T)
    else:
        sys_ = _scenario_system(doc)
        region, prof = _scenario_region(doc)
        x0 = np.asarray(doc["x0"], dtype=float)
        fld = linear_field(sys_)
        if policy_name == "zero":
            traj = integrate(fld, lambda t, x: np.zeros(sys_.m), x0, dt, T, region=region)
        elif policy_name == "pwl":
            if region is None:
                raise SchemaError("pwl policy needs a region or axis entry")
            ctrl = prof.controller if prof else build_pwl(sys_, region)
            traj = integrate(fld, lambda t, x: eval_pwl(ctrl, x), x0, dt, T, region=region)
        elif policy_name == "gramian":
            plan = gramian_steering(sys_, x0, np.asarray(doc["xf"], dtype=float), T)
            traj = integrate(fld, plan.as_policy(dt), x0, dt, T, region=region)
        elif policy_name == "safe_steer":
            if region is None:
                raise SchemaError("safe_steer needs a region or axis entry")
            ctrl = prof.controller if prof else build_pwl(sys_, region)
            traj = safe_steer(sys_, region, ctrl, x0, np.asarray(doc["xf"], dtype=float), T, dt=dt)
        else:
            raise SchemaError(f"unknown policy '{policy_name}'")
    traj.to_csv(out)
    print(f"{len(traj.t)} samples, violations: {int(traj.violation.sum())} -> {out}")
    _write_manifest("simulate", args.argv, [args.scenario], [out], args.t0, args.seed)
    return 0


def cmd_avoid(args) -> int:
    doc = _load_json(args.scenario)
    _check_schema(doc, _SCENARIO_FIELDS, args.scenario)
    p = QuadrotorParams(**doc.get("params", {}))
    trace = ObstacleTrace.from_csv(args.obstacle)
    ref_cfg = doc.get("reference", {})
    T = float(doc.get("T", args.horizon or 20.0))
    ref, _ = crossing_sinusoids(
        amplitude=float(ref_cfg.get("amplitude", 1.5)),
        freq=float(ref_cfg.get("freq", 0.1)),
        phase_gap=float(ref_cfg.get("phase_gap", 0.3)),
        T=T,
    )
    traj, dmin = obstacle_avoidance_run(
        p,
        ref,
        trace,
        safety_radius=float(doc.get("safety_radius", 0.64)),
        T=T,
        tick=float(doc.get("tick", 1.0 / 70.0)),
        replan=bool(doc.get("replan", True)),
    )
    out = args.out or "trajectory.csv"
    traj.to_csv(out)
    rtimes = traj.metadata["rebuild_times"]
    summary = {
        "min_distance": dmin,
        "violations": int(traj.violation.sum()),
        "replan": bool(doc.get("replan", True)),
        "rebuilds": len(rtimes),
        "rebuild_median_ms": 1e3 * float(np.median(rtimes)) if rtimes else 0.0,
    }
    _dump_json(summary, out + ".summary.json")
    print(json.dumps(summary, indent=2, sort_keys=True))
    _write_manifest(
        "avoid", args.argv, [args.scenario, args.obstacle], [out], args.t0, args.seed
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ibckit",
        description="Safe controllable regions for affine systems",
    )
    ap.add_argument("--seed", type=int, default=0, help="seed recorded in manifests")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="controllability and equilibrium-span report")
    p.add_argument("system")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("check", help="IBC certificate for a polytope")
    p.add_argument("system")
    p.add_argument("polytope")
    p.add_argument("--input-box", help="lo,hi per input, comma separated")
    p.add_argument("--assume-input-mild", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("construct", help="grow an IBC polytope from a seed box")
    p.add_argument("system")
    p.add_argument("pbox")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_construct)

    p = sub.add_parser("profile", help="per-axis safe speed profile")
    p.add_argument("axis")
    p.add_argument("--lambda-grid", help="comma separated trial factors")
    p.add_argument("--out", help="output path prefix")
    p.set_defaults(fn=cmd_profile)

    p = sub.add_parser("simulate", help="closed-loop run from a scenario file")
    p.add_argument("scenario")
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("avoid", help="dynamic-obstacle replanning run")
    p.add_argument("scenario")
    p.add_argument("obstacle")
    p.add_argument("--horizon", type=float)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_avoid)
    return ap


_ERROR_EXITS = [
    (SchemaError, EXIT_SCHEMA),
    (DecompositionFails, EXIT_DECOMPOSITION),
    (NoShiftExists, EXIT_DECOMPOSITION),
    (LPFailure, EXIT_LP),
    (NoFeasibleScale, EXIT_RESCALE),
    (AlphaTooSmall, EXIT_CONSTRUCTION),
    (NotControllable, EXIT_CONSTRUCTION),
    (ConstructionError, EXIT_CONSTRUCTION),
    (AssignmentFails, EXIT_FEEDBACK),
    (DegenerateSimplex, EXIT_FEEDBACK),
    (OutsideDomain, EXIT_FEEDBACK),
    (SingularGramian, EXIT_FEEDBACK),
    (FeedbackError, EXIT_FEEDBACK),
    (ReplanInfeasible, EXIT_REPLAN),
    (SteeringFailed, EXIT_STEERING),
    (SimulationError, EXIT_STEERING),
    (GeometryError, EXIT_GEOMETRY),
    (ValueError, EXIT_SCHEMA),
]


def main(argv=None) -> int:
    argv = list(_sys.argv[1:] if argv is None else argv)
    level = os.environ.get("IBCKIT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    ap = build_parser()
    args = ap.parse_args(argv)
    args.argv = argv
    args.t0 = time.perf_counter()
    try:
        return args.fn(args)
    except Exception as e:  # map module errors onto stable exit codes
        for klass, code in _ERROR_EXITS:
            if isinstance(e, klass):
                log.error("%s: %s", type(e).__name__, e)
                print(f"error: {type(e).__name__}: {e}", file=_sys.stderr)
                return code
        raise


if __name__ == "__main__":
    raise SystemExit(main())
