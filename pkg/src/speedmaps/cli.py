"""Command-line entry point: ``speedmaps {simulate,compare,localize,goal}``.

Exit codes: 0 success, 1 bad input, 2 scenario timed out.
"""
from __future__ import annotations

import argparse
import math
import pathlib
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .behavior import Controller
from .errors import SpeedMapsError
from .geometry import Pose2D, Transform3D, qr_localize
from .qr_payload import parse_payload
from .scenario import load_scenario
from .semantic import goal_for_label
from .simulator import run_scenario
from .svg import trajectory_svg

EXIT_OK, EXIT_ERROR, EXIT_TIMEOUT = 0, 1, 2


def _transform(text: str) -> Transform3D:
    try:
        v = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise SpeedMapsError(f"non-numeric transform {text!r}") from None
    if len(v) != 7:
        raise SpeedMapsError(f"transform needs 7 numbers 'x y z qw qx qy qz', got {len(v)}")
    if not all(math.isfinite(x) for x in v):
        raise SpeedMapsError("transform values must be finite")
    n = math.sqrt(sum(q * q for q in v[3:]))
    if abs(n - 1.0) > 1e-3:
        raise SpeedMapsError(f"transform quaternion is not unit length (norm {n:.6g})")
    return Transform3D(tuple(v[:3]), tuple(v[3:]))


def _pose(text: str) -> Pose2D:
    try:
        v = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise SpeedMapsError(f"non-numeric pose {text!r}") from None
    if len(v) != 3:
        raise SpeedMapsError("pose needs 'x y theta'")
    return Pose2D(*v)


def _load(args):
    cfg = load_scenario(args.scenario)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _run(cfg, controller, oracle):
    return run_scenario(cfg, controller, oracle)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    controller = Controller.parse(args.controller)
    log = run_scenario(cfg, controller, True if args.oracle_tracks else None)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ticks.csv").write_text(log.to_csv())
    (out / "summary.txt").write_text(log.summary.line() + "\n")
    if args.svg:
        (out / "trajectory.svg").write_text(trajectory_svg(cfg.grid, log))
    print(log.summary.line())
    return EXIT_TIMEOUT if log.summary.timeout else EXIT_OK


def format_table(summaries) -> str:
    cols = ("controller", "completion_time", "min_human_distance", "max_accel", "timeout",
            "red_zone_max_speed", "collisions")
    rows = [cols]
    for s in summaries:
        rows.append(tuple(f"{getattr(s, c):.3f}" if isinstance(getattr(s, c), float)
                          else str(getattr(s, c)).lower() if isinstance(getattr(s, c), bool)
                          else str(getattr(s, c)) for c in cols))
    widths = [max(len(r[k]) for r in rows) for k in range(len(cols))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def cmd_compare(args) -> int:
    cfg = _load(args)
    names = [c for c in _split_controllers(args.controllers) if c]
    if not names:
        raise SpeedMapsError("no controllers given")
    controllers = [Controller.parse(n) for n in names]
    oracle = True if args.oracle_tracks else None
    if args.jobs > 1 and len(controllers) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            logs = list(ex.map(_run, [cfg] * len(controllers), controllers,
                               [oracle] * len(controllers)))
    else:
        logs = [run_scenario(cfg, c, oracle) for c in controllers]
    sys.stdout.write(f"scenario: {cfg.name}  seed: {cfg.seed}\n")
    sys.stdout.write(format_table([lg.summary for lg in logs]))
    return EXIT_TIMEOUT if any(lg.summary.timeout for lg in logs) else EXIT_OK


def _split_controllers(text: str) -> list:
    """Split on commas outside parentheses, so ``fixed_max(1.0),speedmap`` works."""
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    out.append(cur.strip())
    return out


def cmd_localize(args) -> int:
    try:
        text = pathlib.Path(args.payload).read_text()
    except OSError as exc:
        raise SpeedMapsError(f"cannot read payload: {exc}") from exc
    payload = parse_payload(text)
    pose = qr_localize(payload.tag_pose, _transform(args.cam_t_qr), _transform(args.robot_t_cam))
    print(_fmt_pose(pose))
    return EXIT_OK


def _fmt_pose(p: Pose2D) -> str:
    # avoid printing "-0.000000"
    return " ".join(f"{v:.6f}" if round(v, 6) != 0 else "0.000000" for v in (p.x, p.y, p.theta))


def cmd_goal(args) -> int:
    cfg = load_scenario(args.scenario)
    goal = goal_for_label(cfg.semantic, cfg.grid, _pose(args.robot), args.label, cfg.behavior.inflation)
    print(_fmt_pose(goal))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="speedmaps", description="Speed-map guide robot simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run one scenario with one controller")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--controller", required=True,
                    help="fixed_max[:v] | speedmap | guidance_profile | guidance_fixed")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--svg", action="store_true")
    sp.add_argument("--oracle-tracks", action="store_true")
    sp.set_defaults(func=cmd_simulate)

    cp = sub.add_parser("compare", help="run several controllers on one scenario")
    cp.add_argument("--scenario", required=True)
    cp.add_argument("--controllers", required=True, help="comma-separated controller names")
    cp.add_argument("--seed", type=int, default=None)
    cp.add_argument("--oracle-tracks", action="store_true")
    cp.add_argument("--jobs", type=int, default=1, help="parallel runs (independent processes)")
    cp.set_defaults(func=cmd_compare)

    lp = sub.add_parser("localize", help="robot pose from a QR payload and camera transforms")
    lp.add_argument("--payload", required=True)
    lp.add_argument("--cam-t-qr", required=True)
    lp.add_argument("--robot-t-cam", required=True)
    lp.set_defaults(func=cmd_localize)

    gp = sub.add_parser("goal", help="navigation goal for a semantic label")
    gp.add_argument("--scenario", required=True)
    gp.add_argument("--robot", required=True, help='"x y theta"')
    gp.add_argument("--label", required=True)
    gp.set_defaults(func=cmd_goal)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; 2 is reserved for timeouts here
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    try:
        return args.func(args)
    except (SpeedMapsError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
