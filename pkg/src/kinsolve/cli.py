"""``kinsolve`` command line: JSON in, JSON or CSV out.

Exit status is 0 on success, 1 for bad input (usage, unreadable or invalid
files, unwritable output) and 2 when the numerics fail.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, formats, so3
from .camera import ice
from .errors import InputError, NumericalError
from .harness import ScenarioConfig, default_config, run_bench
from .hybrik import error_decomposition, solve
from .hybrikx import solve_wholebody, split_subtrees
from .skeleton import fk


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _tree(args):
    return formats.load_skeleton(args.tree)


def _solve_payload(tree, report):
    res = report.residual
    return {
        "mode": report.mode,
        "names": list(tree.names),
        "rotations": formats.rotations_to_json(report.rots),
        "joints": formats.pose_to_json(report.recon),
        "mpjpe_mm": float(np.linalg.norm(res, axis=1).mean() * 1000.0),
        "max_residual_m": float(np.linalg.norm(res, axis=1).max()),
    }


def cmd_fk(args):
    tree, rest = _tree(args)
    rots = formats.parse_rotations(formats.read_text(args.rotations), tree.K, args.rotations)
    root = None if args.root is None else _floats(args.root, 3, "--root")
    joints, _ = fk(tree, rest, rots, root=root)
    return formats.dumps({"joints": formats.pose_to_json(joints)})


def _load_solve_inputs(args, tree, require_markers=False):
    joints, markers = formats.parse_target(formats.read_text(args.target), tree.K, args.target, require_markers)
    phi = formats.parse_twists(formats.read_text(args.twists), tree.K, args.twists)
    return joints, markers, phi


def cmd_ik(args):
    tree, rest = _tree(args)
    target, _, phi = _load_solve_inputs(args, tree)
    report = solve(tree, rest, target, phi, mode=args.mode)
    out = _solve_payload(tree, report)
    if args.emit == "residuals":
        acc, local = error_decomposition(report, tree)
        out["residuals"] = {
            "target_minus_recon": formats.pose_to_json(report.residual),
            "step": formats.pose_to_json(local),
            "accumulated": formats.pose_to_json(acc),
        }
    return formats.dumps(out)


def cmd_wholebody(args):
    tree, rest = _tree(args)
    target, markers, phi = _load_solve_inputs(args, tree, require_markers=args.markers is None)
    if args.markers is not None:
        doc = formats.load_json(formats.read_text(args.markers), formats.MARKERS_SCHEMA, args.markers)
        markers = {k: formats._finite(np.asarray(v, dtype=float), args.markers, k) for k, v in doc.items()}
    report = solve_wholebody(tree, rest, target, phi, markers=markers)
    out = _solve_payload(tree, report)
    sub = ["body"] * tree.K
    for tag, (_, idx) in split_subtrees(tree).items():
        for k in idx[1:] if tag != "body" else idx:
            sub[k] = tag
    out["subtree"] = sub
    out["conflicts"] = {
        name: {"parent": c["parent"], "feasible": bool(c["feasible"]), "residual_m": float(c["residual"])}
        for name, c in report.conflicts.items()
    }
    return formats.dumps(out)


def cmd_camera(args):
    uv, d, s0 = formats.parse_p25(formats.read_text(args.p25), args.p25)
    tree, rest = _tree(args)
    if uv.shape[0] != tree.K:
        raise InputError(f"{args.p25}: {uv.shape[0]} keypoints, tree {args.tree} has {tree.K} joints")
    phi = np.zeros(tree.K)
    if args.mode == "wholebody":
        solver = lambda j: solve_wholebody(tree, rest, j, phi)  # noqa: E731
    else:
        solver = lambda j: solve(tree, rest, j, phi, mode=args.mode)  # noqa: E731
    res = ice(uv, d, s0, solver, steps=args.steps)
    if args.joints_out:
        _write(Path(args.joints_out), formats.dumps({"joints": formats.pose_to_json(res.joints)}))
    lines = ["step,s,reproj_err"] + [f"{t},{formats.fmt(s, 12)},{formats.fmt(e, 12)}" for t, s, e in res.trace]
    return "\n".join(lines) + "\n"


def cmd_decompose(args):
    tree, rest = _tree(args)
    rots = formats.parse_rotations(formats.read_text(args.rotations), tree.K, args.rotations)
    swings = np.empty_like(rots)
    phi = np.zeros(tree.K)
    swings[0] = rots[0]
    for k in range(1, tree.K):
        swings[k], phi[k] = so3.extract_twist(rots[k], rest[k] - rest[tree.parents[k]])
    return formats.dumps({"swings": formats.rotations_to_json(swings), "twists": formats.twists_to_json(phi)})


def cmd_bench(args):
    if args.config:
        doc = formats.load_json(formats.read_text(args.config), {"type": "object"}, args.config)
        config = ScenarioConfig.from_dict(doc)
    else:
        config = default_config()
    if args.seed is not None:
        config.seed = args.seed
    if args.trials is not None:
        config.trials = args.trials
    if args.jitter_mm is not None:
        config.jitter_mm = _floats(args.jitter_mm, None, "--jitter-mm")
    config = ScenarioConfig.from_dict(vars(config))
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc.strerror}") from None
    _probe_writable(out)
    tables = run_bench(config)
    for name, table in tables.items():
        _write(out / name, table.to_csv())
    return "".join(f"{out / name}\n" for name in tables)


def _probe_writable(directory):
    probe = directory / ".kinsolve-write-test"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise InputError(f"cannot write to {directory}: {exc.strerror}") from None


def _write(path, text):
    try:
        path.write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def _floats(text, n, flag):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"{flag}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise InputError(f"{flag}: expected {n} numbers, got {len(vals)}")
    return vals


def build_parser():
    p = _Parser(prog="kinsolve", description="Analytical inverse kinematics for articulated skeletons.")
    p.add_argument("--version", action="version", version=f"kinsolve {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def tree_arg(sp, required=True, default=None):
        sp.add_argument("--tree", required=required, default=default,
                        help="built-in tree name (body24, hand16, wholebody) or skeleton JSON file")

    sp = sub.add_parser("fk", help="forward kinematics from relative rotations")
    tree_arg(sp)
    sp.add_argument("--rotations", required=True)
    sp.add_argument("--root", help="root position x,y,z (default: rest root)")
    sp.set_defaults(func=cmd_fk)

    sp = sub.add_parser("ik", help="naive or adaptive solve of a target pose")
    tree_arg(sp)
    sp.add_argument("--target", required=True)
    sp.add_argument("--twists", required=True)
    sp.add_argument("--mode", choices=("naive", "adaptive"), default="adaptive")
    sp.add_argument("--emit", choices=("residuals",))
    sp.set_defaults(func=cmd_ik)

    sp = sub.add_parser("wholebody", help="sub-tree solve with conflict resolution and jaw markers")
    tree_arg(sp)
    sp.add_argument("--target", required=True)
    sp.add_argument("--twists", required=True)
    sp.add_argument("--markers", help="mouth marker JSON; overrides the target's 'markers' object")
    sp.set_defaults(func=cmd_wholebody)

    sp = sub.add_parser("camera", help="iterative camera estimation from 2.5D keypoints")
    sp.add_argument("--p25", required=True)
    sp.add_argument("--steps", type=int, default=3)
    tree_arg(sp, required=False, default="body24")
    sp.add_argument("--mode", choices=("naive", "adaptive", "wholebody"), default="naive")
    sp.add_argument("--joints-out", help="write the final back-projected joints here")
    sp.set_defaults(func=cmd_camera)

    sp = sub.add_parser("decompose", help="split relative rotations into swing and twist")
    tree_arg(sp)
    sp.add_argument("--rotations", required=True)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("bench", help="write robustness, twist and camera tables")
    sp.add_argument("--config", help="scenario JSON (default: shipped config)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--jitter-mm", dest="jitter_mm")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "steps", 0) is not None and getattr(args, "steps", 0) < 0:
            raise InputError("--steps must be non-negative")
        payload = args.func(args)
    except InputError as exc:
        print(f"kinsolve: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"kinsolve: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
