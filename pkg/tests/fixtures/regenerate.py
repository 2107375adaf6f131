"""Rebuild the committed CLI fixtures and golden bench tables.

Run from the repository root: ``python tests/fixtures/regenerate.py``.
Only needed when the generators or the built-in trees change.
"""

import contextlib
import io
import json
from pathlib import Path

import numpy as np

from kinsolve import formats
from kinsolve.cli import main
from kinsolve.harness import camera_scene, default_config, generate_pose, jitter, run_bench
from kinsolve.skeleton import load_builtin

HERE = Path(__file__).parent
GOLDEN = HERE.parent / "golden"


def write(name, doc):
    (HERE / name).write_text(formats.dumps(doc))


def with_markers(tree, joints):
    doc = {"joints": formats.pose_to_json(joints)}
    doc["markers"] = {n: [float(x) for x in joints[tree.index(n)]] for n in ("mouth_top", "mouth_bottom")}
    return doc


def main_fixtures():
    tree, rest = load_builtin("body24")
    rots, phi, joints = generate_pose(tree, rest, 101)
    write("body24_rotations.json", {"rotations": formats.rotations_to_json(rots)})
    write("body24_twists.json", formats.twists_to_json(phi))
    write("body24_target_exact.json", {"joints": formats.pose_to_json(joints)})
    write("body24_target_jitter.json", {"joints": formats.pose_to_json(jitter(joints, 20.0, 102))})

    tree, rest = load_builtin("wholebody")
    rots, phi, joints = generate_pose(tree, rest, 201)
    write("wholebody_twists.json", formats.twists_to_json(phi))
    write("wholebody_target_exact.json", with_markers(tree, joints))
    write("wholebody_target_nomarkers.json", {"joints": formats.pose_to_json(joints)})
    # pull the left wrist 15 cm further along the forearm: the arm cannot reach it
    stretched = joints.copy()
    w, e = tree.index("left_wrist"), tree.index("left_elbow")
    fore = stretched[w] - stretched[e]
    stretched[tree.index("left_wrist")] += 0.15 * fore / np.linalg.norm(fore)
    write("wholebody_target_stretched.json", with_markers(tree, stretched))

    tree, rest = load_builtin("body24")
    uv, d, s_true, _, _ = camera_scene(tree, rest, 301)
    write("body24_p25.json", {"uv": uv.tolist(), "d": d.tolist(), "s0": 1.3 * s_true})
    (HERE / "body24_p25_truth.json").write_text(formats.dumps({"s": s_true}))

    write("bench_small.json", {"seed": 5, "tree": "body24", "trials": 4, "jitter_mm": [10],
                               "twist_mode": "gt", "camera_steps": 3})

    for mode in ("naive", "adaptive"):
        out = HERE / f"expected_ik_jitter_{mode}.json"
        args = ["ik", "--tree", "body24", "--target", str(HERE / "body24_target_jitter.json"),
                "--twists", str(HERE / "body24_twists.json"), "--mode", mode, "--emit", "residuals"]
        _capture(args, out)


def _capture(args, out):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        assert main(args) == 0
    out.write_text(buf.getvalue())


def main_golden():
    GOLDEN.mkdir(exist_ok=True)
    for name, table in run_bench(default_config()).items():
        (GOLDEN / name).write_text(table.to_csv())


if __name__ == "__main__":
    main_fixtures()
    main_golden()
    print(json.dumps(sorted(p.name for p in HERE.glob("*.json"))))
