"""Synthetic ground truth, noise injection, oracles and benchmark tables.

Every table is a pure function of its :class:`ScenarioConfig`: trial ``i``
draws from its own generator seeded by ``(seed, i, ...)`` and results are
aggregated in trial order, so parallel and serial runs agree bit for bit.
"""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache, partial
from importlib import resources

import numpy as np

from . import __version__, so3
from .camera import ice, project
from .errors import Infeasible, InputError
from .formats import fmt
from .hybrik import solve_adaptive, solve_naive
from .hybrikx import solve_wholebody
from .skeleton import fk, load_builtin

TWIST_MODES = ("gt", "zero", "random")


@dataclass
class ScenarioConfig:
    seed: int = 2024
    tree: str = "wholebody"
    trials: int = 200
    jitter_mm: list = field(default_factory=lambda: [10.0, 20.0, 30.0])
    twist_mode: str = "gt"
    twist_limits: dict = field(default_factory=dict)
    camera_steps: int = 5
    camera_s0_range: list = field(default_factory=lambda: [0.5, 2.0])
    camera_noise_mm: float = 0.0

    def __post_init__(self):
        if int(self.trials) <= 0:
            raise InputError("trials must be positive")
        self.trials = int(self.trials)
        self.seed = int(self.seed)
        self.jitter_mm = [float(x) for x in self.jitter_mm]
        if any(x < 0 for x in self.jitter_mm):
            raise InputError("jitter levels must be non-negative")
        if self.twist_mode not in TWIST_MODES:
            raise InputError(f"twist_mode must be one of {TWIST_MODES}")
        lo, hi = (float(x) for x in self.camera_s0_range)
        if not 0 < lo <= hi:
            raise InputError("camera_s0_range must satisfy 0 < lo <= hi")
        self.camera_s0_range = [lo, hi]
        self.camera_steps = int(self.camera_steps)

    @classmethod
    def from_dict(cls, doc):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**doc)


def default_config():
    text = resources.files("kinsolve.data").joinpath("default_bench.json").read_text()
    return ScenarioConfig.from_dict(json.loads(text))


@lru_cache(maxsize=None)
def _limit_table():
    return json.loads(resources.files("kinsolve.data").joinpath("limits.json").read_text())


def joint_limits(name, overrides=None):
    """``(swing, twist, hinge)`` limits in radians for a joint name."""
    table = _limit_table()
    entry = table["joints"].get(name)
    if entry is None:
        for suffix, e in table["suffix"].items():
            if name.endswith(suffix):
                entry = e
                break
    entry = entry or table["default"]
    twist = math.radians(entry["twist"])
    if overrides and name in overrides:
        twist = float(overrides[name])
    return math.radians(entry["swing"]), twist, entry.get("hinge")


def random_rotation(rng):
    """Haar-uniform rotation from a normalised Gaussian quaternion."""
    w, x, y, z = rng.normal(size=4)
    n = math.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / n, x / n, y / n, z / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def generate_pose(tree, rest, seed, twist_limits=None, root_rotation=None, scale=1.0):
    """Random pose within per-joint limits.

    Each relative rotation is a swing about a random axis perpendicular to
    the bone followed by a twist about the bone. Returns ``(rots, phi,
    joints)`` with ``phi`` re-extracted from ``rots``.
    """
    rng = np.random.default_rng(seed)
    K = tree.K
    rots = np.empty((K, 3, 3))
    rots[0] = random_rotation(rng) if root_rotation is None else root_rotation
    for k in range(1, K):
        t = rest[k] - rest[tree.parents[k]]
        swing_max, twist_max, hinge = joint_limits(tree.names[k], twist_limits)
        u, v, w = rng.uniform(size=3)
        if hinge is not None:
            swing = so3.axis_angle(hinge, scale * swing_max * u)
        else:
            e1 = so3.perpendicular(t)
            e2 = so3.cross(so3.unit(t), e1)
            theta = 2.0 * math.pi * v
            swing = so3.axis_angle(math.cos(theta) * e1 + math.sin(theta) * e2, scale * swing_max * u)
        rots[k] = swing @ so3.twist_about(t, scale * twist_max * (2.0 * w - 1.0))
    phi = extract_twists(tree, rest, rots)
    joints, _ = fk(tree, rest, rots)
    return rots, phi, joints


def extract_twists(tree, rest, rots):
    phi = np.zeros(tree.K)
    for k in range(1, tree.K):
        phi[k] = so3.extract_twist(rots[k], rest[k] - rest[tree.parents[k]])[1]
    return phi


def jitter(joints, level_mm, seed):
    """Add per-coordinate uniform noise in ``[-level, level]`` millimeters."""
    if level_mm < 0:
        raise InputError("jitter level must be non-negative")
    joints = np.asarray(joints, dtype=float)
    if level_mm == 0:
        return joints.copy()
    rng = np.random.default_rng(seed)
    return joints + rng.uniform(-level_mm, level_mm, size=joints.shape) / 1000.0


def twists_for(mode, phi_gt, seed):
    if mode == "gt":
        return phi_gt.copy()
    if mode == "zero":
        return np.zeros_like(phi_gt)
    rng = np.random.default_rng(seed)
    phi = rng.uniform(-math.pi, math.pi, size=phi_gt.shape)
    phi[0] = 0.0
    return phi


def mpjpe_mm(a, b, idx=None):
    err = np.linalg.norm(a - b, axis=1)
    if idx is not None:
        if len(idx) == 0:
            return float("nan")
        err = err[idx]
    return float(err.mean() * 1000.0)


def _workers():
    try:
        return max(1, int(os.environ.get("KINSOLVE_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, n):
    workers = min(_workers(), n)
    if workers <= 1:
        return [fn(i) for i in range(n)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n), chunksize=max(1, n // (4 * workers))))


@dataclass
class BenchTable:
    columns: list
    rows: list
    meta: dict
    samples: dict = field(default_factory=dict, repr=False)

    def to_csv(self):
        lines = [f"# {k}={v}" for k, v in self.meta.items()]
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(c if isinstance(c, str) else fmt(c) for c in row))
        return "\n".join(lines) + "\n"


def _meta(config, table):
    return {"table": table, "seed": config.seed, "trials": config.trials, "tree": config.tree, "version": __version__}


SOLVERS = {"naive": solve_naive, "adaptive": solve_adaptive, "wholebody": solve_wholebody}


def _levels(config):
    return [0.0] + [x for x in config.jitter_mm if x != 0.0]


def _robustness_trial(config, i):
    tree, rest = load_builtin(config.tree)
    body = tree.with_tag("body")
    hand = tree.with_tag("left_hand", "right_hand")
    _, phi_gt, gt = generate_pose(tree, rest, [config.seed, i, 0], config.twist_limits)
    phi = twists_for(config.twist_mode, phi_gt, [config.seed, i, 1])
    out = np.empty((len(_levels(config)), len(SOLVERS), 2))
    for li, level in enumerate(_levels(config)):
        target = jitter(gt, level, [config.seed, i, 2, li])
        for si, solver in enumerate(SOLVERS.values()):
            rep = solver(tree, rest, target, phi)
            out[li, si] = mpjpe_mm(rep.recon, gt, body), mpjpe_mm(rep.recon, gt, hand)
    return out


def run_robustness(config):
    """Body/hand MPJPE of each solver against clean ground truth, per jitter level."""
    per_trial = np.stack(_map(partial(_robustness_trial, config), config.trials))
    means = per_trial.mean(axis=0)
    rows = []
    for si, mode in enumerate(SOLVERS):
        for li, level in enumerate(_levels(config)):
            rows.append([mode, level, means[li, si, 0], means[li, si, 1]])
    return BenchTable(["mode", "jitter_mm", "body_mpjpe_mm", "hand_mpjpe_mm"], rows,
                      _meta(config, "robustness"), {"per_trial": per_trial, "levels": _levels(config),
                                                    "modes": list(SOLVERS)})


def _twist_trial(config, i):
    tree, rest = load_builtin(config.tree)
    rots_gt, phi_gt, gt = generate_pose(tree, rest, [config.seed, i, 0], config.twist_limits)
    out = np.empty((len(TWIST_MODES), 3))
    for mi, mode in enumerate(TWIST_MODES):
        rep = solve_adaptive(tree, rest, gt, twists_for(mode, phi_gt, [config.seed, i, 1]))
        rot_err = np.mean([so3.geodesic(rep.rots[k], rots_gt[k]) for k in range(1, tree.K)])
        out[mi] = mpjpe_mm(rep.recon, gt), math.degrees(rot_err), float(np.abs(rep.recon - gt).max())
    return out


def run_twist_ablation(config):
    """Joint and rotation error for ground-truth, zero and random twists on clean targets."""
    per_trial = np.stack(_map(partial(_twist_trial, config), config.trials))
    means = per_trial.mean(axis=0)
    rows = [[mode, means[mi, 0], means[mi, 1]] for mi, mode in enumerate(TWIST_MODES)]
    return BenchTable(["twist_mode", "joint_mpjpe_mm", "rot_err_deg"], rows,
                      _meta(config, "twist_ablation"), {"per_trial": per_trial})


def camera_scene(tree, rest, seed, noise_mm=0.0, s0_range=(0.5, 2.0), pose_scale=0.2, facing_deg=10.0):
    """Synthetic 2.5D observation of a near-rest body facing the camera.

    Joint limits are scaled by ``pose_scale`` and the body is tilted at most
    ``facing_deg`` away from the image plane. Returns ``(uv, d, s_true, s0,
    joints_cam)``; camera axes are x right, y down, z forward.
    """
    rng = np.random.default_rng(seed)
    facing = so3.rot_x(math.pi) @ so3.axis_angle(rng.normal(size=3), math.radians(facing_deg) * rng.uniform())
    _, _, joints = generate_pose(tree, rest, rng.integers(2**63), root_rotation=facing, scale=pose_scale)
    depth = rng.uniform(3.0, 8.0)
    u0, v0 = rng.uniform(-0.15, 0.15, size=2)
    cam = joints - joints[0] + np.array([u0 * depth, v0 * depth, depth])
    seen = jitter(cam, noise_mm, rng.integers(2**63)) if noise_mm > 0 else cam
    uv = project(seen)
    d = seen[:, 2] - seen[0, 2]
    s_true = 1.0 / depth
    s0 = s_true * rng.uniform(*s0_range)
    return uv, d, s_true, s0, cam


def camera_solver(tree, rest):
    """Zero-twist naive solve: bone directions survive a lateral rescaling of the
    back-projected joints, which keeps the scale iteration contracting."""
    phi = np.zeros(tree.K)
    return lambda joints: solve_naive(tree, rest, joints, phi)


def _camera_trial(config, i):
    tree, rest = load_builtin(config.tree)
    uv, d, s_true, s0, _ = camera_scene(tree, rest, [config.seed, i, 3], config.camera_noise_mm,
                                        config.camera_s0_range)
    res = ice(uv, d, s0, camera_solver(tree, rest), steps=config.camera_steps)
    trace = res.trace + [res.trace[-1]] * (config.camera_steps + 1 - len(res.trace))
    out = np.empty((config.camera_steps + 1, 3))
    for t, (_, s, err) in enumerate(trace):
        out[t] = abs(1.0 / s - 1.0 / s_true) * 1000.0, err, abs(s - s_true) / s_true * 100.0
    return out


def run_camera_bench(config):
    """Per-step ICE trace: depth error (mm), reprojection error, scale error (%)."""
    per_trial = np.stack(_map(partial(_camera_trial, config), config.trials))
    means = per_trial.mean(axis=0)
    names = ["depth_err_mm", "reproj_err", "scale_err_pct"]
    rows = [[name] + list(means[:, j]) for j, name in enumerate(names)]
    return BenchTable(["metric"] + [str(t) for t in range(config.camera_steps + 1)], rows,
                      _meta(config, "camera"), {"per_trial": per_trial})


def run_bench(config):
    return {
        "robustness.csv": run_robustness(config),
        "twist_ablation.csv": run_twist_ablation(config),
        "camera.csv": run_camera_bench(config),
    }


def circle_points(prob, n=1_000_000):
    """``n`` evenly spaced points of the backward-update constraint circle."""
    A, C = np.asarray(prob.A, float), np.asarray(prob.C, float)
    ac = C - A
    d2 = float(ac @ ac)
    m = (prob.len_pa ** 2 - prob.len_k ** 2 + d2) / (2.0 * d2)
    r2 = prob.len_pa ** 2 - m * m * d2
    if r2 < 0:
        raise Infeasible("spheres do not intersect")
    e1 = so3.perpendicular(ac)
    e2 = so3.cross(so3.unit(ac), e1)
    theta = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    r = math.sqrt(r2)
    return A + m * ac + r * (np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2), r


def brute_force_backward_oracle(prob, n=1_000_000):
    """Closest of ``n`` sampled circle points to ``B``; test oracle only."""
    pts, _ = circle_points(prob, n)
    dist = np.linalg.norm(pts - np.asarray(prob.B, float), axis=1)
    return pts[int(np.argmin(dist))]


def bootstrap_confidence(diff, n_boot=2000, seed=0):
    """Fraction of bootstrap resamples whose mean of ``diff`` is positive."""
    diff = np.asarray(diff, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, diff.size, size=(n_boot, diff.size))
    return float((diff[idx].mean(axis=1) > 0).mean())


def config_dict(config):
    return asdict(config)
