"""Body-level analytical IK: root registration, naive and adaptive solvers."""

from dataclasses import dataclass, field

import numpy as np

from . import so3
from .errors import DegenerateTriplet, DimensionMismatch, ZeroBone
from .skeleton import fk

EPS_NORM = 1e-10

# root name -> the three joints rigidly attached to it, used to fix the root frame
_REGISTRATION = {
    "pelvis": ("spine1", "left_hip", "right_hip"),
    "head": ("left_eye", "right_eye", "mouth_top"),
}


@dataclass
class SolveReport:
    rots: np.ndarray
    recon: np.ndarray
    eps: np.ndarray
    mode: str
    globals: np.ndarray
    target: np.ndarray
    conflicts: dict = field(default_factory=dict)

    @property
    def residual(self):
        return self.target - self.recon


def register_root(template, target):
    """Rotation ``R`` minimising ``||target - R template||_F`` over SO(3).

    Both arguments hold root-relative points as rows. The SVD solution
    ``V U^T`` is reflection-corrected so the result is always proper.
    """
    template = np.asarray(template, dtype=float)
    target = np.asarray(target, dtype=float)
    if template.shape != target.shape or template.ndim != 2 or template.shape[1] != 3:
        raise DimensionMismatch(f"registration needs matching (n, 3) arrays, got {template.shape} and {target.shape}")
    h = template.T @ target
    u, sigma, vt = np.linalg.svd(h)
    if sigma[0] <= 0.0 or sigma[1] <= 1e-12 * sigma[0]:
        raise DegenerateTriplet(f"correlation matrix has rank < 2 (singular values {sigma})")
    v = vt.T
    d = np.sign(np.linalg.det(v @ u.T))
    return v @ np.diag([1.0, 1.0, d]) @ u.T


def registration_joints(tree):
    """Indices of the joints that pin the root frame, or ``None``."""
    root = tree.names[0]
    names = _REGISTRATION.get(root)
    if names is None and root.endswith("wrist"):
        prefix = root[: -len("wrist")]
        names = (prefix + "index1", prefix + "middle1", prefix + "pinky1")
    if names is not None and all(tree.has(n) for n in names):
        return [tree.index(n) for n in names]
    return None


def root_rotation(tree, rest, target):
    """Global root rotation from the registration triplet.

    Trees without a known triplet fall back to registering all root children
    (two or more), else identity: each child bone then takes its own swing.
    """
    idx = registration_joints(tree)
    if idx is not None:
        return register_root(rest[idx] - rest[0], target[idx] - target[0])
    kids = list(tree.children(0))
    if len(kids) >= 2:
        try:
            return register_root(rest[kids] - rest[0], target[kids] - target[0])
        except DegenerateTriplet:
            pass
    return np.eye(3)


def _check_inputs(tree, rest, target, phi):
    K = tree.K
    rest = np.asarray(rest, dtype=float)
    target = np.asarray(target, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if rest.shape != (K, 3) or target.shape != (K, 3) or phi.shape != (K,):
        raise DimensionMismatch(
            f"tree has {K} joints; got rest {rest.shape}, target {target.shape}, twists {phi.shape}")
    return rest, target, phi


def _solve(tree, rest, target, phi, adaptive, root_rot=None):
    rest, target, phi = _check_inputs(tree, rest, target, phi)
    K = tree.K
    rots = np.empty((K, 3, 3))
    g = np.empty((K, 3, 3))
    q = np.empty((K, 3))
    eps = np.zeros((K, 3))
    rots[0] = g[0] = root_rotation(tree, rest, target) if root_rot is None else root_rot
    q[0] = target[0]
    parents = tree.parents
    bones = rest - rest[[max(p, 0) for p in parents]]
    for k in range(1, K):
        p = parents[k]
        d = target[k] - (q[p] if adaptive else target[p])
        if so3.norm(d) < EPS_NORM:
            which = "reconstructed parent" if adaptive else "parent"
            raise ZeroBone(f"target joint {k} ({tree.names[k]}) coincides with its {which}")
        t = bones[k]
        r = so3.swing_between(t, g[p].T @ d) @ so3.twist_about(t, phi[k])
        rots[k] = r
        g[k] = g[p] @ r
        step = g[k] @ t
        q[k] = step + q[p]
        eps[k] = d - step
    return SolveReport(rots, q, eps, "adaptive" if adaptive else "naive", g, target)


def solve_naive(tree, rest, target, twists):
    """Naive solver: each bone aims along ``p[k] - p[pa(k)]``.

    ``eps[k]`` is the per-step mismatch ``(p[k] - p[pa(k)]) - G[k] t_k``;
    the reconstruction error accumulates these along the ancestor chain.
    """
    return _solve(tree, rest, target, twists, adaptive=False)


def solve_adaptive(tree, rest, target, twists):
    """Adaptive solver: each bone aims from the *reconstructed* parent,
    so ``eps[k] == p[k] - q[k]`` and errors do not accumulate."""
    return _solve(tree, rest, target, twists, adaptive=True)


def solve(tree, rest, target, twists, mode="adaptive"):
    if mode == "naive":
        return solve_naive(tree, rest, target, twists)
    if mode == "adaptive":
        return solve_adaptive(tree, rest, target, twists)
    raise ValueError(f"unknown mode {mode!r}")


def error_decomposition(report, tree):
    """Per-joint ``(accumulated, local)`` residual vectors.

    ``accumulated[k]`` sums ``eps`` over ``k`` and its ancestors; for the
    naive solver it equals ``p[k] - q[k]``. ``local`` is ``eps`` itself, which
    equals ``p[k] - q[k]`` for the adaptive solver.
    """
    eps = report.eps
    acc = np.empty_like(eps)
    acc[0] = eps[0]
    for k in range(1, tree.K):
        acc[k] = acc[tree.parents[k]] + eps[k]
    return acc, eps.copy()


def check_recon(tree, rest, report):
    """Max deviation between the report's reconstruction and FK of its rotations."""
    q, _ = fk(tree, rest, report.rots, root=report.recon[0])
    return float(np.abs(q - report.recon).max())
