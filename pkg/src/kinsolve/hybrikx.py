"""Whole-body solver: sub-tree split, backward update of conflict joints,
marker-driven jaw swing and merge into one rotation set."""

import math
from dataclasses import dataclass

import numpy as np

from . import so3
from .errors import CoincidentAC, InputError, ZeroVector
from .hybrik import EPS_NORM, SolveReport, _check_inputs, register_root, registration_joints, solve_adaptive
from .skeleton import fk, identity_rotations

CONFLICT_JOINTS = ("left_wrist", "right_wrist", "head")
SUBTREES = (("body", "pelvis"), ("left_hand", "left_wrist"), ("right_hand", "right_wrist"), ("face", "head"))


@dataclass(frozen=True)
class BackwardUpdateProblem:
    """Grandparent ``A`` (reconstructed), parent ``B`` and distal joint ``C``
    (both predicted), plus the two template bone lengths."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    len_pa: float
    len_k: float


@dataclass(frozen=True)
class BackwardUpdate:
    b_star: np.ndarray
    feasible: bool
    residual: float


def backward_update(prob):
    """Relocate the parent joint so both bone lengths hold, staying closest to ``B``.

    Feasible case: ``b_star`` lies on the circle where the sphere of radius
    ``len_pa`` about ``A`` meets the sphere of radius ``len_k`` about ``C``,
    at the point nearest ``B``. When the spheres do not meet, ``b_star`` is
    the point on line ``AC`` that minimises the larger of the two length
    violations; ``residual`` reports that violation.
    """
    A = np.asarray(prob.A, dtype=float)
    B = np.asarray(prob.B, dtype=float)
    C = np.asarray(prob.C, dtype=float)
    l1, l2 = float(prob.len_pa), float(prob.len_k)
    if l1 <= 0.0 or l2 <= 0.0:
        raise InputError("bone lengths must be positive")
    ac = C - A
    d2 = float(ac @ ac)
    d = math.sqrt(d2)
    if d < EPS_NORM:
        raise CoincidentAC(f"grandparent and distal joint coincide (|AC| = {d:.3g})")
    m = (l1 * l1 - l2 * l2 + d2) / (2.0 * d2)
    n2 = l1 * l1 - m * m * d2
    if n2 >= 0.0:
        foot = A + m * ac
        db = B - foot
        db_perp = db - (float(db @ ac) / d2) * ac
        if so3.norm(db_perp) < EPS_NORM:
            direction = so3.perpendicular(ac)
        else:
            direction = db_perp / so3.norm(db_perp)
        b_star = foot + math.sqrt(n2) * direction
        feasible = True
    else:
        if d > l1 + l2:
            x = 0.5 * (d + l1 - l2)
        elif l1 > l2:
            x = 0.5 * (d + l1 + l2)
        else:
            x = -0.5 * (l1 + l2 - d)
        b_star = A + (x / d) * ac
        feasible = False
    residual = max(abs(so3.norm(b_star - A) - l1), abs(so3.norm(C - b_star) - l2))
    return BackwardUpdate(b_star, feasible, residual)


@dataclass(frozen=True)
class ConflictResolution:
    rot_parent: np.ndarray
    rot_conflict: np.ndarray
    b_star: np.ndarray
    feasible: bool
    residual: float


def resolve_conflict(tree, rest, k, grandparent_pos, grandparent_global, p_parent, p_conflict, twists):
    """Recompute the relative rotations of ``pa(k)`` and ``k`` so that ``k``
    lands on ``p_conflict`` with the grandparent held fixed."""
    pa = tree.parents[k]
    gp = tree.parents[pa]
    if pa < 0 or gp < 0:
        raise InputError(f"joint {tree.names[k]} needs a parent and a grandparent")
    t_pa = rest[pa] - rest[gp]
    t_k = rest[k] - rest[pa]
    bu = backward_update(BackwardUpdateProblem(
        grandparent_pos, p_parent, p_conflict, so3.norm(t_pa), so3.norm(t_k)))
    r_pa = so3.swing_between(t_pa, grandparent_global.T @ (bu.b_star - grandparent_pos)) @ so3.twist_about(t_pa, twists[pa])
    g_pa = grandparent_global @ r_pa
    r_k = so3.swing_between(t_k, g_pa.T @ (np.asarray(p_conflict) - bu.b_star)) @ so3.twist_about(t_k, twists[k])
    return ConflictResolution(r_pa, r_k, bu.b_star, bu.feasible, bu.residual)


@dataclass(frozen=True)
class MarkerPair:
    """Template and predicted mouth markers.

    ``template_pivot`` is the jaw hinge in the template; the predicted hinge
    is placed rigidly relative to the predicted upper marker. It defaults to
    the upper marker itself.
    """

    template_top: np.ndarray
    template_bottom: np.ndarray
    pred_top: np.ndarray
    pred_bottom: np.ndarray
    template_pivot: np.ndarray = None

    def __post_init__(self):
        if so3.norm(np.asarray(self.template_bottom) - np.asarray(self.template_top)) < EPS_NORM:
            raise InputError("template mouth markers coincide")


def jaw_swing(markers, head_global):
    """Swing-only jaw rotation from the mouth-opening markers, in the head frame."""
    tt = np.asarray(markers.template_top, dtype=float)
    tb = np.asarray(markers.template_bottom, dtype=float)
    pivot = tt if markers.template_pivot is None else np.asarray(markers.template_pivot, dtype=float)
    opening = np.asarray(markers.pred_bottom, dtype=float) - np.asarray(markers.pred_top, dtype=float)
    if so3.norm(opening) < EPS_NORM:
        raise ZeroVector("predicted mouth markers coincide")
    w = head_global.T @ opening + (tt - pivot)
    return so3.swing_between(tb - pivot, w)


def split_subtrees(tree):
    """Sub-tree slices keyed by tag: ``{tag: (subtree, idx)}``.

    The body slice is rooted at the tree root; hand and face slices are
    rooted at the body joint they hang from, which is therefore shared.
    """
    out = {"body": tree.subtree(0, tree.with_tag("body"))}
    for tag, root_name in SUBTREES[1:]:
        members = tree.with_tag(tag)
        if not members or not tree.has(root_name):
            continue
        out[tag] = tree.subtree(tree.index(root_name), members)
    return out


def _marker_pair(tree, rest, target, markers):
    if not (tree.has("mouth_top") and tree.has("mouth_bottom")):
        return None
    top, bottom = tree.index("mouth_top"), tree.index("mouth_bottom")
    if markers is None:
        pred_top, pred_bottom = target[top], target[bottom]
    elif isinstance(markers, MarkerPair):
        return markers
    else:
        pred_top, pred_bottom = markers["mouth_top"], markers["mouth_bottom"]
    pivot = rest[tree.parents[bottom]]
    return MarkerPair(rest[top], rest[bottom], np.asarray(pred_top, float), np.asarray(pred_bottom, float), pivot)


def solve_wholebody(tree, rest, target, twists, markers=None):
    """Divide-and-conquer solve over body, hand and face sub-trees.

    ``markers`` is a :class:`MarkerPair`, a ``{"mouth_top", "mouth_bottom"}``
    mapping of predicted positions, or ``None`` to read them from the target
    rows of the marker joints.
    """
    rest, target, phi = _check_inputs(tree, rest, target, twists)
    K = tree.K
    slices = split_subtrees(tree)
    rots = identity_rotations(K)

    body_tree, bidx = slices["body"]
    body = solve_adaptive(body_tree, rest[bidx], target[bidx], phi[bidx])
    rots[bidx] = body.rots
    q = np.zeros((K, 3))
    g = np.tile(np.eye(3), (K, 1, 1))
    q[bidx] = body.recon
    g[bidx] = body.globals

    hanging = {tree.names[sub[1][0]] for tag, sub in slices.items() if tag != "body"}
    conflicts = {}
    for name in CONFLICT_JOINTS:
        if name not in hanging:
            continue
        k = tree.index(name)
        pa = tree.parents[k]
        gp = tree.parents[pa]
        res = resolve_conflict(tree, rest, k, q[gp], g[gp], target[pa], target[k], phi)
        rots[pa] = res.rot_parent
        rots[k] = res.rot_conflict
        conflicts[name] = {"feasible": res.feasible, "residual": res.residual, "parent": tree.names[pa]}

    q, g = fk(tree, rest, rots, root=target[0])

    for tag in ("left_hand", "right_hand"):
        if tag not in slices:
            continue
        sub, idx = slices[tag]
        w = idx[0]
        # anchor at the merged wrist: differs from the target only when the backward update was infeasible
        local_target = target[idx]
        local_target[0] = q[w]
        local = solve_adaptive(sub, rest[idx], local_target, phi[idx])
        frame = g[w].T @ local.rots[0]
        for i in range(1, sub.K):
            rots[idx[i]] = frame @ local.rots[i] if sub.parents[i] == 0 else local.rots[i]

    if "face" in slices:
        sub, idx = slices["face"]
        h = idx[0]
        trip = registration_joints(sub)
        if trip is not None:
            face_frame = register_root(rest[[idx[i] for i in trip]] - rest[h],
                                       target[[idx[i] for i in trip]] - target[h])
        else:
            face_frame = g[h]
        for i in range(1, sub.K):
            rots[idx[i]] = g[h].T @ face_frame if sub.parents[i] == 0 else np.eye(3)
        pair = _marker_pair(tree, rest, target, markers)
        if pair is not None:
            rots[tree.index("mouth_bottom")] = jaw_swing(pair, face_frame)

    recon, glob = fk(tree, rest, rots, root=target[0])
    return SolveReport(rots, recon, target - recon, "wholebody", glob, target, conflicts)
