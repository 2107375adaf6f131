"""Pinhole projection at unit focal length, 2.5D back-projection and
iterative camera estimation (ICE).

A scale ``s`` puts the root at depth ``1 / s`` meters; the root's image
position fixes the lateral translation, so ``s`` is the only free camera
parameter.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCamera, DegenerateObservation, NonFinite

EPS_DEPTH = 1e-4
MAX_STEPS = 10
CONVERGED = 1e-6
POLISH_STEPS = 5


def backproject(uv, d, s):
    """Camera-space joints from normalised image coordinates and root-relative depths."""
    if not s > 0:
        raise BehindCamera(f"scale must be positive, got {s}")
    uv = np.asarray(uv, dtype=float)
    z = 1.0 / s + np.asarray(d, dtype=float)
    if z.min() <= EPS_DEPTH:
        k = int(np.argmin(z))
        raise BehindCamera(f"joint {k} back-projects to depth {z[k]:.4g} m")
    return np.column_stack([uv[:, 0] * z, uv[:, 1] * z, z])


def project(joints):
    """Normalised image coordinates ``(x / z, y / z)`` of camera-space joints."""
    joints = np.asarray(joints, dtype=float)
    z = joints[:, 2]
    if z.min() <= EPS_DEPTH:
        k = int(np.argmin(z))
        raise BehindCamera(f"joint {k} has depth {z[k]:.4g} m")
    return joints[:, :2] / z[:, None]


def place(rel, uv_root, s):
    """Put a root-relative pose in camera space with the root on ``uv_root`` at depth ``1 / s``."""
    root = np.array([uv_root[0] / s, uv_root[1] / s, 1.0 / s])
    return np.asarray(rel, dtype=float) + root


def reprojection_error(rel, uv_obs, s):
    """Mean per-joint image distance after placing ``rel`` with scale ``s``."""
    uv_obs = np.asarray(uv_obs, dtype=float)
    return float(np.linalg.norm(project(place(rel, uv_obs[0], s)) - uv_obs, axis=1).mean())


def refit_scale(rel, uv_obs):
    """Least-squares scale for a root-relative pose against observed keypoints.

    Starts from the weak-perspective closed form, which ignores depth
    offsets, then runs Gauss-Newton on the exact perspective residuals.
    """
    rel = np.asarray(rel, dtype=float)
    uv_obs = np.asarray(uv_obs, dtype=float)
    if rel.shape[0] < 2 or rel.shape[0] != uv_obs.shape[0]:
        raise DegenerateObservation("need matching poses with at least one non-root joint")
    du = uv_obs - uv_obs[0]
    if np.abs(du[1:]).max() < 1e-12:
        raise DegenerateObservation("all observed keypoints coincide")
    xy = rel[:, :2] - rel[0, :2]
    den = float((xy * xy).sum())
    if den < 1e-24:
        raise DegenerateObservation("reconstruction has no lateral extent")
    s = float((xy * du).sum()) / den
    if not s > 0:
        raise DegenerateObservation(f"weak-perspective scale is non-positive ({s:.4g})")
    a = rel[:, :2] - rel[0, :2]
    c = rel[:, 2] - rel[0, 2]
    u0 = uv_obs[0]
    for _ in range(POLISH_STEPS):
        w = 1.0 + s * c
        if w.min() <= 0.0:
            break
        pred = (u0 + s * a) / w[:, None]
        r = pred - uv_obs
        jac = (a - c[:, None] * u0) / (w * w)[:, None]
        jj = float((jac * jac).sum())
        if jj <= 0.0:
            break
        step = float((jac * r).sum()) / jj
        s_new = s - step
        if not s_new > 0:
            break
        s = s_new
        if abs(step) <= 1e-15 * s:
            break
    if not math.isfinite(s):
        raise NonFinite("scale refit diverged")
    return s


@dataclass
class IceResult:
    s: float
    joints: np.ndarray
    report: object
    trace: list = field(default_factory=list)


def ice(uv, d, s0, solver, steps=3):
    """Iterative camera estimation.

    Each step back-projects with the current scale, reconstructs with
    ``solver(joints) -> SolveReport`` and refits the scale to the observed
    ``uv``. ``trace`` rows are ``(step, s, reprojection error)`` where the
    error belongs to the reconstruction made at that step's scale. Stops
    early once the relative scale change falls below ``CONVERGED``.
    """
    uv = np.asarray(uv, dtype=float)
    steps = max(0, min(int(steps), MAX_STEPS))
    s = float(s0)
    trace = []
    for t in range(steps + 1):
        joints = backproject(uv, d, s)
        report = solver(joints)
        rel = report.recon - report.recon[0]
        if not np.all(np.isfinite(rel)):
            raise NonFinite(f"reconstruction at step {t} is not finite")
        trace.append((t, s, reprojection_error(rel, uv, s)))
        if t == steps:
            break
        s_new = refit_scale(rel, uv)
        done = abs(s_new - s) <= CONVERGED * s
        s = s_new
        if done:
            joints = backproject(uv, d, s)
            report = solver(joints)
            rel = report.recon - report.recon[0]
            trace.append((t + 1, s, reprojection_error(rel, uv, s)))
            break
    return IceResult(s, joints, report, trace)
