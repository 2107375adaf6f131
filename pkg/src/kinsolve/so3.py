"""Rotation algebra on 3x3 matrices.

Twist-and-swing factorisation: a rotation ``R`` acting on a bone direction
``t`` is written ``R = swing @ twist`` where ``twist`` spins about ``t`` and
``swing`` tilts ``t`` onto its target direction about an axis perpendicular to
both.
"""

import math

import numpy as np

from .errors import Degenerate, ZeroVector

EPS_NORM = 1e-10
PARALLEL_TOL = 1e-8

_I3 = np.eye(3)


def _xyz(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    return [float(a) for a in v]


def _rotation(c, s, x, y, z):
    """Rodrigues matrix ``c I + s [n] + (1 - c) n n^T`` for unit ``n = (x, y, z)``."""
    k = 1.0 - c
    return np.array([
        [c + k * x * x, k * x * y - s * z, k * x * z + s * y],
        [k * x * y + s * z, c + k * y * y, k * y * z - s * x],
        [k * x * z - s * y, k * y * z + s * x, c + k * z * z],
    ])


def skew(v):
    """Matrix ``S`` with ``S @ w == cross(v, w)``."""
    x, y, z = _xyz(v)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def cross(a, b):
    ax, ay, az = _xyz(a)
    bx, by, bz = _xyz(b)
    return np.array([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx])


def norm(v):
    x, y, z = _xyz(v)
    return math.sqrt(x * x + y * y + z * z)


def unit(v, what="vector"):
    x, y, z = _xyz(v)
    n = math.sqrt(x * x + y * y + z * z)
    if n < EPS_NORM:
        raise ZeroVector(f"{what} has norm {n:.3g} below {EPS_NORM:g}")
    return np.array([x / n, y / n, z / n])


def perpendicular(v):
    """Deterministic unit vector orthogonal to ``v``.

    Built from the coordinate axis least aligned with ``v``; ties go to the
    lowest axis index.
    """
    x, y, z = _xyz(unit(v))
    ax, ay, az = abs(x), abs(y), abs(z)
    if ax <= ay and ax <= az:
        c = (0.0, z, -y)
    elif ay <= az:
        c = (-z, 0.0, x)
    else:
        c = (y, -x, 0.0)
    return unit(c)


def axis_angle(axis, angle):
    """Rodrigues rotation about ``axis`` (normalised here) by ``angle`` radians."""
    x, y, z = _xyz(unit(axis, "rotation axis"))
    return _rotation(math.cos(angle), math.sin(angle), x, y, z)


def rot_x(angle):
    return axis_angle((1.0, 0.0, 0.0), angle)


def rot_y(angle):
    return axis_angle((0.0, 1.0, 0.0), angle)


def rot_z(angle):
    return axis_angle((0.0, 0.0, 1.0), angle)


def swing_between(t, p):
    """Minimal rotation taking the direction of ``t`` onto the direction of ``p``.

    The rotation axis is ``t x p``; only directions are matched, so the
    norms of ``t`` and ``p`` may differ. For antiparallel inputs the axis is
    :func:`perpendicular` of ``t`` and the angle is pi.
    """
    tx, ty, tz = _xyz(unit(t, "template bone"))
    px, py, pz = _xyz(unit(p, "target bone"))
    vx, vy, vz = ty * pz - tz * py, tz * px - tx * pz, tx * py - ty * px
    c = tx * px + ty * py + tz * pz
    s2 = vx * vx + vy * vy + vz * vz
    if s2 < PARALLEL_TOL * PARALLEL_TOL and c < 0.0:
        x, y, z = _xyz(perpendicular((tx, ty, tz)))
        return _rotation(-1.0, 0.0, x, y, z)
    # I + [v] + w [v]^2 with w = (1 - cos) / sin^2 in its well-conditioned form
    w = 1.0 / (1.0 + c) if c >= 0.0 else (1.0 - c) / s2
    d = 1.0 - w * s2
    return np.array([
        [d + w * vx * vx, w * vx * vy - vz, w * vx * vz + vy],
        [w * vx * vy + vz, d + w * vy * vy, w * vy * vz - vx],
        [w * vx * vz - vy, w * vy * vz + vx, d + w * vz * vz],
    ])


def twist_about(t, phi):
    """Rotation by ``phi`` radians about the bone ``t`` itself."""
    return axis_angle(t, phi)


def compose_twist_swing(swing, twist):
    return swing @ twist


def extract_twist(r, t):
    """Split ``r`` into ``(swing, phi)`` with ``r == swing @ twist_about(t, phi)``.

    Raises :class:`Degenerate` when ``r`` flips ``t`` onto ``-t``: the swing
    factor is then not unique.
    """
    r = np.asarray(r, dtype=float)
    th = unit(t, "template bone")
    tx, ty, tz = th.tolist()
    rt = r @ th
    px, py, pz = rt.tolist()
    s2 = (ty * pz - tz * py) ** 2 + (tz * px - tx * pz) ** 2 + (tx * py - ty * px) ** 2
    if s2 < PARALLEL_TOL * PARALLEL_TOL and tx * px + ty * py + tz * pz < 0.0:
        raise Degenerate("rotation maps the bone onto its opposite; swing is ambiguous")
    swing = swing_between(th, rt)
    u = perpendicular(th)
    ux, uy, uz = u.tolist()
    wx, wy, wz = (swing.T @ (r @ u)).tolist()
    # th . (u x w) and u . w
    sin_part = tx * (uy * wz - uz * wy) + ty * (uz * wx - ux * wz) + tz * (ux * wy - uy * wx)
    return swing, math.atan2(sin_part, ux * wx + uy * wy + uz * wz)


def angle_encode(phi):
    return (math.cos(phi), math.sin(phi))


def angle_decode(pair):
    c, s = float(pair[0]), float(pair[1])
    if math.hypot(c, s) < EPS_NORM:
        raise ZeroVector("twist encoding (0, 0) has no angle")
    return math.atan2(s, c)


def rotation_angle(r):
    """Angle in [0, pi] of a rotation matrix."""
    # atan2 form keeps precision near 0 and pi
    w = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return math.atan2(0.5 * norm(w), 0.5 * (float(np.trace(r)) - 1.0))


def geodesic(a, b):
    """Angular distance between two rotations, radians."""
    return rotation_angle(a.T @ b)


def to_axis_angle(r):
    """Return ``(axis, angle)``; identity maps to axis ``(1, 0, 0)``, angle 0."""
    angle = rotation_angle(r)
    if angle < 1e-12:
        return np.array([1.0, 0.0, 0.0]), 0.0
    if angle < math.pi - 1e-6:
        w = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
        return w / norm(w), angle
    # near pi the symmetric part carries the axis: sym(R) = cos I + (1 - cos) n n^T
    c = math.cos(angle)
    m = (0.5 * (r + r.T) - c * _I3) / (1.0 - c)
    col = m[:, int(np.argmax(np.diag(m)))]
    axis = unit(col)
    w = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if float(axis @ w) < 0.0:
        axis = -axis
    return axis, angle


def is_rotation(r, tol=1e-9):
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    return bool(np.linalg.norm(r.T @ r - _I3) < tol and abs(np.linalg.det(r) - 1.0) < tol)


def to_quaternion(r):
    """Unit quaternion ``(w, x, y, z)``; for I/O only."""
    from scipy.spatial.transform import Rotation

    x, y, z, w = Rotation.from_matrix(r).as_quat()
    return np.array([w, x, y, z])


def from_quaternion(q):
    from scipy.spatial.transform import Rotation

    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).as_matrix()
