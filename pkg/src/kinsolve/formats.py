"""JSON and CSV wire formats.

Every reader validates against a JSON schema and raises
:class:`~kinsolve.errors.SchemaError` carrying the JSON pointer of the
offending value (syntax errors carry line and column instead).
"""

import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .errors import DimensionMismatch, InputError, SchemaError
from .skeleton import TAGS, KinematicTree, ShapeBasis, check_rest

_num = {"type": "number"}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_vec2 = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_pose = {"type": "array", "items": _vec3, "minItems": 1}

SKELETON_SCHEMA = {
    "type": "object",
    "required": ["joints"],
    "additionalProperties": False,
    "properties": {
        "joints": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "parent", "rest"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "parent": {"type": ["integer", "string", "null"]},
                    "rest": _vec3,
                    "tag": {"enum": list(TAGS)},
                },
            },
        },
    },
}

SHAPE_SCHEMA = {
    "type": "object",
    "required": ["mean", "shape_dirs"],
    "additionalProperties": False,
    "properties": {
        "mean": {"oneOf": [{"type": "string"}, _pose]},
        "shape_dirs": {"type": "array", "items": _pose},
        "expr_dirs": {"type": "array", "items": _pose},
    },
}

MARKERS_SCHEMA = {
    "type": "object",
    "required": ["mouth_top", "mouth_bottom"],
    "additionalProperties": False,
    "properties": {"mouth_top": _vec3, "mouth_bottom": _vec3},
}

TARGET_SCHEMA = {
    "type": "object",
    "required": ["joints"],
    "additionalProperties": False,
    "properties": {"joints": _pose, "markers": MARKERS_SCHEMA},
}

TWIST_SCHEMA = {
    "type": "object",
    "minProperties": 1,
    "maxProperties": 1,
    "additionalProperties": False,
    "properties": {
        "phi": {"type": "array", "items": _num},
        "cos_sin": {"type": "array", "items": _vec2},
    },
}

ROTATIONS_SCHEMA = {
    "type": "object",
    "required": ["rotations"],
    "additionalProperties": False,
    "properties": {
        "rotations": {"type": "array", "minItems": 1,
                      "items": {"type": "array", "items": _num, "minItems": 9, "maxItems": 9}},
    },
}

P25_SCHEMA = {
    "type": "object",
    "required": ["uv", "d", "s0"],
    "additionalProperties": False,
    "properties": {
        "uv": {"type": "array", "items": _vec2, "minItems": 2},
        "d": {"type": "array", "items": _num, "minItems": 2},
        "s0": {"type": "number", "exclusiveMinimum": 0},
    },
}


def load_json(text, schema, source="<input>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", None) from None
    validator = jsonschema.Draft202012Validator(schema)
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise SchemaError(f"{source}: {err.message}", pointer)
    return doc


def read_text(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _finite(arr, source, what):
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{source}: {what} contains non-finite values", f"/{what}")
    return arr


def parse_skeleton(text, source="<skeleton>"):
    """Parse a skeleton document into ``(tree, rest)``."""
    doc = load_json(text, SKELETON_SCHEMA, source)
    joints = doc["joints"]
    names = [j["name"] for j in joints]
    lookup = {n: k for k, n in enumerate(names)}
    parents = []
    for k, j in enumerate(joints):
        p = j["parent"]
        if isinstance(p, str):
            if p not in lookup:
                raise SchemaError(f"{source}: unknown parent {p!r}", f"/joints/{k}/parent")
            p = lookup[p]
        parents.append(-1 if p is None else p)
    tags = [j.get("tag", "body") for j in joints]
    try:
        tree = KinematicTree(tuple(names), tuple(parents), tuple(tags))
        rest = check_rest(tree, np.array([j["rest"] for j in joints], dtype=float))
    except InputError as exc:
        raise SchemaError(f"{source}: {exc}", "/joints") from None
    return tree, rest


def load_skeleton(name_or_path):
    """``name_or_path`` is a built-in tree name or a path to a skeleton file."""
    from .skeleton import BUILTIN, load_builtin

    if name_or_path in BUILTIN and not Path(name_or_path).exists():
        return load_builtin(name_or_path)
    return parse_skeleton(read_text(name_or_path), source=str(name_or_path))


def skeleton_to_json(tree, rest):
    joints = [
        {"name": n, "parent": None if p < 0 else p, "rest": [float(x) for x in rest[k]], "tag": t}
        for k, (n, p, t) in enumerate(zip(tree.names, tree.parents, tree.tags))
    ]
    return {"joints": joints}


def parse_shape_basis(text, source="<basis>", resolve=None):
    """Parse a shape basis. A string ``mean`` is a skeleton file reference
    handed to ``resolve`` (default: read relative to the current directory)."""
    doc = load_json(text, SHAPE_SCHEMA, source)
    mean = doc["mean"]
    if isinstance(mean, str):
        mean = resolve(mean) if resolve is not None else load_skeleton(mean)[1]
    mean = _finite(np.asarray(mean, dtype=float), source, "mean")
    K = mean.shape[0]
    dirs = {}
    for key in ("shape_dirs", "expr_dirs"):
        items = doc.get(key, [])
        for i, d in enumerate(items):
            if len(d) != K:
                raise SchemaError(f"{source}: direction has {len(d)} joints, mean has {K}", f"/{key}/{i}")
        dirs[key] = np.asarray(items, dtype=float).reshape(-1, K, 3)
    return ShapeBasis(mean, dirs["shape_dirs"], dirs["expr_dirs"])


def parse_target(text, K=None, source="<target>", require_markers=False):
    """Return ``(joints, markers)``; ``markers`` is ``None`` or a dict of two 3-vectors."""
    doc = load_json(text, TARGET_SCHEMA, source)
    joints = _finite(np.asarray(doc["joints"], dtype=float), source, "joints")
    if K is not None and joints.shape[0] != K:
        raise SchemaError(f"{source}: {joints.shape[0]} joints given, tree has {K}", "/joints")
    markers = doc.get("markers")
    if markers is None and require_markers:
        raise SchemaError(f"{source}: missing required field 'markers'", "/markers")
    if markers is not None:
        markers = {k: _finite(np.asarray(v, dtype=float), source, f"markers/{k}") for k, v in markers.items()}
    return joints, markers


def parse_twists(text, K, source="<twists>"):
    """Twist angles as a length-``K`` array (root entry 0).

    Accepts either ``K`` entries (root ignored) or ``K - 1`` entries for the
    non-root joints.
    """
    from .so3 import angle_decode

    doc = load_json(text, TWIST_SCHEMA, source)
    key = next(iter(doc))
    if key == "phi":
        phi = np.asarray(doc["phi"], dtype=float)
    else:
        try:
            phi = np.array([angle_decode(cs) for cs in doc["cos_sin"]])
        except InputError as exc:
            raise SchemaError(f"{source}: {exc}", "/cos_sin") from None
        except ArithmeticError as exc:
            raise SchemaError(f"{source}: {exc}", "/cos_sin") from None
    _finite(phi, source, key)
    if phi.size == K - 1:
        phi = np.concatenate([[0.0], phi])
    if phi.size != K:
        raise SchemaError(f"{source}: {phi.size} twist angles for {K} joints (expected {K} or {K - 1})", f"/{key}")
    phi = phi.copy()
    phi[0] = 0.0
    return phi


def parse_rotations(text, K=None, source="<rotations>"):
    from .so3 import is_rotation

    doc = load_json(text, ROTATIONS_SCHEMA, source)
    rots = np.asarray(doc["rotations"], dtype=float).reshape(-1, 3, 3)
    if K is not None and rots.shape[0] != K:
        raise SchemaError(f"{source}: {rots.shape[0]} rotations for {K} joints", "/rotations")
    for k, r in enumerate(rots):
        if not is_rotation(r):
            raise SchemaError(f"{source}: entry is not a rotation matrix", f"/rotations/{k}")
    return rots


def parse_p25(text, source="<p25>"):
    """Return ``(uv, d, s0)``."""
    doc = load_json(text, P25_SCHEMA, source)
    uv = _finite(np.asarray(doc["uv"], dtype=float), source, "uv")
    d = _finite(np.asarray(doc["d"], dtype=float), source, "d")
    if d.shape[0] != uv.shape[0]:
        raise SchemaError(f"{source}: {d.shape[0]} depths for {uv.shape[0]} keypoints", "/d")
    return uv, d, float(doc["s0"])


def rotations_to_json(rots):
    return [[float(x) for x in r.ravel()] for r in rots]


def pose_to_json(joints):
    return [[float(x) for x in row] for row in joints]


def twists_to_json(phi):
    return {"phi": [float(x) for x in phi]}


def dumps(doc):
    """Deterministic JSON text: fixed key order from the producer, shortest float repr."""
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def check_count(arr, K, what):
    if len(arr) != K:
        raise DimensionMismatch(f"{what} has {len(arr)} entries, expected {K}")


def fmt(x, digits=6):
    """Fixed-point CSV cell; rounding keeps golden files stable across libm versions."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.{digits}f}"
