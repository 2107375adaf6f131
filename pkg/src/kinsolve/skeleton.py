"""Kinematic trees, rest-pose templates and forward kinematics.

Conventions: joint 0 is the root, parents precede children, rotations are
``(K, 3, 3)`` arrays of relative rotations ``R[pa(k), k]`` with entry 0 the
global root rotation, and positions are ``(K, 3)`` arrays in meters.
A joint's rotation acts on the bone that ends at that joint:

    q[k] = G[k] @ (t[k] - t[pa(k)]) + q[pa(k)],   G[k] = G[pa(k)] @ R[k]
"""

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import DimensionMismatch, InputError, RootHasNoBone

ROOT = -1
TAGS = ("body", "left_hand", "right_hand", "face")


@dataclass(frozen=True)
class KinematicTree:
    names: tuple
    parents: tuple
    tags: tuple
    _index: dict = field(init=False, repr=False, compare=False)
    _children: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names, parents, tags = tuple(self.names), tuple(int(p) for p in self.parents), tuple(self.tags)
        if not (len(names) == len(parents) == len(tags)) or not names:
            raise InputError("names, parents and tags must be non-empty and of equal length")
        if parents[0] != ROOT:
            raise InputError("joint 0 must be the root")
        for k, p in enumerate(parents[1:], start=1):
            if p == ROOT:
                raise InputError(f"joint {k} ({names[k]}) is a second root")
            if not 0 <= p < k:
                raise InputError(f"joint {k} ({names[k]}) has parent {p}; parents must precede children")
        if len(set(names)) != len(names):
            raise InputError("joint names must be unique")
        for k, tag in enumerate(tags):
            if tag not in TAGS:
                raise InputError(f"joint {k} ({names[k]}) has unknown tag {tag!r}")
        children = [[] for _ in names]
        for k, p in enumerate(parents[1:], start=1):
            children[p].append(k)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "_index", {n: k for k, n in enumerate(names)})
        object.__setattr__(self, "_children", tuple(tuple(c) for c in children))

    def __len__(self):
        return len(self.names)

    @property
    def K(self):
        return len(self.names)

    def index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise InputError(f"no joint named {name!r}") from None

    def has(self, name):
        return name in self._index

    def parent(self, k):
        return self.parents[k]

    def children(self, k):
        return self._children[k]

    def ancestors(self, k):
        """Ancestors of ``k`` ordered root first, excluding ``k``."""
        self._check(k)
        out = []
        p = self.parents[k]
        while p != ROOT:
            out.append(p)
            p = self.parents[p]
        return out[::-1]

    def descendants(self, k):
        """Strict descendants of ``k`` in topological order."""
        self._check(k)
        out, stack = [], list(self._children[k])
        while stack:
            j = stack.pop()
            out.append(j)
            stack.extend(self._children[j])
        return sorted(out)

    def with_tag(self, *tags):
        return [k for k, t in enumerate(self.tags) if t in tags]

    def subtree(self, root, members):
        """Induced sub-tree on ``[root] + members`` re-rooted at ``root``.

        Returns ``(tree, idx)`` where ``idx[i]`` is the index in ``self`` of
        sub-tree joint ``i``. Every member must have its parent in the set.
        """
        idx = [root] + sorted(set(members) - {root})
        local = {g: i for i, g in enumerate(idx)}
        parents = [ROOT]
        for g in idx[1:]:
            p = self.parents[g]
            if p not in local:
                raise InputError(f"joint {self.names[g]} is detached from sub-tree rooted at {self.names[root]}")
            parents.append(local[p])
        tree = KinematicTree(tuple(self.names[g] for g in idx), tuple(parents), tuple(self.tags[g] for g in idx))
        return tree, idx

    def _check(self, k):
        if not 0 <= k < len(self.names):
            raise InputError(f"joint index {k} out of range for {len(self.names)} joints")


def bone(tree, rest, k):
    """Template bone vector ``t[k] - t[pa(k)]``."""
    if tree.parents[k] == ROOT:
        raise RootHasNoBone(f"joint {k} ({tree.names[k]}) is the root")
    return rest[k] - rest[tree.parents[k]]


def bone_lengths(tree, joints):
    p = np.asarray(tree.parents[1:])
    return np.linalg.norm(joints[1:] - joints[p], axis=1)


def check_rest(tree, rest):
    rest = np.asarray(rest, dtype=float)
    if rest.shape != (tree.K, 3):
        raise DimensionMismatch(f"rest pose has shape {rest.shape}, expected ({tree.K}, 3)")
    if not np.all(np.isfinite(rest)):
        raise InputError("rest pose has non-finite coordinates")
    lengths = bone_lengths(tree, rest)
    if lengths.size and lengths.min() <= 0.0:
        k = int(np.argmin(lengths)) + 1
        raise InputError(f"zero-length template bone at joint {k} ({tree.names[k]})")
    return rest


_I3 = np.eye(3)


def fk(tree, rest, rots, root=None):
    """Forward kinematics.

    Returns ``(joints, globals)``. The root lands on ``rest[0]`` unless
    ``root`` gives another anchor position.
    """
    rots = np.asarray(rots, dtype=float)
    rest = np.asarray(rest, dtype=float)
    K = tree.K
    if rest.shape != (K, 3) or rots.shape != (K, 3, 3):
        raise DimensionMismatch(
            f"tree has {K} joints but rest is {rest.shape} and rotations are {rots.shape}")
    q = np.empty((K, 3))
    g = np.empty((K, 3, 3))
    q[0] = rest[0] if root is None else root
    g[0] = rots[0]
    parents = tree.parents
    for k in range(1, K):
        p = parents[k]
        g[k] = g[p] @ rots[k]
        # displacement form: identity rotations reproduce rest bit for bit
        q[k] = rest[k] + (g[k] - _I3) @ (rest[k] - rest[p]) + (q[p] - rest[p])
    return q, g


def identity_rotations(K):
    return np.tile(np.eye(3), (K, 1, 1))


@dataclass(frozen=True)
class ShapeBasis:
    """Linear rest-pose model ``mean + sum(beta_i * shape_i) + sum(psi_j * expr_j)``."""

    mean: np.ndarray
    shape_dirs: np.ndarray
    expr_dirs: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        K = mean.shape[0]
        shape_dirs = np.asarray(self.shape_dirs, dtype=float).reshape(-1, K, 3)
        expr_dirs = np.asarray(self.expr_dirs, dtype=float).reshape(-1, K, 3)
        if mean.shape != (K, 3):
            raise DimensionMismatch(f"mean rest pose has shape {mean.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "shape_dirs", shape_dirs)
        object.__setattr__(self, "expr_dirs", expr_dirs)

    @property
    def n_shape(self):
        return self.shape_dirs.shape[0]

    @property
    def n_expr(self):
        return self.expr_dirs.shape[0]


def eval_shape(basis, beta=None, psi=None):
    beta = np.zeros(basis.n_shape) if beta is None else np.asarray(beta, dtype=float).ravel()
    psi = np.zeros(basis.n_expr) if psi is None else np.asarray(psi, dtype=float).ravel()
    if beta.size != basis.n_shape:
        raise DimensionMismatch(f"{beta.size} shape coefficients for a basis of {basis.n_shape}")
    if psi.size != basis.n_expr:
        raise DimensionMismatch(f"{psi.size} expression coefficients for a basis of {basis.n_expr}")
    rest = basis.mean.copy()
    if beta.size:
        rest += np.tensordot(beta, basis.shape_dirs, axes=1)
    if psi.size:
        rest += np.tensordot(psi, basis.expr_dirs, axes=1)
    return rest


BUILTIN = ("body24", "hand16", "wholebody")


@lru_cache(maxsize=None)
def _builtin(name):
    from .formats import parse_skeleton

    text = resources.files("kinsolve.data").joinpath(f"{name}.json").read_text()
    return parse_skeleton(text, source=f"{name}.json")


def load_builtin(name):
    """``(tree, rest)`` for one of :data:`BUILTIN`; ``rest`` is a fresh copy."""
    if name not in BUILTIN:
        raise InputError(f"unknown built-in tree {name!r}; choose from {', '.join(BUILTIN)}")
    tree, rest = _builtin(name)
    return tree, rest.copy()


def builtin_trees():
    return {name: load_builtin(name) for name in BUILTIN}


@lru_cache(maxsize=None)
def _builtin_basis(name):
    from .formats import parse_shape_basis

    text = resources.files("kinsolve.data").joinpath(f"{name}_shape.json").read_text()
    return parse_shape_basis(text, source=f"{name}_shape.json", resolve=lambda ref: _builtin(ref.removesuffix(".json"))[1])


def load_builtin_basis(name):
    if name not in BUILTIN:
        raise InputError(f"unknown built-in tree {name!r}")
    return _builtin_basis(name)
