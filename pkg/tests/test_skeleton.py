import math

import numpy as np
import pytest
from hypothesis import given

from kinsolve import so3
from kinsolve.errors import DimensionMismatch, InputError, RootHasNoBone
from kinsolve.harness import random_rotation
from kinsolve.skeleton import (
    BUILTIN, KinematicTree, ShapeBasis, bone, bone_lengths, builtin_trees, eval_shape, fk,
    identity_rotations, load_builtin, load_builtin_basis,
)

from conftest import rotations, seeds


@pytest.fixture
def chain():
    tree = KinematicTree(("a", "b", "c"), (-1, 0, 1), ("body",) * 3)
    rest = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
    return tree, rest


def random_rots(K, seed):
    rng = np.random.default_rng(seed)
    return np.stack([random_rotation(rng) for _ in range(K)])


def test_identity_fk_returns_rest(body24):
    tree, rest = body24
    q, g = fk(tree, rest, identity_rotations(tree.K))
    np.testing.assert_array_equal(q, rest)
    np.testing.assert_array_equal(g, identity_rotations(tree.K))


def test_rotated_chain(chain):
    tree, rest = chain
    rots = identity_rotations(3)
    rots[0] = so3.rot_z(math.pi / 2)
    q, _ = fk(tree, rest, rots)
    np.testing.assert_allclose(q, [[0, 0, 0], [0, 1, 0], [0, 2, 0]], atol=1e-15)


@given(seeds)
def test_fk_preserves_bone_lengths(seed):
    tree, rest = load_builtin("body24")
    q, _ = fk(tree, rest, random_rots(tree.K, seed))
    np.testing.assert_allclose(bone_lengths(tree, q), bone_lengths(tree, rest), rtol=1e-12)


@given(seeds, rotations())
def test_fk_equivariant_under_root_prerotation(seed, g):
    tree, rest = load_builtin("body24")
    rots = random_rots(tree.K, seed)
    q, _ = fk(tree, rest, rots)
    rots2 = rots.copy()
    rots2[0] = g @ rots[0]
    q2, _ = fk(tree, rest, rots2)
    np.testing.assert_allclose(q2 - q2[0], (q - q[0]) @ g.T, atol=1e-12)


def test_fk_root_anchor(body24):
    tree, rest = body24
    q, _ = fk(tree, rest, identity_rotations(tree.K), root=[1.0, 2.0, 3.0])
    np.testing.assert_allclose(q, rest - rest[0] + [1, 2, 3])


def test_fk_dimension_mismatch(body24):
    tree, rest = body24
    with pytest.raises(DimensionMismatch):
        fk(tree, rest, identity_rotations(tree.K - 1))
    with pytest.raises(DimensionMismatch):
        fk(tree, rest[:-1], identity_rotations(tree.K))


def test_ancestors_and_bone(chain):
    tree, rest = chain
    assert tree.ancestors(2) == [0, 1]
    assert tree.ancestors(0) == []
    np.testing.assert_array_equal(bone(tree, rest, 2), [1, 0, 0])
    with pytest.raises(RootHasNoBone):
        bone(tree, rest, 0)


def test_body24_wrist_ancestry(body24):
    tree, _ = body24
    names = [tree.names[k] for k in tree.ancestors(tree.index("left_wrist"))]
    assert names == ["pelvis", "spine1", "spine2", "spine3", "left_collar", "left_shoulder", "left_elbow"]


def test_descendants(chain):
    tree, _ = chain
    assert tree.descendants(0) == [1, 2]
    assert tree.descendants(2) == []


@pytest.mark.parametrize("names, parents, tags", [
    (("a", "b"), (0, 0), ("body", "body")),
    (("a", "b"), (-1, -1), ("body", "body")),
    (("a", "b", "c"), (-1, 2, 1), ("body",) * 3),
    (("a", "a"), (-1, 0), ("body", "body")),
    (("a", "b"), (-1, 0), ("body", "tail")),
    ((), (), ()),
])
def test_tree_validation(names, parents, tags):
    with pytest.raises(InputError):
        KinematicTree(names, parents, tags)


def test_builtin_trees():
    trees = builtin_trees()
    assert set(trees) == set(BUILTIN)
    body, _ = trees["body24"]
    assert body.K == 24 and body.names[0] == "pelvis"
    whole, _ = trees["wholebody"]
    assert whole.K == 55 + 2
    assert whole.has("mouth_top") and whole.has("mouth_bottom")
    hand, _ = trees["hand16"]
    assert hand.K == 16 and hand.names[0] == "wrist"


def test_wholebody_tags_and_hand_roots(wholebody):
    tree, _ = wholebody
    assert set(tree.tags) == {"body", "left_hand", "right_hand", "face"}
    for tag, wrist in (("left_hand", "left_wrist"), ("right_hand", "right_wrist")):
        roots = {tree.parents[k] for k in tree.with_tag(tag)} - set(tree.with_tag(tag))
        assert roots == {tree.index(wrist)}
        assert tree.tags[tree.index(wrist)] == "body"
    face_roots = {tree.parents[k] for k in tree.with_tag("face")} - set(tree.with_tag("face"))
    assert face_roots == {tree.index("head")}


def test_builtin_is_a_copy():
    _, rest = load_builtin("body24")
    rest[:] = 0
    assert np.abs(load_builtin("body24")[1]).max() > 0


def test_subtree_reindexes(wholebody):
    tree, rest = wholebody
    sub, idx = tree.subtree(tree.index("left_wrist"), tree.with_tag("left_hand"))
    assert sub.names[0] == "left_wrist" and sub.K == 16
    for i in range(1, sub.K):
        assert idx[sub.parents[i]] == tree.parents[idx[i]]


@pytest.fixture
def basis():
    rng = np.random.default_rng(3)
    return ShapeBasis(rng.normal(size=(4, 3)), rng.normal(size=(2, 4, 3)), rng.normal(size=(1, 4, 3)))


def test_eval_shape_mean(basis):
    np.testing.assert_array_equal(eval_shape(basis, [0, 0], [0]), basis.mean)
    np.testing.assert_array_equal(eval_shape(basis), basis.mean)


def test_eval_shape_single_direction(basis):
    np.testing.assert_allclose(eval_shape(basis, [1, 0], [0]), basis.mean + basis.shape_dirs[0])


def test_eval_shape_linear(basis):
    half = eval_shape(basis, [0.5, 0.5], [0])
    e1, e2 = eval_shape(basis, [1, 0], [0]), eval_shape(basis, [0, 1], [0])
    np.testing.assert_allclose(half - basis.mean, 0.5 * ((e1 - basis.mean) + (e2 - basis.mean)), atol=1e-15)
    np.testing.assert_allclose(eval_shape(basis, [0, 0], [2.0]), basis.mean + 2 * basis.expr_dirs[0])


def test_eval_shape_counts(basis):
    with pytest.raises(DimensionMismatch):
        eval_shape(basis, [1.0], [0])
    with pytest.raises(DimensionMismatch):
        eval_shape(basis, [0, 0], [0, 0])


@pytest.mark.parametrize("name", BUILTIN)
def test_builtin_basis(name):
    b = load_builtin_basis(name)
    tree, rest = load_builtin(name)
    np.testing.assert_array_equal(eval_shape(b), rest)
    for beta in np.eye(b.n_shape):
        assert bone_lengths(tree, eval_shape(b, beta, np.zeros(b.n_expr))).min() > 0
