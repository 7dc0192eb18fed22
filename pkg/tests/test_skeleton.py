import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from posefilter.skeleton import (
    HIPS,
    JOINTS,
    ROOT,
    SHOULDERS,
    Frame,
    Keypoint,
    MissingJoints,
    Skeleton,
    SkeletonGraph,
    clamp_confidence,
    complete_skeleton,
    default_graph,
    synthesize_neck,
    synthesize_root,
)

coord = st.floats(-5, 5, allow_nan=False)
conf = st.floats(0, 1)


def sk(*kps):
    return Skeleton.from_keypoints(kps)


def test_root_symmetric_example():
    s = sk(
        Keypoint("left_shoulder", (-0.2, 0, 2), 0.8),
        Keypoint("right_shoulder", (0.2, 0, 2), 0.8),
        Keypoint("left_hip", (-0.15, -0.5, 2), 0.8),
        Keypoint("right_hip", (0.15, -0.5, 2), 0.8),
    )
    root = synthesize_root(s).get(ROOT)
    np.testing.assert_allclose(root.position, (0, -0.25, 2), atol=1e-15)
    assert root.confidence == pytest.approx(0.8)


def test_root_two_point_example():
    s = sk(Keypoint("left_shoulder", (0, 0, 1), 1.0), Keypoint("right_hip", (0, -0.6, 1), 0.5))
    root = synthesize_root(s).get(ROOT)
    np.testing.assert_allclose(root.position, (0, -0.3, 1), atol=1e-15)
    assert root.confidence == pytest.approx(0.75)


@given(
    st.lists(st.tuples(coord, coord, coord, conf), min_size=4, max_size=4),
    st.sets(st.sampled_from(SHOULDERS), min_size=1),
    st.sets(st.sampled_from(HIPS), min_size=1),
)
def test_root_matches_bruteforce_mean(vals, shoulders, hips):
    names = sorted(shoulders) + sorted(hips)
    kps = [Keypoint(n, v[:3], v[3]) for n, v in zip(names, vals)]
    root = synthesize_root(Skeleton.from_keypoints(kps)).get(ROOT)
    # independent oracle: plain python sums
    n = len(kps)
    expected = [sum(k.position[a] for k in kps) / n for a in range(3)]
    np.testing.assert_allclose(root.position, expected, atol=1e-12)
    assert root.confidence == pytest.approx(sum(k.confidence for k in kps) / n)


@given(st.lists(st.tuples(coord, coord, coord, conf), min_size=4, max_size=4), st.permutations(range(4)))
def test_root_permutation_invariant(vals, perm):
    names = list(SHOULDERS) + list(HIPS)
    kps = [Keypoint(n, v[:3], v[3]) for n, v in zip(names, vals)]
    a = synthesize_root(Skeleton.from_keypoints(kps)).get(ROOT)
    b = synthesize_root(Skeleton.from_keypoints([kps[i] for i in perm])).get(ROOT)
    np.testing.assert_allclose(a.position, b.position, atol=1e-12)
    assert a.confidence == pytest.approx(b.confidence)


def test_root_needs_shoulder_and_hip():
    with pytest.raises(MissingJoints):
        synthesize_root(sk(Keypoint("left_shoulder", (0, 0, 1), 1.0)))
    with pytest.raises(MissingJoints):
        synthesize_root(sk(Keypoint("left_hip", (0, 0, 1), 1.0)))


def test_neck_is_shoulder_midpoint():
    s = sk(Keypoint("left_shoulder", (-0.2, 0.1, 2), 0.6), Keypoint("right_shoulder", (0.2, 0.3, 2), 1.0))
    neck = synthesize_neck(s).get("neck")
    np.testing.assert_allclose(neck.position, (0, 0.2, 2))
    assert neck.confidence == pytest.approx(0.8)
    with pytest.raises(MissingJoints):
        synthesize_neck(sk(Keypoint("left_shoulder", (0, 0, 1), 1.0)))


def test_complete_skeleton_keeps_given_joints():
    s = sk(
        Keypoint("neck", (9, 9, 9), 0.3),
        Keypoint("left_shoulder", (-0.2, 0, 2), 1.0),
        Keypoint("left_hip", (-0.1, -0.5, 2), 1.0),
    )
    out = complete_skeleton(s)
    assert out.get("neck").position == (9, 9, 9)
    assert ROOT in out


def test_forearm_proportion():
    g = default_graph()
    assert g.proportion[("left_elbow", "left_wrist")] == 0.146
    assert g.proportion[("right_elbow", "right_wrist")] == 0.146


def test_graph_is_a_tree_over_all_joints():
    g = default_graph()
    order = g.topological_order()
    assert set(order) == set(JOINTS)
    assert order[0] == ROOT
    children = [c for _, c in g.edges]
    assert sorted(children) == sorted(j for j in JOINTS if j != ROOT)
    assert len(set(children)) == len(children)
    assert all(0 < r < 0.5 for r in g.proportion.values())


def test_graph_rejects_cycles_and_bad_ratios():
    with pytest.raises(ValueError):
        SkeletonGraph((("neck", "nose"), ("nose", "neck")), {("neck", "nose"): 0.1, ("nose", "neck"): 0.1})
    with pytest.raises(ValueError):
        SkeletonGraph((("root", "neck"),), {("root", "neck"): 0.6})
    with pytest.raises(ValueError):
        SkeletonGraph((("root", "nose"), ("neck", "nose")), {("root", "nose"): 0.1, ("neck", "nose"): 0.1})


def test_keypoint_validation():
    with pytest.raises(ValueError):
        Keypoint("elbow", (0, 0, 0), 0.5)
    with pytest.raises(ValueError):
        Keypoint("nose", (0, math.nan, 0), 0.5)
    with pytest.raises(ValueError):
        Keypoint("nose", (0, 0, 0), 1.2)
    with pytest.raises(ValueError):
        Skeleton.from_keypoints([Keypoint("nose", (0, 0, 0), 1), Keypoint("nose", (0, 0, 1), 1)])
    with pytest.raises(ValueError):
        Skeleton({}, track_id=-1)
    with pytest.raises(ValueError):
        Frame(math.inf)


@given(conf, st.lists(st.floats(0, 3), max_size=8))
def test_clamping_any_adjustment_sequence(c, factors):
    kp = Keypoint("nose", (0, 0, 0), c)
    for f in factors:
        kp = kp.with_confidence(kp.confidence * f)
        assert 0.0 <= kp.confidence <= 1.0
    assert clamp_confidence(-0.1) == 0.0 and clamp_confidence(7) == 1.0


def test_skeleton_is_immutable():
    s = sk(Keypoint("nose", (0, 0, 0), 1.0))
    with pytest.raises(Exception):
        s.track_id = 3
    t = s.with_keypoints([Keypoint("neck", (0, -0.1, 0), 1.0)])
    assert "neck" not in s and "neck" in t


def test_every_pair_of_shoulder_hip_synthesizes_root():
    for sh, hp in itertools.product(SHOULDERS, HIPS):
        s = sk(Keypoint(sh, (0, 0, 1), 1.0), Keypoint(hp, (0, -1, 1), 1.0))
        assert ROOT in synthesize_root(s)
