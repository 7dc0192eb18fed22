import numpy as np
import pytest
from conftest import posed, shifted
from hypothesis import given
from hypothesis import strategies as st

from posefilter.pipeline import (
    FollowerState,
    OutOfOrderFrame,
    Pipeline,
    PipelineConfig,
    follow,
    run_stream,
)
from posefilter.sim import NoiseSpec, ScenarioSpec, generate
from posefilter.skeleton import Frame

DT = 1 / 30
OFFSET = np.array([0.150, 0.0, 0.150])


def single_person_stream(n=40):
    base = posed(1.75, base=(0.0, 0.0, 2.0), drop=("root", "neck"))
    return [Frame(k * DT, (shifted(base, (0.1 * k * DT, 0, 0)),)) for k in range(n)]


def test_clean_single_person_target():
    pipe = Pipeline(PipelineConfig(filter="none"))
    for fr in single_person_stream():
        _, target = pipe.process_frame(fr)
        np.testing.assert_allclose(target, fr.skeletons[0].position("left_wrist") + OFFSET, atol=1e-15)


def test_none_filter_is_passthrough_of_labeled_output():
    frames = generate(ScenarioSpec(task="t1", duration=2.0, seed=2)).frames
    pipe, ref = Pipeline(PipelineConfig(filter="none")), Pipeline(PipelineConfig(filter="none"))
    for fr in frames:
        out, _ = pipe.process_frame(fr)
        assert list(out.skeletons) == ref.labeled(fr)


@pytest.mark.parametrize("filt", ["kalman1", "kalman2", "permanence"])
def test_filter_never_changes_identities(filt):
    frames = generate(ScenarioSpec(task="t3", duration=3.0, seed=4)).frames
    a, b = Pipeline(PipelineConfig(filter="none")), Pipeline(PipelineConfig(filter=filt))
    for fr in frames:
        ra, _ = a.process_frame(fr)
        rb, _ = b.process_frame(fr)
        assert [s.track_id for s in ra.skeletons] == [s.track_id for s in rb.skeletons]
    assert a.operator == b.operator


def test_empty_frame_behaviour():
    stream = single_person_stream(35)
    perm, none = Pipeline(PipelineConfig()), Pipeline(PipelineConfig(filter="none"))
    for fr in stream:
        perm.process_frame(fr)
        none.process_frame(fr)
    empty = Frame(stream[-1].timestamp + DT)
    out, target = perm.process_frame(empty)
    assert out.skeletons == () and target is not None
    out, target = none.process_frame(empty)
    assert out.skeletons == () and target is None
    assert Pipeline().process_frame(Frame(0.0))[1] is None


def test_out_of_order_frame_rejected_without_side_effects():
    pipe = Pipeline()
    stream = single_person_stream(3)
    for fr in stream:
        pipe.process_frame(fr)
    snapshot = (pipe.frames_seen, pipe.last_time, dict(pipe.registry.tracks), pipe.registry.next_id)
    with pytest.raises(OutOfOrderFrame):
        pipe.process_frame(stream[1])
    with pytest.raises(OutOfOrderFrame):
        pipe.process_frame(stream[-1])
    assert snapshot == (pipe.frames_seen, pipe.last_time, dict(pipe.registry.tracks), pipe.registry.next_id)


def test_operator_is_nearest_and_locks():
    near = posed(base=(-0.3, 0, 1.6), drop=("root", "neck"))
    far = posed(base=(0.3, 0, 2.4), drop=("root", "neck"))
    pipe = Pipeline(PipelineConfig(filter="none", warmup_frames=5))
    for k in range(5):
        pipe.process_frame(Frame(k * DT, (far, near)))
    op = pipe.operator
    assert pipe.locked
    near_id = next(tid for tid, tr in pipe.registry.tracks.items()
                   if tr.skeleton.position("nose")[2] == near.position("nose")[2])
    assert op == near_id
    # after lock, the other person stepping closer must not steal the target
    closer = shifted(far, (0, 0, -1.2))
    for k in range(5, 10):
        pipe.process_frame(Frame(k * DT, (closer, near)))
    assert pipe.operator == op
    explicit = Pipeline(PipelineConfig(operator_track=7))
    assert explicit.locked and explicit.operator == 7


def test_target_has_no_gaps_through_occlusions():
    sc = generate(ScenarioSpec(task="t3", seed=1))
    res = run_stream(sc.frames, PipelineConfig())
    assert len(res.target) == len(sc.frames)
    assert len(res.ee) == len(sc.frames)


def test_follow_examples():
    s = FollowerState(np.array([1.0, 2.0, 3.0]), gain=5.0)
    np.testing.assert_array_equal(follow(s, [1.0, 2.0, 3.0], DT).ee_position, [1, 2, 3])
    np.testing.assert_allclose(follow(s, [0, 0, 0], 0.2).ee_position, 0, atol=1e-15)
    with pytest.raises(ValueError):
        follow(s, [0, 0, 0], 0.0)
    with pytest.raises(ValueError):
        FollowerState(np.zeros(3), gain=0.0)


def test_follow_geometric_decay():
    target = np.array([0.3, -0.2, 1.0])
    s = FollowerState(np.zeros(3), gain=5.0)
    e0 = np.linalg.norm(target - s.ee_position)
    for k in range(1, 30):
        s = follow(s, target, DT)
        assert np.linalg.norm(target - s.ee_position) == pytest.approx(e0 * (1 - 5.0 * DT) ** k, rel=1e-9)


@given(st.floats(0.01, 1.99), st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_follow_contractive(gdt, xs):
    start, target = np.array(xs[:3]), np.array(xs[3:])
    if np.linalg.norm(start - target) < 1e-6:
        return
    s = follow(FollowerState(start, gain=gdt / DT), target, DT)
    assert np.linalg.norm(s.ee_position - target) < np.linalg.norm(start - target)


def test_run_stream_follower_starts_on_target():
    res = run_stream(single_person_stream(10), PipelineConfig(filter="none"))
    np.testing.assert_array_equal(res.ee[0][1], res.target[0][1])
    assert [t for t, _ in res.ee] == [fr.timestamp for fr in single_person_stream(10)]


def test_noiseless_permanence_tracks_wrist():
    sc = generate(ScenarioSpec(task="custom", duration=4.0, noise=NoiseSpec.noiseless(), seed=0))
    res = run_stream(sc.frames, PipelineConfig())
    truth = sc.truth[0]["left_wrist"].positions
    err = [np.linalg.norm(p - OFFSET - truth[k]) for k, (_, p) in enumerate(res.target)]
    assert np.mean(err[30:]) < 0.01


@pytest.mark.parametrize("kw", [dict(filter="ukf"), dict(target_joint="hand"), dict(safety_offset=(0, 0)),
                                dict(follower_gain=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        PipelineConfig(**kw)


def test_filter_aliases():
    assert PipelineConfig(filter="kf2").filter == "kalman2"
    assert PipelineConfig().with_filter("perm").filter == "permanence"
