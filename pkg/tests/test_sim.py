import numpy as np
import pytest

from posefilter.sim import (
    EMITTED_JOINTS,
    InvalidSpec,
    NoiseSpec,
    Occlusion,
    ScenarioSpec,
    body_from_height,
    default_occlusions,
    generate,
    keyframe_path,
    two_link_ik,
)
from posefilter.skeleton import JOINTS, default_graph
from posefilter.spatial import SpatialConfig, estimate_height

G = default_graph()


def bone(sk, a, b):
    return np.linalg.norm(sk.position(a) - sk.position(b))


def test_body_forearm_worked_example():
    assert bone(body_from_height(1.712), "left_elbow", "left_wrist") == pytest.approx(0.25, abs=5e-4)


@pytest.mark.parametrize("h", [1.0, 1.55, 1.8, 2.2])
def test_body_has_exact_bone_lengths(h):
    sk = body_from_height(h)
    for (a, b), r in G.proportion.items():
        assert bone(sk, a, b) == pytest.approx(r * h, rel=1e-12)


def test_body_closed_loop_height():
    assert abs(estimate_height(body_from_height(1.80), G, SpatialConfig()) - 1.80) < 1e-9


def test_body_scales_linearly():
    a, b = body_from_height(1.0), body_from_height(2.0)
    for e in G.edges:
        assert bone(b, *e) == pytest.approx(2 * bone(a, *e), rel=1e-12)


def test_body_root_and_neck_are_joint_means():
    sk = body_from_height(1.7)
    np.testing.assert_allclose(sk.position("neck"), (sk.position("left_shoulder") + sk.position("right_shoulder")) / 2, atol=1e-15)
    quad = ["left_shoulder", "right_shoulder", "left_hip", "right_hip"]
    np.testing.assert_allclose(sk.position("root"), np.mean([sk.position(j) for j in quad], axis=0), atol=1e-15)


def test_two_link_ik_keeps_bone_lengths(rng):
    for _ in range(50):
        s = rng.standard_normal(3)
        target = s + rng.uniform(-0.6, 0.6, 3)
        elbow, wrist = two_link_ik(s, target, 0.3, 0.25)
        assert np.linalg.norm(elbow - s) == pytest.approx(0.3, abs=1e-9)
        assert np.linalg.norm(wrist - elbow) == pytest.approx(0.25, abs=1e-9)
        if 0.05 + 1e-3 < np.linalg.norm(target - s) < 0.55 - 1e-3:
            np.testing.assert_allclose(wrist, target, atol=1e-9)


def test_keyframe_path_hits_keys():
    path = keyframe_path([(0, [0, 0, 0]), (1, [1, 0, 0]), (2, [1, 1, 0])])
    np.testing.assert_allclose(path(1.0), [1, 0, 0])
    np.testing.assert_allclose(path(0.5), [0.5, 0, 0])
    np.testing.assert_allclose(path(5), [1, 1, 0])


def test_noiseless_measurements_equal_truth():
    sc = generate(ScenarioSpec(task="t1", duration=2.0, noise=NoiseSpec.noiseless(), occlusions=[]))
    for tf, mf in zip(sc.truth_frames, sc.frames):
        truth = {sk.track_id: sk for sk in tf.skeletons}
        for meas in mf.skeletons:
            pid = min(truth, key=lambda i: np.linalg.norm(truth[i].position("nose") - meas.position("nose")))
            assert set(meas.keypoints) == set(EMITTED_JOINTS)
            for j, kp in meas.keypoints.items():
                assert kp.position == truth[pid].keypoints[j].position
                assert kp.confidence == 1.0


def test_occlusion_window_hides_joint():
    occ = Occlusion(0, ("left_wrist",), 100 / 30, 131 / 30)
    sc = generate(ScenarioSpec(task="t0", duration=6.0, occlusions=[occ], seed=3))
    truth = sc.truth[0]["left_wrist"]
    for k in range(100, 131):
        fr = sc.frames[k]
        wrist_true = truth.positions[k]
        for sk in fr.skeletons:
            kp = sk.get("left_wrist")
            # an operator-side detection near the true wrist must be a low-confidence hallucination
            if kp is not None and np.linalg.norm(kp.xyz - wrist_true) < 0.45:
                assert kp.confidence < 0.4


def test_noise_statistics_match_spec():
    noise = NoiseSpec()
    sc = generate(ScenarioSpec(task="t0", duration=60.0, occlusions=[], seed=11, noise=noise))
    truth = sc.truth
    residuals, kinds, confs = [], {"dropout": 0, "outlier": 0, "clean": 0}, {"outlier": [], "clean": []}
    for k, fr in enumerate(sc.frames):
        for sk in fr.skeletons:
            pid = min(truth, key=lambda i: np.median([np.linalg.norm(truth[i][j].positions[k] - kp.xyz)
                                                       for j, kp in sk.keypoints.items()]))
            for j in EMITTED_JOINTS:
                kp = sk.get(j)
                if kp is None:
                    kinds["dropout"] += 1
                    continue
                r = kp.xyz - truth[pid][j].positions[k]
                if abs(np.linalg.norm(r) - noise.outlier_magnitude) < 1e-9:
                    kinds["outlier"] += 1
                    confs["outlier"].append(kp.confidence)
                else:
                    kinds["clean"] += 1
                    residuals.append(r)
                    confs["clean"].append(kp.confidence)
    total = sum(kinds.values())
    assert total > 10_000
    assert kinds["outlier"] / total == pytest.approx(noise.outlier_rate, rel=0.05)
    assert kinds["dropout"] / total == pytest.approx(noise.dropout_rate, rel=0.1)
    np.testing.assert_allclose(np.std(residuals, axis=0), noise.gaussian_sigma, rtol=0.05)
    np.testing.assert_allclose(np.mean(residuals, axis=0), 0.0, atol=0.05 * noise.gaussian_sigma)
    assert min(confs["clean"]) >= 0.7 and min(confs["outlier"]) >= 0.3 and max(confs["outlier"]) <= 0.7
    assert np.mean(confs["clean"]) == pytest.approx(0.85, rel=0.05)


def test_generation_is_deterministic():
    a = generate(ScenarioSpec(task="t3", duration=3.0, seed=5))
    b = generate(ScenarioSpec(task="t3", duration=3.0, seed=5))
    assert a.frames == b.frames and a.truth_frames == b.truth_frames
    c = generate(ScenarioSpec(task="t3", duration=3.0, seed=6))
    assert c.frames != a.frames


def test_truth_complete_and_independent_of_noise():
    noisy = generate(ScenarioSpec(task="t2", duration=2.0, seed=1))
    clean = generate(ScenarioSpec(task="t2", duration=2.0, seed=1, noise=NoiseSpec.noiseless()))
    assert noisy.truth_frames == clean.truth_frames
    for fr in noisy.truth_frames:
        assert len(fr.skeletons) == 2
        assert all(set(sk.keypoints) == set(JOINTS) for sk in fr.skeletons)


def test_handover_wrists_converge():
    sc = generate(ScenarioSpec(task="t2", duration=6.0, seed=0))
    gap = np.linalg.norm(sc.truth[0]["left_wrist"].positions - sc.truth[1]["right_wrist"].positions, axis=1)
    assert gap.min() < 0.10


def test_sinusoid_moves_right_to_left_and_speeds_are_desk_scale():
    for task in ("t0", "t1", "t2", "t3"):
        sc = generate(ScenarioSpec(task=task, seed=0))
        w = sc.truth[0]["left_wrist"]
        speed = np.linalg.norm(np.diff(w.positions, axis=0), axis=1) * 30
        assert speed.max() <= 1.5
    w = generate(ScenarioSpec(task="t0", seed=0)).truth[0]["left_wrist"].positions
    assert w[-1, 0] - w[0, 0] > 0.3  # operator's own right-to-left runs along +x in camera frame


def test_default_occlusions_inside_duration():
    for task in ("t0", "t1", "t2", "t3"):
        spec = ScenarioSpec(task=task, duration=20.0)
        occ = default_occlusions(spec)
        assert occ and all(0 <= o.start < o.end <= 20.0 for o in occ)


@pytest.mark.parametrize("kw", [dict(task="t9"), dict(rate=0), dict(duration=-1), dict(persons=0),
                                dict(occlusions=[Occlusion(0, ("left_wrist",), 1.0, 50.0)]),
                                dict(occlusions=[Occlusion(3, ("left_wrist",), 1.0, 2.0)]),
                                dict(noise=None)])
def test_invalid_specs(kw):
    if kw.get("noise", 1) is None:
        with pytest.raises(InvalidSpec):
            NoiseSpec(outlier_rate=1.5)
        return
    with pytest.raises(InvalidSpec):
        ScenarioSpec(**kw)


def test_more_persons_and_custom_task():
    sc = generate(ScenarioSpec(task="custom", duration=1.0, persons=3))
    assert len(sc.truth_frames[0].skeletons) == 3
