import numpy as np
import pytest
from hypothesis import settings

from posefilter.sim import body_from_height
from posefilter.skeleton import Frame, Keypoint, Skeleton

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def posed(h=1.75, base=(0.0, 0.0, 2.0), conf=1.0, drop=(), **kw) -> Skeleton:
    """Anthropometric standing skeleton shifted to ``base``."""
    rest = body_from_height(h)
    b = np.asarray(base, dtype=float)
    kps = {j: Keypoint(j, tuple(kp.xyz + b), conf) for j, kp in rest.keypoints.items() if j not in drop}
    return Skeleton(kps, **kw)


def shifted(sk: Skeleton, offset) -> Skeleton:
    off = np.asarray(offset, dtype=float)
    return sk.replace(keypoints={j: Keypoint(j, tuple(kp.xyz + off), kp.confidence) for j, kp in sk.keypoints.items()})


def frames_of(skeleton_lists, rate=30.0):
    return [Frame(k / rate, tuple(sks)) for k, sks in enumerate(skeleton_lists)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
