"""Shared fixtures and clip builders for the test suite."""

import numpy as np
import pytest

from motiontune import MotionClip, Skeleton, default_humanoid


def make_clip(data, fps=30.0, up_axis="y", metadata=None):
    data = np.asarray(data, dtype=np.float64)
    num_joints = (data.shape[1] - 6) // 3
    return MotionClip(fps, data, num_joints, up_axis, metadata or {})


def random_clip(rng, num_frames=8, num_joints=2, fps=30.0, scale=0.5):
    """Random finite clip with rotations well inside the canonical range."""
    data = rng.uniform(-scale, scale, size=(num_frames, 6 + 3 * num_joints))
    return make_clip(data, fps=fps)


def chain_skeleton(num_joints=2, offset=(0.0, 1.0, 0.0)):
    """A straight chain: joint 0 hangs off the root, each next joint off the previous."""
    parents = [-1] + list(range(num_joints - 1))
    offsets = np.tile(np.asarray(offset, dtype=np.float64), (num_joints, 1))
    return Skeleton(parents, offsets)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def humanoid():
    return default_humanoid()
