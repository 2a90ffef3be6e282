"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .kinematics import MaskSpan
from .motion import MotionClip, Skeleton


def check_clip(clip, name: str = "clip") -> MotionClip:
    if not isinstance(clip, MotionClip):
        raise TypeError(f"{name} must be a MotionClip, got {type(clip).__name__}")
    return clip


def check_clips(
    clips,
    name: str = "clips",
    same_joints: bool = True,
    same_length: bool = False,
    min_count: int = 1,
) -> list[MotionClip]:
    clips = list(clips)
    if len(clips) < min_count:
        raise ValueError(f"{name} must contain at least {min_count} clip(s), got {len(clips)}")
    for i, c in enumerate(clips):
        check_clip(c, f"{name}[{i}]")
    if same_joints:
        joints = {c.num_joints for c in clips}
        if len(joints) > 1:
            raise ValueError(f"{name} mix joint counts {sorted(joints)}")
    if same_length:
        lengths = {c.num_frames for c in clips}
        if len(lengths) > 1:
            raise ValueError(f"{name} mix frame counts {sorted(lengths)}")
    return clips


def check_skeleton_clip(skeleton: Skeleton, clip: MotionClip):
    if skeleton.num_joints != clip.num_joints:
        raise ValueError(
            f"skeleton has {skeleton.num_joints} joints but clip has {clip.num_joints}"
        )


def check_span(span: MaskSpan, num_frames: int, name: str = "span"):
    if not isinstance(span, MaskSpan):
        raise TypeError(f"{name} must be a MaskSpan, got {type(span).__name__}")
    if span.hi >= num_frames:
        raise ValueError(f"{name} end {span.hi} exceeds clip length {num_frames}")


def as_positions(x, name: str = "positions") -> np.ndarray:
    """Coerce to a finite (T, J, 3) float64 array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != 3:
        raise ValueError(f"{name} must have shape (T, J, 3), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contain non-finite values")
    return x
