"""Kinematic salience signals and mask span selection.

A scalar signal h(t) is computed over a clip, its argmax picks the moment
t* the edit should focus on, and the mask span is the window of width
``max(2, floor(alpha * T))`` centered there (clamped to the clip).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .motion import MotionClip, Skeleton, forward_kinematics

SIGNAL_KINDS = (
    "vertical_root_velocity",
    "max_joint_jerk",
    "foot_acceleration",
    "postural_extremeness",
)


@dataclass
class KinematicSignalSpec:
    """Which scalar signal to compute and how to smooth it.

    ``target_joints`` restricts joint-based signals (jerk, acceleration) to a
    subset such as the feet; ``None`` uses all joints. ``smoothing_window``
    is the width of an odd moving-average window; 1 disables smoothing.
    """

    kind: str = "vertical_root_velocity"
    target_joints: list[int] | None = None
    smoothing_window: int = 5

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}; choose from {SIGNAL_KINDS}")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError(
                f"smoothing_window must be odd and >= 1, got {self.smoothing_window}"
            )
        if self.target_joints is not None:
            self.target_joints = [int(j) for j in self.target_joints]
            if not self.target_joints:
                raise ValueError("target_joints must be None or a non-empty list")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "target_joints": self.target_joints,
            "smoothing_window": self.smoothing_window,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KinematicSignalSpec":
        return cls(
            kind=doc.get("kind", "vertical_root_velocity"),
            target_joints=doc.get("target_joints"),
            smoothing_window=doc.get("smoothing_window", 5),
        )


def _time_derivative(values: np.ndarray, fps: float) -> np.ndarray:
    """Per-frame time derivative along axis 0.

    Central differences in the interior; the endpoint values replicate the
    nearest interior difference, so a linear ramp differentiates to a constant
    at every frame.
    """
    t_len = values.shape[0]
    out = np.empty_like(values, dtype=np.float64)
    if t_len == 2:
        d = (values[1] - values[0]) * fps
        out[0] = d
        out[1] = d
        return out
    out[1:-1] = (values[2:] - values[:-2]) * (0.5 * fps)
    out[0] = out[1]
    out[-1] = out[-2]
    return out


def _smooth(signal: np.ndarray, window: int) -> np.ndarray:
    if window == 1:
        return signal
    half = window // 2
    padded = np.pad(signal, half, mode="edge")
    kernel = np.full(window, 1.0 / window)
    return np.convolve(padded, kernel, mode="valid")


def compute_signal(clip: MotionClip, skeleton: Skeleton, spec: KinematicSignalSpec) -> np.ndarray:
    """Evaluate a kinematic salience signal, returning a (T,) array."""
    t_len = clip.num_frames

    if spec.kind == "vertical_root_velocity":
        up = np.zeros(3)
        up["xyz".index(clip.up_axis)] = 1.0
        height = clip.root_translation @ up
        raw = _time_derivative(height, clip.fps)
    elif spec.kind == "postural_extremeness":
        rot = clip.joint_rotations
        raw = np.linalg.norm(rot - rot.mean(axis=0), axis=1)
    else:
        order = 3 if spec.kind == "max_joint_jerk" else 2
        if spec.kind == "max_joint_jerk" and t_len < 4:
            raise ValueError(f"max_joint_jerk needs at least 4 frames, got {t_len}")
        pos = forward_kinematics(clip, skeleton)
        if spec.target_joints is not None:
            for j in spec.target_joints:
                if not 0 <= j < clip.num_joints:
                    raise ValueError(f"target joint {j} out of range for {clip.num_joints} joints")
            pos = pos[:, spec.target_joints]
        deriv = pos
        for _ in range(order):
            deriv = _time_derivative(deriv, clip.fps)
        raw = np.linalg.norm(deriv, axis=-1).max(axis=1)

    if not np.all(np.isfinite(raw)):
        raise ValueError("kinematic signal evaluated to non-finite values")
    return _smooth(raw, spec.smoothing_window)


def select_peak(signal: np.ndarray) -> int:
    """Index of the signal maximum; ties resolve to the earliest frame."""
    signal = np.asarray(signal)
    if signal.ndim != 1 or signal.size == 0:
        raise ValueError(f"signal must be a non-empty 1-D array, got shape {signal.shape}")
    if not np.all(np.isfinite(signal)):
        raise ValueError("signal contains non-finite values")
    return int(np.argmax(signal))


@dataclass(frozen=True)
class MaskSpan:
    """Closed frame interval [lo, hi] centered (after clamping) on t_star."""

    t_star: int
    lo: int
    hi: int
    num_frames: int = field(default=0)

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise ValueError(f"invalid span bounds [{self.lo}, {self.hi}]")
        if self.num_frames and self.hi >= self.num_frames:
            raise ValueError(f"span end {self.hi} exceeds clip length {self.num_frames}")
        if not self.lo <= self.t_star <= self.hi:
            raise ValueError(f"t_star {self.t_star} outside span [{self.lo}, {self.hi}]")

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def to_dict(self) -> dict:
        return {"t_star": self.t_star, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, doc: dict, num_frames: int = 0) -> "MaskSpan":
        return cls(int(doc["t_star"]), int(doc["lo"]), int(doc["hi"]), num_frames)


def make_span(t_star: int, num_frames: int, alpha: float) -> MaskSpan:
    """Span of length ``max(2, floor(alpha * T))`` centered on t_star.

    The half-width is ``floor(length / 2)`` and the window is clamped to
    ``[0, T-1]``, so spans near the clip edges are asymmetric.
    """
    if num_frames < 2:
        raise ValueError(f"num_frames must be >= 2, got {num_frames}")
    if not 0 <= t_star < num_frames:
        raise ValueError(f"t_star {t_star} out of range for {num_frames} frames")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    length = max(2, int(np.floor(alpha * num_frames)))
    half = length // 2
    return span_from_halfwidth(t_star, half, num_frames)


def span_from_halfwidth(t_star: int, half: int, num_frames: int) -> MaskSpan:
    """Span [t_star - half, t_star + half] clamped to the clip bounds."""
    if half < 1:
        raise ValueError(f"half-width must be >= 1, got {half}")
    lo = max(0, t_star - half)
    hi = min(num_frames - 1, t_star + half)
    return MaskSpan(t_star, lo, hi, num_frames)
