"""Motion clip data model, forward kinematics, and clip file IO.

A pose frame is the flat vector ``[r | o | p]`` where ``r`` is the root
translation (3), ``o`` the root orientation as axis-angle (3), and ``p`` the
per-joint local rotations as stacked axis-angle triples (3J). A motion clip is
a uniformly sampled sequence of such frames at a fixed frame rate.

Skeletons are joint trees: ``parents[j] == -1`` means joint ``j`` hangs off
the root body frame (positioned at ``r`` with orientation ``rot(o)``);
``offsets[j]`` is the bone offset expressed in the parent frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ClipFormatError
from .rotations import (
    axis_angle_to_quat,
    quat_mul,
    quat_to_matrix,
    slerp_axis_angle,
)

UP_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class PoseFrame:
    """One frame of motion: root translation, root orientation, joint rotations."""

    root_translation: np.ndarray  # (3,)
    root_orientation: np.ndarray  # (3,) axis-angle
    joint_rotations: np.ndarray  # (3J,) stacked axis-angle triples

    def __post_init__(self):
        for name in ("root_translation", "root_orientation"):
            arr = getattr(self, name)
            if arr.shape != (3,):
                raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
        if self.joint_rotations.ndim != 1 or self.joint_rotations.shape[0] % 3 != 0:
            raise ValueError(
                f"joint_rotations must be a flat (3J,) vector, got shape {self.joint_rotations.shape}"
            )

    @property
    def num_joints(self) -> int:
        return self.joint_rotations.shape[0] // 3


def assemble_feature_vector(frame: PoseFrame) -> np.ndarray:
    """Concatenate a pose frame into the flat ``[r | o | p]`` feature vector."""
    vec = np.concatenate(
        [frame.root_translation, frame.root_orientation, frame.joint_rotations]
    ).astype(np.float64)
    if not np.all(np.isfinite(vec)):
        raise ValueError("pose frame contains non-finite values")
    return vec


@dataclass
class MotionClip:
    """A fixed-rate motion clip stored as a (T, 6 + 3J) float64 array."""

    fps: float
    data: np.ndarray
    num_joints: int
    up_axis: str = "y"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.num_joints < 1:
            raise ValueError(f"num_joints must be >= 1, got {self.num_joints}")
        if self.up_axis not in UP_AXES:
            raise ValueError(f"up_axis must be one of {UP_AXES}, got {self.up_axis!r}")
        if self.data.ndim != 2:
            raise ValueError(f"clip data must be 2-D (frames x features), got {self.data.shape}")
        want = 6 + 3 * self.num_joints
        if self.data.shape[1] != want:
            raise ValueError(
                f"frame width {self.data.shape[1]} does not match 6 + 3*{self.num_joints} = {want}"
            )
        if self.data.shape[0] < 2:
            raise ValueError(f"clip must have at least 2 frames, got {self.data.shape[0]}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("clip data contains non-finite values")

    @classmethod
    def from_frames(
        cls,
        fps: float,
        frames: list[PoseFrame],
        up_axis: str = "y",
        metadata: dict | None = None,
    ) -> "MotionClip":
        if not frames:
            raise ValueError("frames list is empty")
        data = np.stack([assemble_feature_vector(f) for f in frames])
        return cls(fps, data, frames[0].num_joints, up_axis, metadata or {})

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.data.shape[1]

    @property
    def root_translation(self) -> np.ndarray:
        return self.data[:, 0:3]

    @property
    def root_orientation(self) -> np.ndarray:
        return self.data[:, 3:6]

    @property
    def joint_rotations(self) -> np.ndarray:
        return self.data[:, 6:]

    def frame(self, t: int) -> PoseFrame:
        row = self.data[t]
        return PoseFrame(row[0:3].copy(), row[3:6].copy(), row[6:].copy())

    @property
    def frames(self) -> list[PoseFrame]:
        return [self.frame(t) for t in range(self.num_frames)]

    def with_data(self, data: np.ndarray, metadata: dict | None = None) -> "MotionClip":
        """Copy of this clip with replaced frame data (same fps/up_axis)."""
        return MotionClip(
            self.fps,
            data,
            self.num_joints,
            self.up_axis,
            dict(self.metadata if metadata is None else metadata),
        )

    def copy(self) -> "MotionClip":
        return self.with_data(self.data.copy())


@dataclass
class Skeleton:
    """Joint tree with bone offsets and left/right mirror pairing.

    ``parents[j] == -1`` roots joint j at the body frame. ``mirror_pairs`` maps
    left joints to their right counterparts for sagittal mirroring; joints not
    listed are treated as lying on the mirror plane.
    """

    parents: list[int]
    offsets: np.ndarray  # (J, 3)
    mirror_pairs: list[tuple[int, int]] = field(default_factory=list)
    up_axis: str = "y"

    def __post_init__(self):
        self.parents = [int(p) for p in self.parents]
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        self.mirror_pairs = [(int(a), int(b)) for a, b in self.mirror_pairs]
        j = len(self.parents)
        if j < 1:
            raise ValueError("skeleton needs at least one joint")
        if self.offsets.shape != (j, 3):
            raise ValueError(f"offsets must have shape ({j}, 3), got {self.offsets.shape}")
        if self.up_axis not in UP_AXES:
            raise ValueError(f"up_axis must be one of {UP_AXES}, got {self.up_axis!r}")
        if not np.all(np.isfinite(self.offsets)):
            raise ValueError("offsets contain non-finite values")
        for i, p in enumerate(self.parents):
            if p != -1 and not 0 <= p < j:
                raise ValueError(f"joint {i} has invalid parent index {p}")
            if p == i:
                raise ValueError(f"joint {i} is its own parent")
        seen: set[int] = set()
        for a, b in self.mirror_pairs:
            if a == b:
                raise ValueError(f"mirror pair ({a}, {b}) maps a joint to itself")
            for idx in (a, b):
                if not 0 <= idx < j:
                    raise ValueError(f"mirror pair index {idx} out of range")
                if idx in seen:
                    raise ValueError(f"joint {idx} appears in more than one mirror pair")
                seen.add(idx)
        self._topo_order = self._toposort()

    def _toposort(self) -> list[int]:
        j = len(self.parents)
        order: list[int] = []
        state = [0] * j  # 0 unvisited, 1 in progress, 2 done

        def visit(i: int):
            if state[i] == 2:
                return
            if state[i] == 1:
                raise ValueError("parent indices contain a cycle; skeleton must be a tree")
            state[i] = 1
            p = self.parents[i]
            if p != -1:
                visit(p)
            state[i] = 2
            order.append(i)

        for i in range(j):
            visit(i)
        return order

    @property
    def num_joints(self) -> int:
        return len(self.parents)

    @property
    def topological_order(self) -> list[int]:
        return list(self._topo_order)

    def up_vector(self) -> np.ndarray:
        v = np.zeros(3)
        v[UP_AXES.index(self.up_axis)] = 1.0
        return v


def default_humanoid() -> Skeleton:
    """Small 8-joint humanoid used by tests and the synthetic benchmark."""
    parents = [-1, 0, 1, 2, 2, 2, 0, 0]
    offsets = np.array(
        [
            [0.0, 0.0, 0.0],  # 0 pelvis
            [0.0, 0.22, 0.0],  # 1 spine
            [0.0, 0.24, 0.0],  # 2 neck
            [0.0, 0.12, 0.0],  # 3 head
            [0.42, -0.02, 0.0],  # 4 left hand
            [-0.42, -0.02, 0.0],  # 5 right hand
            [0.14, -0.85, 0.0],  # 6 left foot
            [-0.14, -0.85, 0.0],  # 7 right foot
        ]
    )
    return Skeleton(parents, offsets, mirror_pairs=[(4, 5), (6, 7)], up_axis="y")


def forward_kinematics(clip: MotionClip, skeleton: Skeleton) -> np.ndarray:
    """Global joint positions (T, J, 3) for every frame of a clip.

    Joint j sits at ``parent_position + parent_global_rotation @ offsets[j]``
    and carries global rotation ``parent_global_rotation @ rot(p_j)``; the
    parent of a ``-1`` joint is the root body frame at ``r`` with rotation
    ``rot(o)``.
    """
    if skeleton.num_joints != clip.num_joints:
        raise ValueError(
            f"skeleton has {skeleton.num_joints} joints but clip has {clip.num_joints}"
        )
    t_len = clip.num_frames
    j_len = skeleton.num_joints

    root_q = axis_angle_to_quat(clip.root_orientation)  # (T, 4)
    root_pos = clip.root_translation  # (T, 3)
    local_q = axis_angle_to_quat(clip.joint_rotations.reshape(t_len, j_len, 3))  # (T, J, 4)

    global_q = np.empty((t_len, j_len, 4))
    positions = np.empty((t_len, j_len, 3))
    for j in skeleton.topological_order:
        p = skeleton.parents[j]
        if p == -1:
            parent_q, parent_pos = root_q, root_pos
        else:
            parent_q, parent_pos = global_q[:, p], positions[:, p]
        rot_parent = quat_to_matrix(parent_q)  # (T, 3, 3)
        positions[:, j] = parent_pos + rot_parent @ skeleton.offsets[j]
        global_q[:, j] = quat_mul(parent_q, local_q[:, j])
    return positions


def mirror_sagittal(clip: MotionClip, skeleton: Skeleton) -> MotionClip:
    """Mirror a clip across the x = 0 sagittal plane.

    Negates the x component of the root translation, maps every axis-angle
    triple (ax, ay, az) to (ax, -ay, -az), and swaps paired left/right joint
    rotation blocks. Applying twice returns the original clip exactly.
    """
    if skeleton.num_joints != clip.num_joints:
        raise ValueError(
            f"skeleton has {skeleton.num_joints} joints but clip has {clip.num_joints}"
        )
    data = clip.data.copy()
    data[:, 0] = -data[:, 0]  # root x
    # Axis-angle conjugation by the x-reflection: (ax, ay, az) -> (ax, -ay, -az).
    data[:, 4] = -data[:, 4]
    data[:, 5] = -data[:, 5]
    rot = data[:, 6:].reshape(clip.num_frames, clip.num_joints, 3)
    rot[:, :, 1] = -rot[:, :, 1]
    rot[:, :, 2] = -rot[:, :, 2]
    for a, b in skeleton.mirror_pairs:
        rot[:, [a, b]] = rot[:, [b, a]]
    data[:, 6:] = rot.reshape(clip.num_frames, -1)
    return clip.with_data(data)


def resample_uniform(clip: MotionClip, target_length: int) -> MotionClip:
    """Resample a clip to ``target_length`` frames on a uniform grid.

    Root translation interpolates linearly; orientations and joint rotations
    interpolate by quaternion slerp between the bracketing frames. Endpoint
    frames are preserved exactly, and ``target_length == num_frames`` returns
    an identical copy.
    """
    if target_length < 2:
        raise ValueError(f"target_length must be >= 2, got {target_length}")
    t_len = clip.num_frames
    if target_length == t_len:
        return clip.copy()

    positions = np.linspace(0.0, t_len - 1, target_length)
    return _sample_at(clip, positions)


def _sample_at(clip: MotionClip, positions: np.ndarray) -> MotionClip:
    """Sample a clip at fractional frame positions (values in [0, T-1])."""
    t_len = clip.num_frames
    j_len = clip.num_joints
    positions = np.clip(np.asarray(positions, dtype=np.float64), 0.0, t_len - 1.0)

    lo = np.floor(positions).astype(int)
    hi = np.minimum(lo + 1, t_len - 1)
    frac = positions - lo

    out = np.empty((positions.shape[0], clip.feature_dim))
    out[:, 0:3] = clip.root_translation[lo] * (1.0 - frac[:, None]) + clip.root_translation[hi] * frac[:, None]

    rots = np.concatenate(
        [clip.root_orientation[:, None, :], clip.joint_rotations.reshape(t_len, j_len, 3)],
        axis=1,
    )  # (T, 1+J, 3)
    blended = slerp_axis_angle(rots[lo], rots[hi], frac[:, None])  # (n, 1+J, 3)

    exact = frac == 0.0  # keep original frames bit-exact where the grid hits them
    blended[exact] = rots[lo[exact]]

    out[:, 3:6] = blended[:, 0]
    out[:, 6:] = blended[:, 1:].reshape(positions.shape[0], -1)
    return clip.with_data(out)


# ---------------------------------------------------------------------------
# File formats


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ClipFormatError(f"{where}: missing field {key!r}")
    return obj[key]


def write_clip(clip: MotionClip, path: str | Path) -> None:
    doc = {
        "fps": clip.fps,
        "num_joints": clip.num_joints,
        "up_axis": clip.up_axis,
        "metadata": clip.metadata,
        "frames": clip.data.tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def read_clip(path: str | Path) -> MotionClip:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ClipFormatError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ClipFormatError(f"{path}: expected a JSON object at top level")
    where = str(path)
    fps = _require(doc, "fps", where)
    num_joints = _require(doc, "num_joints", where)
    up_axis = _require(doc, "up_axis", where)
    frames = _require(doc, "frames", where)
    if not isinstance(frames, list) or not frames:
        raise ClipFormatError(f"{where}: 'frames' must be a non-empty list")
    width = 6 + 3 * int(num_joints)
    for i, row in enumerate(frames):
        if not isinstance(row, list) or len(row) != width:
            raise ClipFormatError(
                f"{where}: frame {i} has {len(row) if isinstance(row, list) else 'non-list'} "
                f"values, expected {width}"
            )
    try:
        return MotionClip(
            fps=float(fps),
            data=np.array(frames, dtype=np.float64),
            num_joints=int(num_joints),
            up_axis=str(up_axis),
            metadata=doc.get("metadata", {}) or {},
        )
    except ValueError as e:
        raise ClipFormatError(f"{where}: {e}") from e


def write_skeleton(skeleton: Skeleton, path: str | Path) -> None:
    doc = {
        "parents": skeleton.parents,
        "offsets": skeleton.offsets.tolist(),
        "mirror_pairs": [list(p) for p in skeleton.mirror_pairs],
        "up_axis": skeleton.up_axis,
    }
    Path(path).write_text(json.dumps(doc))


def read_skeleton(path: str | Path) -> Skeleton:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ClipFormatError(f"{path}: not valid JSON ({e})") from e
    where = str(path)
    parents = _require(doc, "parents", where)
    offsets = _require(doc, "offsets", where)
    pairs = doc.get("mirror_pairs", [])
    try:
        return Skeleton(
            parents=list(parents),
            offsets=np.array(offsets, dtype=np.float64),
            mirror_pairs=[tuple(p) for p in pairs],
            up_axis=doc.get("up_axis", "y"),
        )
    except ValueError as e:
        raise ClipFormatError(f"{where}: {e}") from e


def mean_interframe_displacement(clip: MotionClip, skeleton: Skeleton) -> float:
    """Mean joint displacement between consecutive frames, in clip units."""
    pos = forward_kinematics(clip, skeleton)
    step = np.linalg.norm(np.diff(pos, axis=0), axis=-1)  # (T-1, J)
    return float(step.mean())
