"""Synthetic technique benchmark with known expert/novice structure.

Clips follow a low-dimensional family: smooth sinusoidal limb motion plus a
short technique burst whose timing is marked by a vertical root-velocity peak
at a designed phase. Each novice is a specific expert clip with joint-rotation
noise injected only in a short window around that peak, then shifted by a
small whole-clip timing jitter; the source expert is recorded so tests can
verify the pairing. Per-clip variation (amplitude, phase, frequency, burst
strength, peak timing) keeps the corpus from collapsing to a single
trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .motion import MotionClip, Skeleton, default_humanoid


@dataclass(frozen=True)
class SyntheticTechniqueSpec:
    """Parameters of the synthetic technique family.

    ``amp_band``, ``phase_band``, ``freq_band`` and ``burst_band`` bound the
    per-clip latent draws (amplitude and burst scales in 1 +/- band, frequency
    in base_frequency * (1 +/- band), phase uniform in [0, phase_band)).
    ``noise_amplitude`` (radians), ``noise_halfwidth`` and ``noise_sigma``
    (frames) shape the novice corruption window centered on the kinematic
    peak; ``timing_jitter`` is the maximum whole-clip shift in frames.
    """

    name: str = "lift"
    num_frames: int = 64
    fps: float = 30.0
    peak_phase: float = 0.45
    peak_velocity: float = 1.5
    peak_width: float = 2.5
    peak_jitter: float = 1.5
    burst_width: float = 2.0
    base_angle: float = 0.35
    wave_amplitude: float = 0.6
    base_frequency: float = 4.0
    burst_amplitude: float = 0.9
    amp_band: float = 0.1
    phase_band: float = 0.12
    freq_band: float = 0.02
    burst_band: float = 0.1
    noise_amplitude: float = 0.45
    noise_halfwidth: int = 3
    noise_sigma: float = 1.6
    timing_jitter: int = 1
    template_seed: int = 0

    def __post_init__(self):
        if self.num_frames < 8:
            raise ValueError(f"num_frames must be >= 8, got {self.num_frames}")
        if not 0.0 < self.peak_phase < 1.0:
            raise ValueError(f"peak_phase must be in (0, 1), got {self.peak_phase}")
        if self.noise_halfwidth < 0 or 2 * self.noise_halfwidth + 1 > self.num_frames:
            raise ValueError(
                f"noise window of half-width {self.noise_halfwidth} does not fit "
                f"in {self.num_frames} frames"
            )
        if self.timing_jitter < 0:
            raise ValueError(f"timing_jitter must be >= 0, got {self.timing_jitter}")
        for label in ("amp_band", "phase_band", "freq_band", "burst_band"):
            band = getattr(self, label)
            if not 0.0 <= band <= 1.0:
                raise ValueError(f"{label} must be in [0, 1], got {band}")


@dataclass(frozen=True)
class ClipLatents:
    """Per-clip draw from the technique family."""

    amp_scale: float
    phase: float
    freq: float
    burst_scale: float
    peak_frame: float


def technique_template(spec: SyntheticTechniqueSpec, num_joints: int) -> dict:
    """Joint-level constants shared by every clip of a technique.

    Deterministic in ``spec.template_seed`` so the same spec always denotes
    the same technique.
    """
    rng = np.random.default_rng(spec.template_seed)
    axes = rng.normal(size=(num_joints, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    return {
        "axes": axes,
        "base": spec.base_angle * rng.uniform(-1.0, 1.0, size=num_joints),
        "w1": rng.uniform(0.5, 1.0, size=num_joints),
        "w2": rng.uniform(0.1, 0.4, size=num_joints),
        "chi": rng.uniform(0.0, 1.0, size=num_joints),
        "burst": rng.uniform(0.6, 1.0, size=num_joints) * rng.choice([-1.0, 1.0], size=num_joints),
    }


def draw_latents(spec: SyntheticTechniqueSpec, rng: np.random.Generator) -> ClipLatents:
    jitter = rng.uniform(-spec.peak_jitter, spec.peak_jitter)
    return ClipLatents(
        amp_scale=float(rng.uniform(1.0 - spec.amp_band, 1.0 + spec.amp_band)),
        phase=float(rng.uniform(0.0, spec.phase_band)),
        freq=float(spec.base_frequency * rng.uniform(1.0 - spec.freq_band, 1.0 + spec.freq_band)),
        burst_scale=float(rng.uniform(1.0 - spec.burst_band, 1.0 + spec.burst_band)),
        peak_frame=float(spec.peak_phase * (spec.num_frames - 1) + jitter),
    )


def build_clip(
    spec: SyntheticTechniqueSpec,
    template: dict,
    latents: ClipLatents,
    skeleton: Skeleton,
    name: str,
) -> MotionClip:
    """Realize one clip from template constants and per-clip latents."""
    T = spec.num_frames
    J = skeleton.num_joints
    i = np.arange(T, dtype=np.float64)
    u = i / (T - 1)

    envelope = np.exp(-0.5 * ((i - latents.peak_frame) / spec.peak_width) ** 2)
    v_up = (spec.peak_velocity / spec.fps) * latents.amp_scale * envelope
    height = np.concatenate([[0.0], np.cumsum(v_up[:-1])])

    data = np.zeros((T, 6 + 3 * J))
    axis_idx = {"x": 0, "y": 1, "z": 2}[skeleton.up_axis]
    data[:, axis_idx] = height
    data[:, 0 if axis_idx != 0 else 2] = 0.4 * latents.amp_scale * u
    yaw = 0.1 * np.sin(2.0 * np.pi * (latents.freq * u + latents.phase))
    data[:, 3 + axis_idx] = yaw

    burst = np.exp(-0.5 * ((i - latents.peak_frame) / spec.burst_width) ** 2)
    for j in range(J):
        angle = (
            template["base"][j]
            + spec.wave_amplitude
            * latents.amp_scale
            * (
                template["w1"][j] * np.sin(2.0 * np.pi * (latents.freq * u + latents.phase))
                + template["w2"][j]
                * np.sin(4.0 * np.pi * (latents.freq * u + latents.phase) + template["chi"][j])
            )
            + spec.burst_amplitude * latents.burst_scale * template["burst"][j] * burst
        )
        data[:, 6 + 3 * j : 9 + 3 * j] = template["axes"][j][None, :] * angle[:, None]

    meta = {"name": name, "technique": spec.name, "peak_frame": latents.peak_frame}
    return MotionClip(
        fps=spec.fps, data=data, num_joints=J, up_axis=skeleton.up_axis, metadata=meta
    )


def add_span_noise(
    spec: SyntheticTechniqueSpec, clip: MotionClip, rng: np.random.Generator
) -> MotionClip:
    """Inject joint-rotation noise in the window around the technique peak.

    Frames farther than ``noise_halfwidth`` from the rounded peak are
    untouched, so the corrupted clip equals the input outside the window.
    """
    peak = clip.metadata.get("peak_frame")
    if peak is None:
        raise ValueError("clip has no recorded peak_frame; generate it with build_clip")
    center = int(np.clip(round(peak), 0, clip.num_frames - 1))
    i = np.arange(clip.num_frames, dtype=np.float64)
    window = np.exp(-0.5 * ((i - center) / spec.noise_sigma) ** 2)
    window[np.abs(i - center) > spec.noise_halfwidth] = 0.0

    data = clip.data.copy()
    J = clip.num_joints
    directions = rng.normal(size=(J, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    weights = spec.noise_amplitude * rng.uniform(0.5, 1.0, size=J)
    for j in range(J):
        data[:, 6 + 3 * j : 9 + 3 * j] += (
            window[:, None] * weights[j] * directions[j][None, :]
        )
    meta = dict(clip.metadata)
    meta["noise_center"] = center
    return clip.with_data(data, metadata=meta)


def shift_clip(clip: MotionClip, shift: int) -> MotionClip:
    """Shift a clip in time by a whole number of frames, same length.

    Output frame i copies input frame i + shift, clamped at the ends, so
    frames are moved bit-exactly and the boundary frame repeats.
    """
    T = clip.num_frames
    src = np.clip(np.arange(T) + shift, 0, T - 1)
    meta = dict(clip.metadata)
    if "peak_frame" in meta:
        meta["peak_frame"] = float(np.clip(meta["peak_frame"] - shift, 0, T - 1))
    if "noise_center" in meta:
        meta["noise_center"] = int(np.clip(meta["noise_center"] - shift, 0, T - 1))
    meta["time_shift"] = int(shift)
    return clip.with_data(clip.data[src].copy(), metadata=meta)


def corrupt_expert(
    spec: SyntheticTechniqueSpec,
    expert: MotionClip,
    rng: np.random.Generator,
    name: str,
) -> MotionClip:
    """Derive a novice from an expert: peak-window noise, then timing jitter."""
    noisy = add_span_noise(spec, expert, rng)
    shift = int(rng.integers(-spec.timing_jitter, spec.timing_jitter + 1))
    novice = shift_clip(noisy, shift)
    meta = dict(novice.metadata)
    meta["name"] = name
    meta["source_expert"] = expert.metadata.get("name", "")
    return novice.with_data(novice.data, metadata=meta)


@dataclass
class SyntheticCorpus:
    """Clip sets for one synthetic technique."""

    spec: SyntheticTechniqueSpec
    skeleton: Skeleton
    experts: list = field(default_factory=list)
    heldout_experts: list = field(default_factory=list)
    train_novices: list = field(default_factory=list)
    eval_novices: list = field(default_factory=list)

    @property
    def pairing(self) -> dict:
        """Ground-truth novice-to-source-expert names."""
        return {
            c.metadata["name"]: c.metadata["source_expert"]
            for c in self.train_novices + self.eval_novices
        }


def generate_corpus(
    spec: SyntheticTechniqueSpec,
    num_experts: int = 512,
    num_heldout: int = 64,
    num_train_novices: int = 128,
    num_eval_novices: int = 112,
    seed: int = 0,
    skeleton: Skeleton | None = None,
) -> SyntheticCorpus:
    """Generate expert and novice clip sets from one technique.

    Novices are corruptions of randomly chosen library experts; the source
    expert name is recorded in each novice's metadata.
    """
    if skeleton is None:
        skeleton = default_humanoid()
    template = technique_template(spec, skeleton.num_joints)
    corpus = SyntheticCorpus(spec=spec, skeleton=skeleton)

    rng = np.random.default_rng([seed, spec.template_seed])
    for k in range(num_experts):
        lat = draw_latents(spec, rng)
        corpus.experts.append(build_clip(spec, template, lat, skeleton, f"expert_{k:04d}"))
    for k in range(num_heldout):
        lat = draw_latents(spec, rng)
        corpus.heldout_experts.append(
            build_clip(spec, template, lat, skeleton, f"heldout_{k:04d}")
        )
    for k in range(num_train_novices):
        source = corpus.experts[int(rng.integers(num_experts))]
        corpus.train_novices.append(
            corrupt_expert(spec, source, rng, f"novice_train_{k:04d}")
        )
    for k in range(num_eval_novices):
        source = corpus.experts[int(rng.integers(num_experts))]
        corpus.eval_novices.append(
            corrupt_expert(spec, source, rng, f"novice_eval_{k:04d}")
        )
    return corpus
