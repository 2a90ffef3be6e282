"""Clip editing: mask a kinematically selected span and infill it from the
expert prior.

The edited clip keeps the novice root translation and orientation at every
frame, keeps all frames outside the span bit-for-bit, and splices the decoded
joint rotations into the span, optionally crossfading the first and last span
frames toward the novice rotations to hide the seam. ``strict_splice``
disables the crossfade and takes decoded frames verbatim inside the span.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ConfigError
from .infiller import MotionInfiller
from .kinematics import KinematicSignalSpec, MaskSpan, compute_signal, make_span, select_peak
from .motion import MotionClip, Skeleton
from .rotations import slerp_axis_angle
from .tokenizer import PoseTokenizer
from .validation import check_clip, check_skeleton_clip


def _check_techniques(tokenizer: PoseTokenizer, infiller: MotionInfiller):
    a, b = tokenizer.technique, infiller.technique
    if a is not None and b is not None and a != b:
        raise ConfigError(
            f"tokenizer was trained for technique {a!r} but infiller for {b!r}"
        )


def _splice(
    novice: MotionClip,
    decoded: np.ndarray,
    span: MaskSpan,
    crossfade_frames: int,
) -> np.ndarray:
    """Assemble edited frame data from novice data and decoded features."""
    data = novice.data.copy()
    sel = slice(span.lo, span.hi + 1)
    # Joint rotations come from the decoder inside the span; root translation
    # and orientation stay the novice's everywhere.
    data[sel, 6:] = decoded[sel, 6:]

    fade = min(crossfade_frames, span.width // 2)
    for d in range(fade):
        w = (d + 1) / (fade + 1)  # decoded weight ramps up into the span
        for t in (span.lo + d, span.hi - d):
            novice_rot = novice.data[t, 6:].reshape(-1, 3)
            decoded_rot = decoded[t, 6:].reshape(-1, 3)
            data[t, 6:] = slerp_axis_angle(novice_rot, decoded_rot, w).reshape(-1)
    return data


def edit_motion(
    novice: MotionClip,
    tokenizer: PoseTokenizer,
    infiller: MotionInfiller,
    skeleton: Skeleton,
    signal_spec: KinematicSignalSpec | None = None,
    alpha: float = 0.15,
    num_edits: int = 3,
    temperature: float = 1.0,
    crossfade_frames: int = 2,
    seed: int = 0,
    strict_splice: bool = False,
) -> tuple[list[MotionClip], MaskSpan]:
    """Produce ``num_edits`` edited variants of a novice clip.

    The first edit decodes the greedy infill; the rest sample token
    distributions at ``temperature``. Returns the edits and the mask span.
    """
    check_clip(novice, "novice")
    check_skeleton_clip(skeleton, novice)
    _check_techniques(tokenizer, infiller)
    if num_edits < 1:
        raise ValueError(f"num_edits must be >= 1, got {num_edits}")
    if signal_spec is None:
        signal_spec = KinematicSignalSpec()

    signal = compute_signal(novice, skeleton, signal_spec)
    t_star = select_peak(signal)
    span = make_span(t_star, novice.num_frames, alpha)

    tokens = tokenizer.transform([novice])[0]
    crossfade = 0 if strict_splice else crossfade_frames

    edits = []
    for j in range(num_edits):
        if j == 0:
            filled = infiller.infill(tokens, span, mode="greedy")
            mode = "greedy"
        else:
            rng = np.random.default_rng([seed, j])
            filled = infiller.infill(tokens, span, mode="sample", temperature=temperature, rng=rng)
            mode = "sample"
        decoded = tokenizer.decode(filled)
        data = _splice(novice, decoded, span, crossfade)
        metadata = dict(novice.metadata)
        metadata.update(edit_index=j, edit_mode=mode)
        edits.append(novice.with_data(data, metadata))
    return edits, span


class MotionEditor(BaseEstimator):
    """Bundles a fitted tokenizer and infiller into a clip-to-edits transformer."""

    def __init__(
        self,
        tokenizer: PoseTokenizer | None = None,
        infiller: MotionInfiller | None = None,
        skeleton: Skeleton | None = None,
        signal_spec: KinematicSignalSpec | None = None,
        alpha: float = 0.15,
        num_edits: int = 3,
        temperature: float = 1.0,
        crossfade_frames: int = 2,
        seed: int = 0,
        strict_splice: bool = False,
    ):
        self.tokenizer = tokenizer
        self.infiller = infiller
        self.skeleton = skeleton
        self.signal_spec = signal_spec
        self.alpha = alpha
        self.num_edits = num_edits
        self.temperature = temperature
        self.crossfade_frames = crossfade_frames
        self.seed = seed
        self.strict_splice = strict_splice

    def _check_ready(self):
        if self.tokenizer is None or self.infiller is None or self.skeleton is None:
            raise ConfigError("MotionEditor needs a tokenizer, an infiller, and a skeleton")

    def fit(self, X=None, y=None) -> "MotionEditor":
        self._check_ready()
        return self

    def edit(self, clip: MotionClip) -> tuple[list[MotionClip], MaskSpan]:
        self._check_ready()
        return edit_motion(
            clip,
            self.tokenizer,
            self.infiller,
            self.skeleton,
            self.signal_spec,
            alpha=self.alpha,
            num_edits=self.num_edits,
            temperature=self.temperature,
            crossfade_frames=self.crossfade_frames,
            seed=self.seed,
            strict_splice=self.strict_splice,
        )

    def transform(self, clips: list[MotionClip]) -> list[tuple[list[MotionClip], MaskSpan]]:
        return [self.edit(clip) for clip in clips]
