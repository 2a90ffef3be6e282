"""Evaluation pair construction: narration matching, window extraction,
dynamic time warping, and chirality-aware expert alignment.

DTW here uses the step set {(1,0), (0,1), (1,1)} over a squared-Euclidean
frame cost. The default frame representation is flattened joint positions
from forward kinematics; raw pose features can be selected instead.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ClipFormatError
from .kinematics import KinematicSignalSpec, MaskSpan, compute_signal, make_span, select_peak
from .motion import MotionClip, Skeleton, forward_kinematics, mirror_sagittal
from .validation import check_clips, check_skeleton_clip


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"embedding shapes differ: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero vectors")
    return float(a @ b / (na * nb))


@dataclass
class NarrationRecord:
    """A timestamped commentary line with its text embedding."""

    timestamp: float
    text: str
    embedding: np.ndarray

    def __post_init__(self):
        self.embedding = np.asarray(self.embedding, dtype=np.float64)
        if self.embedding.ndim != 1 or self.embedding.size == 0:
            raise ValueError("embedding must be a non-empty vector")


def read_narrations(path) -> list[NarrationRecord]:
    """Read a narration file: a JSON list of {"t", "text", "embedding"}."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ClipFormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise ClipFormatError(f"{path}: narration file must be a JSON list")
    records = []
    for i, row in enumerate(raw):
        for key in ("t", "text", "embedding"):
            if key not in row:
                raise ClipFormatError(f"{path}: narration {i} is missing {key!r}")
        records.append(NarrationRecord(float(row["t"]), str(row["text"]), row["embedding"]))
    return records


def write_narrations(records: list[NarrationRecord], path) -> None:
    rows = [
        {"t": r.timestamp, "text": r.text, "embedding": r.embedding.tolist()} for r in records
    ]
    Path(path).write_text(json.dumps(rows, indent=2) + "\n")


@dataclass
class ExtractionPolicy:
    """How to turn narration moments into training windows.

    ``delta_before``/``delta_after`` are frame counts around the operative
    moment; ``buffer_frames`` extends both sides when extracting with a
    buffer. ``theta_sim`` is the minimum cosine similarity against any policy
    phrase embedding.
    """

    phrase_embeddings: list[np.ndarray] = field(default_factory=list)
    theta_sim: float = 0.5
    delta_before: int = 30
    delta_after: int = 30
    buffer_frames: int = 30

    def __post_init__(self):
        self.phrase_embeddings = [np.asarray(e, dtype=np.float64) for e in self.phrase_embeddings]
        if not 0.0 < self.theta_sim < 1.0:
            raise ValueError(f"theta_sim must be in (0, 1), got {self.theta_sim}")
        if min(self.delta_before, self.delta_after) < 0 or self.buffer_frames < 0:
            raise ValueError("window sizes must be non-negative")


def find_operative_moments(
    narrations: list[NarrationRecord], policy: ExtractionPolicy
) -> list[tuple[float, float]]:
    """Narration timestamps whose best phrase similarity clears theta_sim.

    Returns (timestamp, best_similarity) in input order.
    """
    if not policy.phrase_embeddings:
        raise ValueError("extraction policy has no phrase embeddings")
    out = []
    for rec in narrations:
        best = max(cosine_similarity(rec.embedding, p) for p in policy.phrase_embeddings)
        if best >= policy.theta_sim:
            out.append((rec.timestamp, best))
    return out


def extract_clip(
    full_motion: MotionClip,
    t_star: int,
    policy: ExtractionPolicy,
    with_buffer: bool = False,
) -> MotionClip:
    """Cut the window around frame ``t_star`` from a full recording.

    The window is [t* - delta_before, t* + delta_after], extended by
    ``buffer_frames`` on each side when ``with_buffer`` is set. Windows that
    leave the recording raise with the deficit in frames.
    """
    pad = policy.buffer_frames if with_buffer else 0
    lo = t_star - policy.delta_before - pad
    hi = t_star + policy.delta_after + pad
    if lo < 0:
        raise ValueError(f"window starts {-lo} frame(s) before the recording begins")
    if hi >= full_motion.num_frames:
        raise ValueError(
            f"window ends {hi - full_motion.num_frames + 1} frame(s) past the recording end"
        )
    return full_motion.with_data(full_motion.data[lo : hi + 1].copy())


# ---------------------------------------------------------------------------
# Dynamic time warping


def _frame_matrix(clip: MotionClip, skeleton: Skeleton | None, use_positions: bool) -> np.ndarray:
    if use_positions:
        if skeleton is None:
            raise ValueError("position-based DTW needs a skeleton")
        return forward_kinematics(clip, skeleton).reshape(clip.num_frames, -1)
    return clip.joint_rotations.copy()


def dtw_align(a: np.ndarray, b: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    """Align two frame sequences, returning the warping path and total cost.

    ``a`` (T, D) and ``b`` (T', D) are compared with squared Euclidean frame
    cost; steps are (1,0), (0,1), (1,1) and the path runs from (0,0) to
    (T-1, T'-1). Ties prefer the diagonal, then advancing ``a``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"sequences must be (T, D) with equal D, got {a.shape} and {b.shape}")
    n, m = a.shape[0], b.shape[0]
    if n == 0 or m == 0:
        raise ValueError("sequences must be non-empty")

    cost = cdist(a, b, metric="sqeuclidean")
    # Padded table: acc[i+1, j+1] is the best cost ending at cell (i, j).
    # Sweep anti-diagonals: every cell on diagonal d reads only d-1 and d-2.
    acc = np.full((n + 1, m + 1), np.inf)
    acc[1, 1] = cost[0, 0]
    for d in range(3, n + m + 1):
        i = np.arange(max(1, d - m), min(n, d - 1) + 1)
        j = d - i
        best = np.minimum(np.minimum(acc[i - 1, j - 1], acc[i - 1, j]), acc[i, j - 1])
        acc[i, j] = cost[i - 1, j - 1] + best

    path = [(n - 1, m - 1)]
    i, j = n, m
    while (i, j) != (1, 1):
        candidates = (
            (acc[i - 1, j - 1], (i - 1, j - 1)),  # diagonal preferred on ties
            (acc[i - 1, j], (i - 1, j)),
            (acc[i, j - 1], (i, j - 1)),
        )
        best = min(candidates, key=lambda c: c[0])
        i, j = best[1]
        path.append((i - 1, j - 1))
    path.reverse()
    return path, float(acc[n, m])


def validate_path(path: list[tuple[int, int]], n: int, m: int):
    """Check a warping path is complete and monotonic with unit steps."""
    if not path or path[0] != (0, 0) or path[-1] != (n - 1, m - 1):
        raise ValueError("path must run from (0, 0) to (T-1, T'-1)")
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
            raise ValueError(f"invalid path step from ({i0}, {j0}) to ({i1}, {j1})")


def resample_by_path(
    expert: MotionClip, path: list[tuple[int, int]], novice_length: int
) -> MotionClip:
    """Retime an expert clip onto the novice timeline along a warping path.

    Each novice frame takes the median of its matched expert frames, so
    one-to-many matches pick a central representative rather than an
    extreme.
    """
    validate_path(path, novice_length, expert.num_frames)
    matches: list[list[int]] = [[] for _ in range(novice_length)]
    for i, j in path:
        matches[i].append(j)
    rows = []
    for i, js in enumerate(matches):
        js.sort()
        rows.append(js[(len(js) - 1) // 2])  # lower median keeps a real frame
    return expert.with_data(expert.data[rows].copy())


def align_with_chirality(
    novice: MotionClip,
    expert: MotionClip,
    skeleton: Skeleton,
    use_positions: bool = True,
) -> tuple[MotionClip, bool, float]:
    """DTW-align an expert to a novice, trying both chiralities.

    The expert is compared as-is and mirrored; the lower-cost variant is
    retimed onto the novice timeline. Ties keep the unmirrored expert.
    Returns (aligned_expert, mirrored, cost).
    """
    check_skeleton_clip(skeleton, novice)
    check_skeleton_clip(skeleton, expert)
    nov = _frame_matrix(novice, skeleton, use_positions)
    exp_orig = _frame_matrix(expert, skeleton, use_positions)
    mirrored_clip = mirror_sagittal(expert, skeleton)
    exp_mir = _frame_matrix(mirrored_clip, skeleton, use_positions)

    path_o, cost_o = dtw_align(nov, exp_orig)
    path_m, cost_m = dtw_align(nov, exp_mir)
    if cost_m < cost_o:
        return resample_by_path(mirrored_clip, path_m, novice.num_frames), True, cost_m
    return resample_by_path(expert, path_o, novice.num_frames), False, cost_o


@dataclass
class EvalPair:
    """A novice clip with its retrieved, aligned expert references."""

    novice: MotionClip
    experts: list[MotionClip]
    span: MaskSpan
    similarity_scores: list[float]
    mirrored: list[bool]
    expert_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.experts:
            raise ValueError("eval pair needs at least one expert")
        if not len(self.experts) == len(self.similarity_scores) == len(self.mirrored):
            raise ValueError("experts, scores, and mirror flags must align")
        for e in self.experts:
            if e.num_frames != self.novice.num_frames:
                raise ValueError("aligned experts must match the novice length")


def build_eval_pairs(
    novices: list[MotionClip],
    experts: list[MotionClip],
    skeleton: Skeleton,
    k: int = 3,
    signal_spec: KinematicSignalSpec | None = None,
    alpha: float = 0.15,
    use_positions: bool = True,
) -> list[EvalPair]:
    """Retrieve and align the k most similar experts for every novice.

    Ranking uses narration-embedding cosine similarity when every clip has an
    ``embedding`` in its metadata, otherwise the best-chirality DTW cost.
    Each pair records the novice's kinematic mask span.
    """
    novices = check_clips(novices, "novices")
    experts = check_clips(experts, "experts")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if signal_spec is None:
        signal_spec = KinematicSignalSpec()
    if len(experts) < k:
        warnings.warn(
            f"only {len(experts)} experts available, using k={len(experts)} instead of {k}"
        )
        k = len(experts)

    have_embeddings = all("embedding" in c.metadata for c in novices) and all(
        "embedding" in c.metadata for c in experts
    )

    # FK runs once per expert and once per mirrored expert, shared by novices.
    mirrored_clips = [mirror_sagittal(e, skeleton) for e in experts]
    exp_mats = [_frame_matrix(e, skeleton, use_positions) for e in experts]
    mir_mats = [_frame_matrix(m, skeleton, use_positions) for m in mirrored_clips]

    pairs = []
    for novice in novices:
        nov_mat = _frame_matrix(novice, skeleton, use_positions)
        records = []  # (rank_key, similarity, expert_idx, mirrored, path, cost)
        for e_idx in range(len(experts)):
            path_o, cost_o = dtw_align(nov_mat, exp_mats[e_idx])
            path_m, cost_m = dtw_align(nov_mat, mir_mats[e_idx])
            if cost_m < cost_o:
                mirrored, path, cost = True, path_m, cost_m
            else:
                mirrored, path, cost = False, path_o, cost_o
            if have_embeddings:
                similarity = cosine_similarity(
                    novice.metadata["embedding"], experts[e_idx].metadata["embedding"]
                )
            else:
                similarity = -cost
            records.append((similarity, e_idx, mirrored, path, cost))

        records.sort(key=lambda r: (-r[0], r[1]))
        top = records[:k]

        signal = compute_signal(novice, skeleton, signal_spec)
        span = make_span(select_peak(signal), novice.num_frames, alpha)

        aligned, scores, mirrored_flags, ids = [], [], [], []
        for similarity, e_idx, mirrored, path, cost in top:
            source = mirrored_clips[e_idx] if mirrored else experts[e_idx]
            aligned.append(resample_by_path(source, path, novice.num_frames))
            scores.append(float(similarity))
            mirrored_flags.append(bool(mirrored))
            ids.append(experts[e_idx].metadata.get("name", f"expert{e_idx:04d}"))
        pairs.append(EvalPair(novice, aligned, span, scores, mirrored_flags, ids))
    return pairs
