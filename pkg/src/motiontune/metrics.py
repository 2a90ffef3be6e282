"""Pose and distribution metrics restricted to the edited span.

Procrustes-aligned MPJPE measures per-frame pose error after the best
similarity transform; improvement percentages compare the novice against the
minimum-error edit. The Frechet distance between Gaussian feature statistics
scores distribution-level skill, with Ledoit-style covariance shrinkage for
small evaluation sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.covariance import ledoit_wolf

from .errors import DegenerateGeometryError
from .kinematics import MaskSpan
from .motion import MotionClip, Skeleton, forward_kinematics
from .validation import as_positions, check_skeleton_clip, check_span


@dataclass(frozen=True)
class ProcrustesResult:
    """Similarity transform mapping source points onto target points."""

    rotation: np.ndarray  # (3, 3), det = +1
    scale: float
    translation: np.ndarray  # (3,)
    residual: float  # RMS distance after alignment

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * (np.asarray(points) @ self.rotation.T) + self.translation


def procrustes_align(source: np.ndarray, target: np.ndarray) -> ProcrustesResult:
    """Best similarity transform (scale, rotation, translation) from source to
    target in the least-squares sense.

    Both inputs are (N, 3) with N >= 3. The rotation is reflection-corrected
    to a proper rotation. Rank-deficient configurations (collinear or
    coincident points) raise DegenerateGeometryError.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape or source.ndim != 2 or source.shape[1] != 3:
        raise ValueError(
            f"source and target must both be (N, 3), got {source.shape} and {target.shape}"
        )
    n = source.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")

    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    xs = source - mu_s
    xt = target - mu_t
    var_s = (xs * xs).sum()
    if var_s == 0.0:
        raise DegenerateGeometryError("source points are coincident")

    k = xs.T @ xt  # (3, 3) cross-covariance
    u, s, vt = np.linalg.svd(k)
    if s[1] <= 1e-12 * max(s[0], 1.0):
        raise DegenerateGeometryError("points are collinear; rotation is underdetermined")
    sign = np.sign(np.linalg.det(u @ vt))
    corr = np.ones(3)
    corr[-1] = sign
    rotation = (vt.T * corr) @ u.T
    scale = float((s * corr).sum() / var_s)
    translation = mu_t - scale * rotation @ mu_s

    aligned = scale * (source @ rotation.T) + translation
    residual = float(np.sqrt(((aligned - target) ** 2).sum(axis=1).mean()))
    return ProcrustesResult(rotation, scale, translation, residual)


def pa_mpjpe_positions(
    pred: np.ndarray, target: np.ndarray, span: MaskSpan | None = None
) -> float:
    """Mean per-joint position error after per-frame Procrustes alignment.

    ``pred`` and ``target`` are (T, J, 3); only frames in the span contribute
    (all frames when span is None).
    """
    pred = as_positions(pred, "pred")
    target = as_positions(target, "target")
    if pred.shape != target.shape:
        raise ValueError(f"position shapes differ: {pred.shape} vs {target.shape}")
    if span is None:
        frames = range(pred.shape[0])
    else:
        if span.hi >= pred.shape[0]:
            raise ValueError(f"span end {span.hi} exceeds {pred.shape[0]} frames")
        frames = range(span.lo, span.hi + 1)
    frames = list(frames)
    if not frames:
        raise ValueError("no frames selected")

    total = 0.0
    for t in frames:
        result = procrustes_align(pred[t], target[t])
        aligned = result.apply(pred[t])
        total += float(np.linalg.norm(aligned - target[t], axis=1).mean())
    return total / len(frames)


def pa_mpjpe(
    pred: MotionClip, target: MotionClip, skeleton: Skeleton, span: MaskSpan | None = None
) -> float:
    """Procrustes-aligned MPJPE between two clips over the mask span."""
    check_skeleton_clip(skeleton, pred)
    check_skeleton_clip(skeleton, target)
    if pred.num_frames != target.num_frames:
        raise ValueError(
            f"clips differ in length: {pred.num_frames} vs {target.num_frames}"
        )
    if span is not None:
        check_span(span, pred.num_frames)
    return pa_mpjpe_positions(
        forward_kinematics(pred, skeleton), forward_kinematics(target, skeleton), span
    )


def improvement_percent(err_novice: float, err_gen: float) -> float:
    """Relative improvement (err_novice - err_gen) / err_novice in percent."""
    if err_novice == 0.0:
        raise ValueError("novice error is zero; improvement is undefined")
    return (err_novice - err_gen) / err_novice * 100.0


def pose_improvement(
    novice: MotionClip,
    edits: list[MotionClip],
    experts: list[MotionClip],
    skeleton: Skeleton,
    span: MaskSpan,
) -> float:
    """Relative PA-MPJPE improvement of the best edit over the novice, in %.

    Each candidate's error is its mean PA-MPJPE against the expert references
    over the span; the generation error is the minimum over edits. Positive
    values mean the edit moved closer to the experts.
    """
    if not edits:
        raise ValueError("need at least one edit")
    if not experts:
        raise ValueError("need at least one expert reference")

    def err(clip: MotionClip) -> float:
        return float(np.mean([pa_mpjpe(clip, e, skeleton, span) for e in experts]))

    err_gen = min(err(edit) for edit in edits)
    return improvement_percent(err(novice), err_gen)


# ---------------------------------------------------------------------------
# Distribution metrics


@dataclass(frozen=True)
class GaussianStats:
    """Mean and covariance of a feature set."""

    mean: np.ndarray  # (d,)
    cov: np.ndarray  # (d, d)

    def __post_init__(self):
        if self.mean.ndim != 1 or self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError(
                f"inconsistent stats shapes: mean {self.mean.shape}, cov {self.cov.shape}"
            )
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.cov))):
            raise ValueError("stats contain non-finite values")
        if not np.allclose(self.cov, self.cov.T, atol=1e-8):
            raise ValueError("covariance must be symmetric")


def gaussian_stats(features: np.ndarray) -> GaussianStats:
    """Fit Gaussian statistics to (N, d) features.

    When the sample count is below twice the feature dimension the covariance
    uses Ledoit-Wolf shrinkage toward a scaled identity, keeping it well
    conditioned for small evaluation sets.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError(f"features must be (N, d), got {features.shape}")
    n, d = features.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    mean = features.mean(axis=0)
    if n < 2 * d:
        cov, _ = ledoit_wolf(features)
    else:
        cov = np.cov(features, rowvar=False)
    cov = np.atleast_2d(cov)
    cov = 0.5 * (cov + cov.T)
    return GaussianStats(mean, cov)


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    if vals.min() < -1e-8 * max(abs(vals.max()), 1.0):
        raise ValueError("matrix has significantly negative eigenvalues")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Frechet distance between Gaussians:
    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The cross term is computed through the symmetric product
    sqrt(S_a) S_b sqrt(S_a); small negative eigenvalues from round-off are
    clamped to zero.
    """
    if a.mean.shape != b.mean.shape:
        raise ValueError(f"stats dimensions differ: {a.mean.shape} vs {b.mean.shape}")
    mean_term = float(((a.mean - b.mean) ** 2).sum())
    root_a = _sqrt_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    vals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    if vals.min() < -1e-8 * max(abs(vals.max()), 1.0):
        raise ValueError("cross matrix has significantly negative eigenvalues")
    cross = 2.0 * np.sqrt(np.clip(vals, 0.0, None)).sum()
    return mean_term + float(np.trace(a.cov) + np.trace(b.cov)) - cross


def fid_improvement(
    novice_features: np.ndarray,
    edited_features: np.ndarray,
    expert_features: np.ndarray,
) -> float:
    """Relative Frechet-distance improvement of edits over novices, in %.

    All three inputs are (N, d) feature sets (one row per clip, pooled over
    its mask span). The score is
    ``(FD(novice, expert) - FD(edited, expert)) / FD(novice, expert) * 100``.
    """
    expert_stats = gaussian_stats(expert_features)
    fd_novice = frechet_distance(gaussian_stats(novice_features), expert_stats)
    fd_edited = frechet_distance(gaussian_stats(edited_features), expert_stats)
    if fd_novice <= 1e-12:  # identical sets leave round-off, not a real gap
        raise ValueError("novice set matches expert set; improvement is undefined")
    return improvement_percent(fd_novice, fd_edited)
