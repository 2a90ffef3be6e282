"""Binary novice/expert classifier whose penultimate layer embeds clips.

A small per-frame MLP feeds mean pooling over the mask span; the pooled
penultimate activations are the feature space for the Frechet skill metric.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import nn
from .kinematics import MaskSpan
from .motion import MotionClip
from .validation import check_clips, check_span


class _ClassifierNet(nn.Module):
    def __init__(self, in_dim: int, hidden_dim: int, feature_dim: int, rng):
        super().__init__()
        self.lin1 = nn.Linear(in_dim, hidden_dim, rng)
        self.lin2 = nn.Linear(hidden_dim, feature_dim, rng)
        self.head = nn.Linear(feature_dim, 2, rng)

    def frame_features(self, x: nn.Tensor) -> nn.Tensor:
        return self.lin2(self.lin1(x).relu()).relu()


class SkillClassifier(BaseEstimator, ClassifierMixin):
    """Expert-vs-novice classifier over mask-span frames.

    ``fit`` takes clips, binary labels, and one mask span per clip; frames in
    the span pass through a two-layer MLP and are mean-pooled into a
    ``feature_dim``-dimensional clip embedding scored by a linear head.
    ``features`` exposes those embeddings for distribution metrics.
    """

    def __init__(
        self,
        hidden_dim: int = 64,
        feature_dim: int = 64,
        learning_rate: float = 1e-3,
        batch_size: int = 32,
        epochs: int = 100,
        holdout_fraction: float = 0.2,
        seed: int = 0,
        technique: str | None = None,
    ):
        self.hidden_dim = hidden_dim
        self.feature_dim = feature_dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.holdout_fraction = holdout_fraction
        self.seed = seed
        self.technique = technique

    # -- internals -------------------------------------------------------------

    def _gather(self, clips: list[MotionClip], spans: list[MaskSpan]):
        """Stack span frames and a mean-pooling matrix for a clip batch."""
        if len(clips) != len(spans):
            raise ValueError(f"{len(clips)} clips but {len(spans)} spans")
        for clip, span in zip(clips, spans):
            check_span(span, clip.num_frames)
        widths = [span.width for span in spans]
        total = int(np.sum(widths))
        frames = np.concatenate(
            [clip.data[span.lo : span.hi + 1] for clip, span in zip(clips, spans)]
        )
        pool = np.zeros((len(clips), total), dtype=np.float32)
        offset = 0
        for i, w in enumerate(widths):
            pool[i, offset : offset + w] = 1.0 / w
            offset += w
        return frames, pool

    def _forward_features(self, clips, spans) -> nn.Tensor:
        frames, pool = self._gather(clips, spans)
        x = nn.Tensor(((frames - self.feature_mean_) / self.feature_std_).astype(np.float32))
        per_frame = self.net_.frame_features(x)
        return nn.Tensor(pool) @ per_frame

    def _encode_labels(self, y) -> np.ndarray:
        y = np.asarray(y)
        classes = np.unique(y)
        if classes.size != 2:
            raise ValueError(f"need exactly 2 classes, got {classes.tolist()}")
        self.classes_ = classes
        return np.searchsorted(classes, y)

    # -- estimator API ------------------------------------------------------------

    def fit(self, X: list[MotionClip], y, spans: list[MaskSpan]) -> "SkillClassifier":
        clips = check_clips(X, "X", min_count=4)
        labels = self._encode_labels(y)
        if len(labels) != len(clips):
            raise ValueError(f"{len(clips)} clips but {len(labels)} labels")
        if len(spans) != len(clips):
            raise ValueError(f"{len(clips)} clips but {len(spans)} spans")
        for clip, span in zip(clips, spans):
            check_span(span, clip.num_frames)
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError(f"holdout_fraction must be in [0, 1), got {self.holdout_fraction}")

        rng = np.random.default_rng(self.seed)
        order = rng.permutation(len(clips))
        n_hold = int(round(self.holdout_fraction * len(clips)))
        hold_idx, train_idx = order[:n_hold], order[n_hold:]
        if train_idx.size == 0:
            raise ValueError("holdout fraction leaves no training clips")

        span_frames = np.concatenate(
            [clips[i].data[spans[i].lo : spans[i].hi + 1] for i in train_idx]
        )
        mean = span_frames.mean(axis=0)
        std = np.maximum(span_frames.std(axis=0), 1e-6)
        self.feature_mean_ = mean.astype(np.float32).astype(np.float64)
        self.feature_std_ = std.astype(np.float32).astype(np.float64)

        self.net_ = _ClassifierNet(
            clips[0].feature_dim, self.hidden_dim, self.feature_dim, rng
        )
        optimizer = nn.Adam(self.net_.parameters(), lr=self.learning_rate)

        batch = min(self.batch_size, train_idx.size)
        self.training_log_ = []
        for epoch in range(1, self.epochs + 1):
            epoch_order = train_idx[rng.permutation(train_idx.size)]
            loss_sum, steps = 0.0, 0
            for start in range(0, epoch_order.size, batch):
                rows = epoch_order[start : start + batch]
                pooled = self._forward_features(
                    [clips[i] for i in rows], [spans[i] for i in rows]
                )
                logits = self.net_.head(pooled)
                loss = nn.cross_entropy(logits, labels[rows])
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                loss_sum += loss.item()
                steps += 1
            self.training_log_.append({"epoch": epoch, "loss": loss_sum / steps})

        self.n_features_ = clips[0].feature_dim
        if hold_idx.size:
            predictions = self.predict(
                [clips[i] for i in hold_idx], [spans[i] for i in hold_idx]
            )
            self.holdout_accuracy_ = float(
                np.mean(predictions == self.classes_[labels[hold_idx]])
            )
        else:
            self.holdout_accuracy_ = float("nan")
        return self

    def features(self, X: list[MotionClip], spans: list[MaskSpan]) -> np.ndarray:
        """Pooled penultimate embeddings, one row per clip."""
        check_is_fitted(self, "net_")
        with nn.no_grad():
            pooled = self._forward_features(X, spans)
        return pooled.data.astype(np.float64)

    def decision_scores(self, X: list[MotionClip], spans: list[MaskSpan]) -> np.ndarray:
        check_is_fitted(self, "net_")
        with nn.no_grad():
            logits = self.net_.head(self._forward_features(X, spans))
        return logits.data.astype(np.float64)

    def predict_proba(self, X: list[MotionClip], spans: list[MaskSpan]) -> np.ndarray:
        logits = self.decision_scores(X, spans)
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X: list[MotionClip], spans: list[MaskSpan]) -> np.ndarray:
        return self.classes_[np.argmax(self.decision_scores(X, spans), axis=1)]

    # -- persistence -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "net_")
        tensors = {f"net/{k}": v.astype(np.float32) for k, v in self.net_.state_dict().items()}
        tensors["norm/mean"] = self.feature_mean_.astype(np.float32)
        tensors["norm/std"] = self.feature_std_.astype(np.float32)
        tensors["classes"] = self.classes_.astype(np.float32)
        meta = dict(self.get_params())
        meta.update(
            kind="skill_classifier",
            n_features=self.n_features_,
            holdout_accuracy=self.holdout_accuracy_,
        )
        tensors["meta/json"] = nn.encode_json(meta)
        nn.save_checkpoint(path, tensors)

    @classmethod
    def load(cls, path: str | Path) -> "SkillClassifier":
        tensors = nn.load_checkpoint(path)
        meta = nn.decode_json(tensors["meta/json"])
        if meta.get("kind") != "skill_classifier":
            raise ValueError(f"{path}: checkpoint is not a skill classifier")
        n_features = meta.pop("n_features")
        holdout = meta.pop("holdout_accuracy")
        meta.pop("kind")
        est = cls(**meta)
        rng = np.random.default_rng(est.seed)
        est.net_ = _ClassifierNet(n_features, est.hidden_dim, est.feature_dim, rng)
        est.net_.load_state_dict(
            {k[len("net/") :]: v for k, v in tensors.items() if k.startswith("net/")}
        )
        est.feature_mean_ = tensors["norm/mean"].astype(np.float64)
        est.feature_std_ = tensors["norm/std"].astype(np.float64)
        est.classes_ = tensors["classes"].astype(np.int64)
        est.n_features_ = n_features
        est.holdout_accuracy_ = holdout
        est.training_log_ = []
        return est
