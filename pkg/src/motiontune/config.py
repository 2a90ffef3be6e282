"""Run configuration: JSON-backed settings for the end-to-end pipeline.

Estimator classes default to publication-scale hyperparameters; the default
``RunConfig`` overrides them with desk-scale values so a full run finishes in
minutes on a laptop CPU. Every field can be overridden from a JSON file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .classifier import SkillClassifier
from .errors import ConfigError
from .infiller import MotionInfiller
from .kinematics import SIGNAL_KINDS, KinematicSignalSpec
from .synth import SyntheticTechniqueSpec
from .tokenizer import PoseTokenizer

DESK_CORPUS = {
    "num_experts": 512,
    "num_heldout": 64,
    "num_train_novices": 128,
    "num_eval_novices": 112,
}

CORPUS_COUNT_KEYS = tuple(DESK_CORPUS)

DESK_TOKENIZER = {
    "latent_dim": 64,
    "codes_per_book": 64,
    "num_books": 2,
    "num_layers": 2,
    "num_heads": 4,
    "model_dim": 64,
    "dropout": 0.0,
    "epochs": 120,
    "batch_size": 32,
    "learning_rate": 1e-3,
    "max_seq_len": 128,
}

DESK_INFILLER = {
    "codes_per_book": 64,
    "num_books": 2,
    "num_layers": 4,
    "num_heads": 4,
    "model_dim": 64,
    "dropout": 0.0,
    "epochs": 30,
    "batch_size": 32,
    "learning_rate": 1e-3,
    "max_seq_len": 128,
}

DESK_CLASSIFIER = {
    "epochs": 60,
    "batch_size": 32,
    "learning_rate": 1e-3,
}


@dataclass
class RunConfig:
    """Settings for one technique run.

    ``corpus`` holds synthetic-generator arguments (clip counts plus any
    ``SyntheticTechniqueSpec`` overrides); ``tokenizer``, ``infiller``, and
    ``classifier`` hold estimator keyword overrides.
    """

    technique: str = "lift"
    seed: int = 0
    train_fraction: float = 1.0
    skeleton_path: str | None = None
    corpus: dict = field(default_factory=lambda: dict(DESK_CORPUS))
    tokenizer: dict = field(default_factory=lambda: dict(DESK_TOKENIZER))
    infiller: dict = field(default_factory=lambda: dict(DESK_INFILLER))
    classifier: dict = field(default_factory=lambda: dict(DESK_CLASSIFIER))
    signal_kind: str = "vertical_root_velocity"
    smoothing_window: int = 5
    target_joints: list[int] | None = None
    alpha_train: float = 0.3
    alpha_infer: float = 0.15
    num_edits: int = 3
    temperature: float = 1.0
    crossfade_frames: int = 2
    strict_splice: bool = False
    experts_per_pair: int = 3

    def __post_init__(self):
        self.validate()

    # -- validation ------------------------------------------------------------

    def validate(self) -> None:
        if not self.technique:
            raise ConfigError("technique must be a non-empty string")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if self.skeleton_path is not None and not Path(self.skeleton_path).exists():
            raise ConfigError(f"skeleton file not found: {self.skeleton_path}")
        if self.signal_kind not in SIGNAL_KINDS:
            raise ConfigError(
                f"signal_kind must be one of {sorted(SIGNAL_KINDS)}, got {self.signal_kind!r}"
            )
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ConfigError(
                f"smoothing_window must be a positive odd integer, got {self.smoothing_window}"
            )
        for label, alpha in (("alpha_train", self.alpha_train), ("alpha_infer", self.alpha_infer)):
            if not 0.0 < alpha < 1.0:
                raise ConfigError(f"{label} must be in (0, 1), got {alpha}")
        if self.num_edits < 1:
            raise ConfigError(f"num_edits must be >= 1, got {self.num_edits}")
        if self.temperature <= 0.0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.crossfade_frames < 0:
            raise ConfigError(f"crossfade_frames must be >= 0, got {self.crossfade_frames}")
        if self.experts_per_pair < 1:
            raise ConfigError(f"experts_per_pair must be >= 1, got {self.experts_per_pair}")
        books = self.tokenizer.get("num_books"), self.infiller.get("num_books")
        if None not in books and books[0] != books[1]:
            raise ConfigError(f"tokenizer and infiller disagree on num_books: {books}")
        codes = self.tokenizer.get("codes_per_book"), self.infiller.get("codes_per_book")
        if None not in codes and codes[0] != codes[1]:
            raise ConfigError(f"tokenizer and infiller disagree on codes_per_book: {codes}")
        # Constructing the components surfaces unknown or ill-typed overrides now
        # instead of deep inside a run.
        for build in (
            self.make_tokenizer,
            self.make_infiller,
            self.make_classifier,
            self.make_synth_spec,
            self.make_signal_spec,
        ):
            build()

    # -- factories ---------------------------------------------------------------

    def _make(self, cls, overrides: dict, label: str, extra: dict):
        kwargs = dict(overrides)
        kwargs.update(extra)
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad {label} settings: {exc}") from exc

    def make_tokenizer(self) -> PoseTokenizer:
        return self._make(
            PoseTokenizer, self.tokenizer, "tokenizer",
            {"seed": self.seed, "technique": self.technique},
        )

    def make_infiller(self) -> MotionInfiller:
        return self._make(
            MotionInfiller, self.infiller, "infiller",
            {"seed": self.seed + 1, "technique": self.technique, "alpha_train": self.alpha_train},
        )

    def make_classifier(self) -> SkillClassifier:
        return self._make(
            SkillClassifier, self.classifier, "classifier",
            {"seed": self.seed + 2, "technique": self.technique},
        )

    def make_synth_spec(self) -> SyntheticTechniqueSpec:
        kwargs = {k: v for k, v in self.corpus.items() if k not in CORPUS_COUNT_KEYS}
        return self._make(
            SyntheticTechniqueSpec, kwargs, "corpus", {"name": self.technique}
        )

    def corpus_counts(self) -> dict:
        counts = {k: self.corpus.get(k, DESK_CORPUS[k]) for k in CORPUS_COUNT_KEYS}
        for key, value in counts.items():
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"corpus {key} must be a positive integer, got {value!r}")
        return counts

    def make_signal_spec(self) -> KinematicSignalSpec:
        try:
            return KinematicSignalSpec(
                kind=self.signal_kind,
                target_joints=None if self.target_joints is None else tuple(self.target_joints),
                smoothing_window=self.smoothing_window,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad signal settings: {exc}") from exc

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError(f"config must be a JSON object, got {type(raw).__name__}")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**raw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)
