"""Skill-targeted motion editing.

Learn a discrete prior over expert motion (a causal pose tokenizer plus a
masked-span infiller), locate the skill-critical phase of a novice clip from
a kinematic signal, and regenerate just that span from the expert prior.
Evaluation pairs novices with aligned expert references and scores pose and
distribution improvement over the mask region.
"""

from .alignment import (
    EvalPair,
    ExtractionPolicy,
    NarrationRecord,
    align_with_chirality,
    build_eval_pairs,
    cosine_similarity,
    dtw_align,
    extract_clip,
    find_operative_moments,
    read_narrations,
    resample_by_path,
    write_narrations,
)
from .classifier import SkillClassifier
from .config import RunConfig
from .edit import MotionEditor, edit_motion
from .errors import ClipFormatError, ConfigError, DegenerateGeometryError, StageError
from .infiller import MotionInfiller
from .kinematics import (
    SIGNAL_KINDS,
    KinematicSignalSpec,
    MaskSpan,
    compute_signal,
    make_span,
    select_peak,
    span_from_halfwidth,
)
from .metrics import (
    GaussianStats,
    ProcrustesResult,
    fid_improvement,
    frechet_distance,
    gaussian_stats,
    improvement_percent,
    pa_mpjpe,
    pa_mpjpe_positions,
    pose_improvement,
    procrustes_align,
)
from .motion import (
    MotionClip,
    PoseFrame,
    Skeleton,
    assemble_feature_vector,
    default_humanoid,
    forward_kinematics,
    mean_interframe_displacement,
    mirror_sagittal,
    read_clip,
    read_skeleton,
    resample_uniform,
    write_clip,
    write_skeleton,
)
from .pipeline import RunPaths, run_pipeline, run_stage, run_sweep
from .synth import SyntheticCorpus, SyntheticTechniqueSpec, generate_corpus
from .tokenizer import PoseTokenizer, TokenSequence

__version__ = "0.1.0"

__all__ = [
    "ClipFormatError",
    "ConfigError",
    "DegenerateGeometryError",
    "EvalPair",
    "ExtractionPolicy",
    "GaussianStats",
    "KinematicSignalSpec",
    "MaskSpan",
    "MotionClip",
    "MotionEditor",
    "MotionInfiller",
    "NarrationRecord",
    "PoseFrame",
    "PoseTokenizer",
    "ProcrustesResult",
    "RunConfig",
    "RunPaths",
    "SIGNAL_KINDS",
    "Skeleton",
    "SkillClassifier",
    "StageError",
    "SyntheticCorpus",
    "SyntheticTechniqueSpec",
    "TokenSequence",
    "align_with_chirality",
    "assemble_feature_vector",
    "build_eval_pairs",
    "compute_signal",
    "cosine_similarity",
    "default_humanoid",
    "dtw_align",
    "edit_motion",
    "extract_clip",
    "fid_improvement",
    "find_operative_moments",
    "forward_kinematics",
    "frechet_distance",
    "gaussian_stats",
    "generate_corpus",
    "improvement_percent",
    "make_span",
    "mean_interframe_displacement",
    "mirror_sagittal",
    "pa_mpjpe",
    "pa_mpjpe_positions",
    "pose_improvement",
    "procrustes_align",
    "read_clip",
    "read_narrations",
    "read_skeleton",
    "resample_by_path",
    "resample_uniform",
    "run_pipeline",
    "run_stage",
    "run_sweep",
    "select_peak",
    "span_from_halfwidth",
    "write_clip",
    "write_narrations",
    "write_skeleton",
]
