"""Stage-by-stage pipeline over a run directory.

Each stage reads and writes plain files under a run directory, so stages can
run in one process or as separate CLI invocations:

    run_dir/
      config.json                 settings snapshot
      corpus/                     skeleton.json + expert/novice clip sets
      checkpoints/                tokenizer.xedt, infiller.xedt, classifier.xedt
      logs/                       one JSON line per training epoch
      pairs/manifest.json         retrieved expert references per eval novice
      pairs/aligned/              retimed expert clips
      edits/                      edited clips + .meta.json sidecars
      report.json                 improvement metrics

The pair manifest is a JSON list of
``{"novice": path, "experts": [paths], "mirrored": [bools],
"span": {"lo", "hi", "t_star"}}`` with paths relative to the run directory.
The metrics report is ``{"technique", "P", "F", "per_pair"}`` where each
per-pair row carries ``clip_id``, ``err_novice``, and ``err_gen``. Reports
are deterministic for a fixed config: no timestamps, sorted keys.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alignment import build_eval_pairs
from .classifier import SkillClassifier
from .config import RunConfig
from .edit import edit_motion
from .errors import StageError
from .infiller import MotionInfiller
from .kinematics import MaskSpan, compute_signal, make_span, select_peak
from .metrics import fid_improvement, pa_mpjpe
from .motion import MotionClip, Skeleton, read_clip, read_skeleton, write_clip, write_skeleton
from .synth import generate_corpus
from .tokenizer import PoseTokenizer

CORPUS_SUBDIRS = ("experts", "heldout", "novices_train", "novices_eval")


def _silent(message: str) -> None:
    del message


@dataclass
class RunPaths:
    """File locations for one run; fraction runs share corpus-level inputs."""

    root: Path
    corpus: Path
    pairs_file: Path
    aligned_dir: Path
    classifier_file: Path
    tokenizer_file: Path
    infiller_file: Path
    edits_dir: Path
    logs_dir: Path
    report_file: Path
    config_file: Path

    @classmethod
    def standard(cls, root: str | Path) -> "RunPaths":
        root = Path(root)
        return cls(
            root=root,
            corpus=root / "corpus",
            pairs_file=root / "pairs" / "manifest.json",
            aligned_dir=root / "pairs" / "aligned",
            classifier_file=root / "checkpoints" / "classifier.xedt",
            tokenizer_file=root / "checkpoints" / "tokenizer.xedt",
            infiller_file=root / "checkpoints" / "infiller.xedt",
            edits_dir=root / "edits",
            logs_dir=root / "logs",
            report_file=root / "report.json",
            config_file=root / "config.json",
        )

    @classmethod
    def for_fraction(cls, shared: "RunPaths", fraction_root: str | Path) -> "RunPaths":
        """Paths for one sweep fraction: private models/edits, shared inputs."""
        own = cls.standard(fraction_root)
        return dataclasses.replace(
            own,
            corpus=shared.corpus,
            pairs_file=shared.pairs_file,
            aligned_dir=shared.aligned_dir,
            classifier_file=shared.classifier_file,
        )

    @property
    def shared_root(self) -> Path:
        """Directory that manifest paths are relative to."""
        return self.pairs_file.parent.parent


def _fail(stage: str, message: str) -> StageError:
    return StageError(stage, message)


def _need_file(stage: str, path: Path, hint: str) -> Path:
    if not path.exists():
        raise _fail(stage, f"missing {path}; run `{hint}` first")
    return path


def _load_clip_dir(stage: str, directory: Path) -> list[MotionClip]:
    _need_file(stage, directory, "synth")
    clips = [read_clip(p) for p in sorted(directory.glob("*.json"))]
    if not clips:
        raise _fail(stage, f"no clips found in {directory}")
    return clips


def _load_skeleton(stage: str, config: RunConfig, paths: RunPaths) -> Skeleton:
    if config.skeleton_path is not None:
        return read_skeleton(_need_file(stage, Path(config.skeleton_path), "synth"))
    return read_skeleton(_need_file(stage, paths.corpus / "skeleton.json", "synth"))


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def training_subset(clips: list, fraction: float, seed: int) -> list:
    """Deterministic nested subset: the 0.3 subset is inside the 0.6 subset."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction >= 1.0:
        return list(clips)
    order = np.random.default_rng([seed, 101]).permutation(len(clips))
    count = max(2, int(np.ceil(fraction * len(clips))))
    return [clips[i] for i in sorted(order[:count])]


def _clip_name(clip: MotionClip, fallback: str) -> str:
    return str(clip.metadata.get("name", fallback))


def _spans_for(clips, skeleton, config) -> list[MaskSpan]:
    spec = config.make_signal_spec()
    spans = []
    for clip in clips:
        signal = compute_signal(clip, skeleton, spec)
        spans.append(make_span(select_peak(signal), clip.num_frames, config.alpha_infer))
    return spans


# ---------------------------------------------------------------------------
# Stages


def stage_synth(config: RunConfig, paths: RunPaths, log=_silent) -> None:
    """Generate the synthetic corpus into ``corpus/``."""
    spec = config.make_synth_spec()
    counts = config.corpus_counts()
    corpus = generate_corpus(spec, seed=config.seed, **counts)
    sets = {
        "experts": corpus.experts,
        "heldout": corpus.heldout_experts,
        "novices_train": corpus.train_novices,
        "novices_eval": corpus.eval_novices,
    }
    for sub, clips in sets.items():
        directory = paths.corpus / sub
        directory.mkdir(parents=True, exist_ok=True)
        for clip in clips:
            write_clip(clip, directory / f"{_clip_name(clip, sub)}.json")
    write_skeleton(corpus.skeleton, paths.corpus / "skeleton.json")
    _write_json(paths.corpus / "pairing.json", corpus.pairing)
    log(
        f"[synth] wrote {sum(len(c) for c in sets.values())} clips "
        f"({', '.join(f'{k}={len(v)}' for k, v in sets.items())}) to {paths.corpus}"
    )


def stage_train_tokenizer(config: RunConfig, paths: RunPaths, log=_silent) -> PoseTokenizer:
    """Fit the pose tokenizer on the expert training subset."""
    stage = "train-tokenizer"
    experts = _load_clip_dir(stage, paths.corpus / "experts")
    subset = training_subset(experts, config.train_fraction, config.seed)
    log(f"[{stage}] training on {len(subset)}/{len(experts)} expert clips")
    tokenizer = config.make_tokenizer()
    tokenizer.fit(subset)
    paths.tokenizer_file.parent.mkdir(parents=True, exist_ok=True)
    tokenizer.save(paths.tokenizer_file)
    _write_jsonl(paths.logs_dir / "tokenizer.jsonl", tokenizer.training_log_)
    log(
        f"[{stage}] final loss {tokenizer.training_log_[-1]['loss']:.4f}, "
        f"saved {paths.tokenizer_file}"
    )
    return tokenizer


def stage_train_infiller(config: RunConfig, paths: RunPaths, log=_silent) -> MotionInfiller:
    """Fit the masked infiller on tokenized expert clips."""
    stage = "train-infiller"
    experts = _load_clip_dir(stage, paths.corpus / "experts")
    skeleton = _load_skeleton(stage, config, paths)
    _need_file(stage, paths.tokenizer_file, "train-tokenizer")
    tokenizer = PoseTokenizer.load(paths.tokenizer_file)

    subset = training_subset(experts, config.train_fraction, config.seed)
    token_seqs = tokenizer.transform(subset)
    spec = config.make_signal_spec()
    t_stars = [select_peak(compute_signal(clip, skeleton, spec)) for clip in subset]
    log(f"[{stage}] training on {len(subset)}/{len(experts)} tokenized clips")
    infiller = config.make_infiller()
    infiller.fit(token_seqs, t_stars)
    paths.infiller_file.parent.mkdir(parents=True, exist_ok=True)
    infiller.save(paths.infiller_file)
    _write_jsonl(paths.logs_dir / "infiller.jsonl", infiller.training_log_)
    log(
        f"[{stage}] final loss {infiller.training_log_[-1]['loss']:.4f}, "
        f"saved {paths.infiller_file}"
    )
    return infiller


def stage_pair(config: RunConfig, paths: RunPaths, log=_silent) -> list:
    """Retrieve and align expert references for every eval novice."""
    stage = "pair"
    novices = _load_clip_dir(stage, paths.corpus / "novices_eval")
    experts = _load_clip_dir(stage, paths.corpus / "experts")
    skeleton = _load_skeleton(stage, config, paths)

    pairs = build_eval_pairs(
        novices,
        experts,
        skeleton,
        k=config.experts_per_pair,
        signal_spec=config.make_signal_spec(),
        alpha=config.alpha_infer,
    )
    base = paths.shared_root
    paths.aligned_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for p_idx, pair in enumerate(pairs):
        novice_name = _clip_name(pair.novice, f"novice{p_idx:04d}")
        expert_files = []
        for e_idx, aligned in enumerate(pair.experts):
            aligned_path = paths.aligned_dir / f"{novice_name}_expert{e_idx}.json"
            write_clip(aligned, aligned_path)
            expert_files.append(str(aligned_path.relative_to(base)))
        manifest.append(
            {
                "novice": str((paths.corpus / "novices_eval" / f"{novice_name}.json").relative_to(base)),
                "experts": expert_files,
                "mirrored": pair.mirrored,
                "span": pair.span.to_dict(),
            }
        )
    _write_json(paths.pairs_file, manifest)
    log(f"[{stage}] wrote {len(manifest)} pairs to {paths.pairs_file}")
    return manifest


def stage_edit(config: RunConfig, paths: RunPaths, log=_silent) -> None:
    """Edit every eval novice with the trained prior."""
    stage = "edit"
    novices = _load_clip_dir(stage, paths.corpus / "novices_eval")
    skeleton = _load_skeleton(stage, config, paths)
    _need_file(stage, paths.tokenizer_file, "train-tokenizer")
    _need_file(stage, paths.infiller_file, "train-infiller")
    tokenizer = PoseTokenizer.load(paths.tokenizer_file)
    infiller = MotionInfiller.load(paths.infiller_file)

    paths.edits_dir.mkdir(parents=True, exist_ok=True)
    spec = config.make_signal_spec()
    for i, novice in enumerate(novices):
        seed = config.seed + i
        edits, span = edit_motion(
            novice,
            tokenizer,
            infiller,
            skeleton,
            signal_spec=spec,
            alpha=config.alpha_infer,
            num_edits=config.num_edits,
            temperature=config.temperature,
            crossfade_frames=config.crossfade_frames,
            seed=seed,
            strict_splice=config.strict_splice,
        )
        name = _clip_name(novice, f"novice{i:04d}")
        for j, edit in enumerate(edits):
            write_clip(edit, paths.edits_dir / f"{name}_edit{j}.json")
            sidecar = {
                "t_star": span.t_star,
                "lo": span.lo,
                "hi": span.hi,
                "alpha": config.alpha_infer,
                "mode": edit.metadata["edit_mode"],
                "seed": seed,
            }
            _write_json(paths.edits_dir / f"{name}_edit{j}.meta.json", sidecar)
    log(f"[{stage}] wrote {len(novices) * config.num_edits} edits to {paths.edits_dir}")


def stage_train_classifier(config: RunConfig, paths: RunPaths, log=_silent) -> SkillClassifier:
    """Fit the expert/novice classifier used for distribution features."""
    stage = "train-classifier"
    experts = _load_clip_dir(stage, paths.corpus / "experts")
    novices = _load_clip_dir(stage, paths.corpus / "novices_train")
    skeleton = _load_skeleton(stage, config, paths)

    clips = experts + novices
    labels = np.array([1] * len(experts) + [0] * len(novices))
    spans = _spans_for(clips, skeleton, config)
    log(f"[{stage}] training on {len(experts)} expert / {len(novices)} novice clips")
    classifier = config.make_classifier()
    classifier.fit(clips, labels, spans)
    paths.classifier_file.parent.mkdir(parents=True, exist_ok=True)
    classifier.save(paths.classifier_file)
    _write_jsonl(paths.logs_dir / "classifier.jsonl", classifier.training_log_)
    log(
        f"[{stage}] holdout accuracy {classifier.holdout_accuracy_:.3f}, "
        f"saved {paths.classifier_file}"
    )
    return classifier


def stage_eval(config: RunConfig, paths: RunPaths, log=_silent) -> dict:
    """Score edits against aligned experts and write ``report.json``."""
    stage = "eval"
    skeleton = _load_skeleton(stage, config, paths)
    _need_file(stage, paths.pairs_file, "pair")
    _need_file(stage, paths.classifier_file, "train-classifier")
    manifest = json.loads(paths.pairs_file.read_text())
    classifier = SkillClassifier.load(paths.classifier_file)
    base = paths.shared_root

    per_pair = []
    improvements = []
    novice_clips, novice_spans = [], []
    edit_clips, edit_spans = [], []
    expert_clips, expert_spans = [], []
    for entry in manifest:
        novice_path = base / entry["novice"]
        clip_id = novice_path.stem
        novice = read_clip(_need_file(stage, novice_path, "synth"))
        span = MaskSpan.from_dict(entry["span"], novice.num_frames)
        experts = [
            read_clip(_need_file(stage, base / rel, "pair")) for rel in entry["experts"]
        ]
        edits = []
        for j in range(config.num_edits):
            edit_file = _need_file(stage, paths.edits_dir / f"{clip_id}_edit{j}.json", "edit")
            sidecar = json.loads((paths.edits_dir / f"{clip_id}_edit{j}.meta.json").read_text())
            if (sidecar["lo"], sidecar["hi"]) != (span.lo, span.hi):
                raise _fail(
                    stage,
                    f"{clip_id}: edit span ({sidecar['lo']},{sidecar['hi']}) does not match "
                    f"pair span ({span.lo},{span.hi}); re-run edit or pair",
                )
            edits.append(read_clip(edit_file))

        err_novice = float(np.mean([pa_mpjpe(novice, e, skeleton, span) for e in experts]))
        err_gen = min(
            float(np.mean([pa_mpjpe(edit, e, skeleton, span) for e in experts]))
            for edit in edits
        )
        per_pair.append({"clip_id": clip_id, "err_novice": err_novice, "err_gen": err_gen})
        if err_novice > 0.0:
            improvements.append((err_novice - err_gen) / err_novice * 100.0)

        novice_clips.append(novice)
        novice_spans.append(span)
        edit_clips.extend(edits)
        edit_spans.extend([span] * len(edits))
        expert_clips.extend(experts)
        expert_spans.extend([span] * len(experts))

    if not improvements:
        raise _fail(stage, "every pair has zero novice error; improvement is undefined")
    pose_score = float(np.mean(improvements))
    fid_score = fid_improvement(
        classifier.features(novice_clips, novice_spans),
        classifier.features(edit_clips, edit_spans),
        classifier.features(expert_clips, expert_spans),
    )
    report = {
        "technique": config.technique,
        "P": pose_score,
        "F": fid_score,
        "per_pair": per_pair,
    }
    _write_json(paths.report_file, report)
    log(f"[{stage}] P {pose_score:.2f}%  F {fid_score:.2f}%  ({paths.report_file})")
    return report


# ---------------------------------------------------------------------------
# Drivers

STAGES = {
    "synth": stage_synth,
    "train-tokenizer": stage_train_tokenizer,
    "train-infiller": stage_train_infiller,
    "pair": stage_pair,
    "edit": stage_edit,
    "train-classifier": stage_train_classifier,
    "eval": stage_eval,
}

RUN_ORDER = (
    "synth",
    "train-tokenizer",
    "train-infiller",
    "pair",
    "edit",
    "train-classifier",
    "eval",
)


def run_stage(name: str, config: RunConfig, paths: RunPaths, log=_silent):
    """Run one stage, wrapping unexpected failures with the stage name."""
    if name not in STAGES:
        raise ValueError(f"unknown stage {name!r}; expected one of {sorted(STAGES)}")
    try:
        return STAGES[name](config, paths, log)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, str(exc)) from exc


def run_pipeline(config: RunConfig, run_dir: str | Path, log=_silent) -> dict:
    """Run every stage in order under ``run_dir`` and return the report."""
    paths = RunPaths.standard(run_dir)
    paths.root.mkdir(parents=True, exist_ok=True)
    config.save(paths.config_file)
    report = None
    for name in RUN_ORDER:
        report = run_stage(name, config, paths, log)
    return report


def run_sweep(
    config: RunConfig, run_dir: str | Path, fractions: list[float], log=_silent
) -> dict:
    """Train at several expert-corpus fractions, sharing the corpus, pairs,
    and classifier across fractions so only the learned prior varies.

    Emits one report per fraction plus ``sweep_report.json``; warns when P or
    F fails to increase with more training data.
    """
    if not fractions:
        raise ValueError("fractions must be non-empty")
    shared = RunPaths.standard(run_dir)
    shared.root.mkdir(parents=True, exist_ok=True)
    config.save(shared.config_file)
    run_stage("synth", config, shared, log)
    run_stage("pair", config, shared, log)
    run_stage("train-classifier", config, shared, log)

    rows = []
    for fraction in fractions:
        sub_config = RunConfig.from_dict({**config.to_dict(), "train_fraction": fraction})
        sub_paths = RunPaths.for_fraction(shared, shared.root / "fractions" / f"frac_{fraction:g}")
        sub_paths.root.mkdir(parents=True, exist_ok=True)
        sub_config.save(sub_paths.config_file)
        for name in ("train-tokenizer", "train-infiller", "edit", "eval"):
            result = run_stage(name, sub_config, sub_paths, log)
        rows.append(
            {
                "train_fraction": fraction,
                "P": result["P"],
                "F": result["F"],
                "report_file": str(sub_paths.report_file.relative_to(shared.root)),
            }
        )

    ordered = sorted(rows, key=lambda r: r["train_fraction"])
    for metric in ("P", "F"):
        values = [r[metric] for r in ordered]
        if any(b < a for a, b in zip(values, values[1:])):
            warnings.warn(
                f"{metric} is not non-decreasing across train fractions: "
                + ", ".join(f"{r['train_fraction']:g}->{r[metric]:.2f}%" for r in ordered)
            )
    sweep_report = {"technique": config.technique, "fractions": rows}
    _write_json(shared.root / "sweep_report.json", sweep_report)
    log(f"[sweep] wrote {shared.root / 'sweep_report.json'}")
    return sweep_report
