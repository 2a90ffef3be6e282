"""End-to-end tests for the staged pipeline on a miniature corpus."""

import copy
import json
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from motiontune import (
    RunConfig,
    StageError,
    read_clip,
)
from motiontune.pipeline import (
    RunPaths,
    run_pipeline,
    run_stage,
    run_sweep,
    training_subset,
)

MICRO_CONFIG = {
    "technique": "lift",
    "seed": 0,
    "corpus": {
        "num_experts": 12,
        "num_heldout": 4,
        "num_train_novices": 8,
        "num_eval_novices": 5,
        "num_frames": 16,
    },
    "tokenizer": {
        "num_books": 2,
        "codes_per_book": 8,
        "latent_dim": 8,
        "num_layers": 1,
        "num_heads": 2,
        "model_dim": 16,
        "ffn_dim": 32,
        "dropout": 0.0,
        "max_seq_len": 32,
        "epochs": 4,
        "batch_size": 4,
    },
    "infiller": {
        "num_books": 2,
        "codes_per_book": 8,
        "num_layers": 1,
        "num_heads": 2,
        "model_dim": 16,
        "ffn_dim": 32,
        "dropout": 0.0,
        "max_seq_len": 32,
        "epochs": 5,
        "batch_size": 4,
    },
    "classifier": {
        "hidden_dim": 16,
        "feature_dim": 8,
        "epochs": 8,
        "batch_size": 8,
    },
    "num_edits": 2,
    "experts_per_pair": 2,
}


def micro_config(**overrides) -> RunConfig:
    doc = copy.deepcopy(MICRO_CONFIG)
    doc.update(overrides)
    return RunConfig.from_dict(doc)


@pytest.fixture(scope="module")
def micro_run(tmp_path_factory):
    run_dir = Path(tmp_path_factory.mktemp("micro_run"))
    config = micro_config()
    report = run_pipeline(config, run_dir)
    return SimpleNamespace(
        config=config,
        run_dir=run_dir,
        report=report,
        paths=RunPaths.standard(run_dir),
    )


# -- full-run artifacts ---------------------------------------------------------


def test_run_writes_every_artifact(micro_run):
    paths = micro_run.paths
    counts = {"experts": 12, "heldout": 4, "novices_train": 8, "novices_eval": 5}
    for sub, count in counts.items():
        files = sorted((paths.corpus / sub).glob("*.json"))
        assert len(files) == count
    assert (paths.corpus / "skeleton.json").exists()
    assert (paths.corpus / "pairing.json").exists()
    assert paths.tokenizer_file.exists()
    assert paths.infiller_file.exists()
    assert paths.classifier_file.exists()
    for log_name in ("tokenizer", "infiller", "classifier"):
        log_file = paths.logs_dir / f"{log_name}.jsonl"
        rows = [json.loads(line) for line in log_file.read_text().splitlines()]
        assert rows and all("epoch" in row for row in rows)
    assert paths.pairs_file.exists()
    assert paths.report_file.exists()


def test_config_snapshot_matches_resolved_config(micro_run):
    snapshot = RunConfig.load(micro_run.paths.config_file)
    assert snapshot == micro_run.config


def test_report_format(micro_run):
    report = json.loads(micro_run.paths.report_file.read_text())
    assert set(report) == {"technique", "P", "F", "per_pair"}
    assert report["technique"] == "lift"
    assert isinstance(report["P"], float)
    assert isinstance(report["F"], float)
    assert len(report["per_pair"]) == 5
    for row in report["per_pair"]:
        assert set(row) == {"clip_id", "err_novice", "err_gen"}
        assert row["err_novice"] > 0.0
        assert row["err_gen"] >= 0.0
    # In-memory result and on-disk report are the same document.
    assert report == micro_run.report


def test_pair_manifest_format(micro_run):
    manifest = json.loads(micro_run.paths.pairs_file.read_text())
    assert len(manifest) == 5
    for entry in manifest:
        assert set(entry) == {"novice", "experts", "mirrored", "span"}
        assert len(entry["experts"]) == 2
        assert len(entry["mirrored"]) == 2
        assert all(isinstance(m, bool) for m in entry["mirrored"])
        assert set(entry["span"]) == {"lo", "hi", "t_star"}
        assert 0 <= entry["span"]["lo"] < entry["span"]["hi"] < 16
        # Paths are relative to the run directory and point at real files.
        for rel in [entry["novice"], *entry["experts"]]:
            assert not Path(rel).is_absolute()
            assert (micro_run.run_dir / rel).exists()


def test_edit_files_and_sidecars(micro_run):
    paths = micro_run.paths
    manifest = json.loads(paths.pairs_file.read_text())
    edits = sorted(paths.edits_dir.glob("*_edit*.json"))
    clips = [p for p in edits if not p.name.endswith(".meta.json")]
    sidecars = sorted(paths.edits_dir.glob("*.meta.json"))
    assert len(clips) == 5 * 2
    assert len(sidecars) == 5 * 2
    spans = {Path(e["novice"]).stem: e["span"] for e in manifest}
    for sidecar_path in sidecars:
        doc = json.loads(sidecar_path.read_text())
        assert set(doc) == {"t_star", "lo", "hi", "alpha", "mode", "seed"}
        clip_id = sidecar_path.name.rsplit("_edit", 1)[0]
        span = spans[clip_id]
        assert (doc["lo"], doc["hi"], doc["t_star"]) == (
            span["lo"],
            span["hi"],
            span["t_star"],
        )
        assert doc["alpha"] == micro_run.config.alpha_infer
        assert doc["mode"] in ("greedy", "sample")


def test_edits_preserve_novice_outside_span(micro_run):
    paths = micro_run.paths
    manifest = json.loads(paths.pairs_file.read_text())
    for entry in manifest:
        novice = read_clip(micro_run.run_dir / entry["novice"])
        clip_id = Path(entry["novice"]).stem
        lo, hi = entry["span"]["lo"], entry["span"]["hi"]
        for j in range(2):
            edit = read_clip(paths.edits_dir / f"{clip_id}_edit{j}.json")
            outside = np.ones(novice.num_frames, dtype=bool)
            outside[lo : hi + 1] = False  # spans are closed intervals
            assert np.array_equal(edit.data[outside], novice.data[outside])
            assert np.array_equal(edit.data[:, :6], novice.data[:, :6])


def test_rerun_is_byte_identical(micro_run, tmp_path):
    run_pipeline(micro_config(), tmp_path)
    other = RunPaths.standard(tmp_path)
    assert other.report_file.read_bytes() == micro_run.paths.report_file.read_bytes()
    assert other.pairs_file.read_bytes() == micro_run.paths.pairs_file.read_bytes()
    edit_name = sorted(p.name for p in micro_run.paths.edits_dir.glob("*_edit0.json"))[0]
    assert (other.edits_dir / edit_name).read_bytes() == (
        micro_run.paths.edits_dir / edit_name
    ).read_bytes()


def test_no_writes_outside_run_dir(tmp_path, monkeypatch):
    workdir = tmp_path / "cwd"
    workdir.mkdir()
    monkeypatch.chdir(workdir)
    run_pipeline(micro_config(), tmp_path / "run")
    assert list(workdir.iterdir()) == []


# -- training_subset ------------------------------------------------------------


def test_training_subset_nested_and_deterministic():
    clips = list(range(100))
    small = training_subset(clips, 0.3, seed=5)
    medium = training_subset(clips, 0.6, seed=5)
    full = training_subset(clips, 1.0, seed=5)
    assert len(small) == 30
    assert len(medium) == 60
    assert full == clips
    assert set(small) <= set(medium)
    assert training_subset(clips, 0.3, seed=5) == small
    assert training_subset(clips, 0.3, seed=6) != small


def test_training_subset_keeps_at_least_two():
    assert len(training_subset(list(range(50)), 0.01, seed=0)) == 2


def test_training_subset_rejects_bad_fraction():
    with pytest.raises(ValueError, match="fraction"):
        training_subset([1, 2, 3], 0.0, seed=0)
    with pytest.raises(ValueError, match="fraction"):
        training_subset([1, 2, 3], 1.5, seed=0)


# -- stage failure behavior -------------------------------------------------------


def test_stage_requires_upstream_artifacts(tmp_path):
    config = micro_config()
    paths = RunPaths.standard(tmp_path)
    with pytest.raises(StageError, match=r"\[train-tokenizer\].*synth"):
        run_stage("train-tokenizer", config, paths)
    run_stage("synth", config, paths)
    with pytest.raises(StageError, match=r"\[train-infiller\].*train-tokenizer"):
        run_stage("train-infiller", config, paths)
    with pytest.raises(StageError, match=r"\[eval\].*pair"):
        run_stage("eval", config, paths)


def test_stage_error_carries_stage_name(tmp_path):
    paths = RunPaths.standard(tmp_path)
    with pytest.raises(StageError) as excinfo:
        run_stage("edit", micro_config(), paths)
    assert excinfo.value.stage == "edit"


def test_unknown_stage_name(tmp_path):
    with pytest.raises(ValueError, match="unknown stage"):
        run_stage("deploy", micro_config(), RunPaths.standard(tmp_path))


def test_unexpected_failures_are_wrapped_with_stage(tmp_path):
    config = micro_config()
    paths = RunPaths.standard(tmp_path)
    run_stage("synth", config, paths)
    corrupt = paths.corpus / "experts" / "expert_0000.json"
    corrupt.write_text("{broken")
    with pytest.raises(StageError) as excinfo:
        run_stage("train-tokenizer", config, paths)
    assert excinfo.value.stage == "train-tokenizer"


def test_partial_artifacts_survive_a_failed_stage(tmp_path):
    config = micro_config()
    paths = RunPaths.standard(tmp_path)
    run_stage("synth", config, paths)
    run_stage("train-tokenizer", config, paths)
    (paths.corpus / "novices_eval" / "novice_eval_0000.json").unlink()
    before = sorted(p.name for p in paths.corpus.rglob("*"))
    with pytest.raises(StageError):
        run_stage("edit", config, paths)
    assert paths.tokenizer_file.exists()
    assert sorted(p.name for p in paths.corpus.rglob("*")) == before


def test_eval_rejects_stale_edit_spans(micro_run, tmp_path):
    import shutil

    run_dir = tmp_path / "stale"
    shutil.copytree(micro_run.run_dir, run_dir)
    paths = RunPaths.standard(run_dir)
    sidecar = sorted(paths.edits_dir.glob("*.meta.json"))[0]
    doc = json.loads(sidecar.read_text())
    doc["lo"] += 1
    sidecar.write_text(json.dumps(doc))
    with pytest.raises(StageError, match="does not match"):
        run_stage("eval", micro_run.config, paths)


# -- sweep ------------------------------------------------------------------------


def test_sweep_shares_inputs_and_reports_per_fraction(tmp_path):
    config = micro_config()
    sweep = run_sweep(config, tmp_path, [0.5, 1.0])
    assert set(sweep) == {"technique", "fractions"}
    assert [row["train_fraction"] for row in sweep["fractions"]] == [0.5, 1.0]

    shared = RunPaths.standard(tmp_path)
    assert (tmp_path / "sweep_report.json").exists()
    assert shared.pairs_file.exists()
    assert shared.classifier_file.exists()
    for fraction in ("frac_0.5", "frac_1"):
        frac_dir = tmp_path / "fractions" / fraction
        frac_paths = RunPaths.standard(frac_dir)
        assert frac_paths.tokenizer_file.exists()
        assert frac_paths.infiller_file.exists()
        assert frac_paths.report_file.exists()
        # Corpus, pairs, and classifier live only at the sweep root.
        assert not (frac_dir / "corpus").exists()
        assert not (frac_dir / "pairs").exists()
        assert not frac_paths.classifier_file.exists()

    for row in sweep["fractions"]:
        report = json.loads((tmp_path / row["report_file"]).read_text())
        assert report["P"] == row["P"]
        assert report["F"] == row["F"]


def test_sweep_rejects_empty_fractions(tmp_path):
    with pytest.raises(ValueError, match="fractions"):
        run_sweep(micro_config(), tmp_path, [])


def test_fraction_paths_share_corpus_level_inputs(tmp_path):
    shared = RunPaths.standard(tmp_path)
    frac = RunPaths.for_fraction(shared, tmp_path / "fractions" / "frac_0.3")
    assert frac.corpus == shared.corpus
    assert frac.pairs_file == shared.pairs_file
    assert frac.aligned_dir == shared.aligned_dir
    assert frac.classifier_file == shared.classifier_file
    assert frac.tokenizer_file != shared.tokenizer_file
    assert frac.report_file != shared.report_file
