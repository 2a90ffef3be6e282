"""Acceptance suite: numerical oracles plus the desk-scale benchmark.

One test per shipped criterion, in order. Criteria 1-5 are fast oracles
against independent references; criteria 6-10 share three session-scoped
training runs on the synthetic benchmark (full corpus, a byte-identity rerun,
and a 0.3-fraction run). Every test prints one ``[criterion N] PASS/FAIL``
line summarizing the measured values.
"""

import json
import time
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from dtw_oracle import brute_force_dtw, path_cost
from gradcheck import GRAD_CASES, run_case
from test_kinematics import SPAN_LENGTH_CASES

from motiontune import (
    GaussianStats,
    MotionInfiller,
    PoseTokenizer,
    RunConfig,
    compute_signal,
    dtw_align,
    forward_kinematics,
    frechet_distance,
    improvement_percent,
    make_span,
    mean_interframe_displacement,
    pa_mpjpe_positions,
    procrustes_align,
    read_clip,
    read_skeleton,
    select_peak,
)
from motiontune.alignment import validate_path
from motiontune.rotations import axis_angle_to_matrix
from motiontune.cli import main as cli_main
from motiontune.pipeline import RUN_ORDER, RunPaths, run_stage


def _criterion(num: int, name: str, ok: bool, detail: str) -> None:
    verdict = "PASS" if ok else "FAIL"
    print(f"[criterion {num:2d}] {verdict} {name}: {detail}", flush=True)
    assert ok, f"criterion {num} ({name}) failed: {detail}"


# -- session-scoped benchmark runs ------------------------------------------------


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """Full-corpus pipeline run with per-stage wall times."""
    root = Path(tmp_path_factory.mktemp("desk_full"))
    config = RunConfig()
    paths = RunPaths.standard(root)
    config.save(paths.config_file)
    times = {}
    report = None
    for name in RUN_ORDER:
        t0 = time.perf_counter()
        result = run_stage(name, config, paths)
        times[name] = time.perf_counter() - t0
        if name == "eval":
            report = result
    return SimpleNamespace(
        config=config, paths=paths, root=root, report=report, times=times
    )


@pytest.fixture(scope="session")
def desk_rerun(tmp_path_factory, desk_run):
    """Second full run through the CLI with the same (default) config."""
    root = Path(tmp_path_factory.mktemp("desk_rerun"))
    code = cli_main(["run", "--out", str(root)])
    assert code == 0
    return RunPaths.standard(root)


@pytest.fixture(scope="session")
def fraction_report(desk_run):
    """Report for train_fraction 0.3 sharing the full run's corpus, pairs,
    and classifier, so only the learned prior differs."""
    sub_config = RunConfig.from_dict(
        {**desk_run.config.to_dict(), "train_fraction": 0.3}
    )
    sub_paths = RunPaths.for_fraction(
        desk_run.paths, desk_run.root / "fractions" / "frac_0.3"
    )
    sub_paths.root.mkdir(parents=True, exist_ok=True)
    sub_config.save(sub_paths.config_file)
    report = None
    for name in ("train-tokenizer", "train-infiller", "edit", "eval"):
        report = run_stage(name, sub_config, sub_paths)
    return report


# -- criterion 1: gradient oracle --------------------------------------------------


def test_criterion_01_gradient_oracle():
    t0 = time.perf_counter()
    worst = {}
    for name, make_case in GRAD_CASES:
        worst[name] = run_case(make_case)
    elapsed = time.perf_counter() - t0
    bad = {k: v for k, v in worst.items() if v > 1e-4}
    peak = max(worst.values())
    _criterion(
        1,
        "gradient oracle",
        len(worst) >= 20 and not bad and elapsed <= 120.0,
        f"{len(worst)} ops, worst rel err {peak:.2e} (tol 1e-4), "
        f"{elapsed:.1f}s (budget 120s)" + (f", failing: {sorted(bad)}" if bad else ""),
    )


# -- criterion 2: DTW oracle --------------------------------------------------------


def test_criterion_02_dtw_brute_force():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    trials = 200
    mismatches = 0
    for _ in range(trials):
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        a = rng.normal(size=(n, 2))
        b = rng.normal(size=(m, 2))
        path, cost = dtw_align(a, b)
        validate_path(path, n, m)
        cost_matrix = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
        best_cost, _ = brute_force_dtw(cost_matrix)
        if cost != best_cost or path_cost(cost_matrix, path) != cost:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    _criterion(
        2,
        "DTW oracle",
        mismatches == 0 and elapsed <= 10.0,
        f"{trials} trials, {mismatches} mismatches (exact equality), "
        f"{elapsed:.2f}s (budget 10s)",
    )


# -- criterion 3: Procrustes oracle --------------------------------------------------


def test_criterion_03_procrustes_oracle():
    rng = np.random.default_rng(7)
    worst_residual = 0.0
    for _ in range(100):
        n = int(rng.integers(4, 40))
        source = rng.normal(size=(n, 3))
        rotation = axis_angle_to_matrix(rng.normal(size=3))
        scale = float(rng.uniform(0.5, 2.0))
        translation = rng.normal(size=3)
        target = scale * source @ rotation.T + translation
        target += 1e-9 * rng.normal(size=target.shape)
        result = procrustes_align(source, target)
        worst_residual = max(worst_residual, result.residual)

    positions = rng.normal(size=(20, 8, 3))
    rotation = axis_angle_to_matrix(rng.normal(size=3))
    moved = 1.3 * positions @ rotation.T + rng.normal(size=3)
    self_err = pa_mpjpe_positions(positions, moved)

    _criterion(
        3,
        "Procrustes oracle",
        worst_residual <= 1e-6 and self_err <= 1e-6,
        f"100 sets, worst residual {worst_residual:.2e} (tol 1e-6); "
        f"self PA-MPJPE {self_err:.2e} (tol 1e-6)",
    )


# -- criterion 4: Frechet distance sanity --------------------------------------------


def test_criterion_04_frechet_closed_forms():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(50, 4))
    stats = GaussianStats(x.mean(axis=0), np.cov(x, rowvar=False))
    self_fd = abs(frechet_distance(stats, stats))

    scalar = abs(
        frechet_distance(
            GaussianStats(np.array([0.0]), np.array([[4.0]])),
            GaussianStats(np.array([1.0]), np.array([[1.0]])),
        )
        - 2.0
    )
    commuting = abs(
        frechet_distance(
            GaussianStats(np.zeros(2), np.diag([4.0, 1.0])),
            GaussianStats(np.zeros(2), np.diag([1.0, 1.0])),
        )
        - 1.0
    )
    _criterion(
        4,
        "Frechet sanity",
        self_fd <= 1e-6 and scalar <= 1e-9 and commuting <= 1e-9,
        f"|FD(A,A)| {self_fd:.2e} (tol 1e-6); scalar dev {scalar:.2e}, "
        f"commuting dev {commuting:.2e} (tol 1e-9)",
    )


# -- criterion 5: formula fidelity ---------------------------------------------------


def test_criterion_05_formula_fidelity():
    # P: relative error reduction, held to exact float equality.
    p_ok = (
        improvement_percent(10.0, min(8.0, 6.0)) == (10.0 - 6.0) / 10.0 * 100.0
        and improvement_percent(4.0, 1.0) == 75.0
        and improvement_percent(10.0, 10.0) == 0.0
        and improvement_percent(10.0, 0.0) == 100.0
        and improvement_percent(10.0, 15.0) == -50.0
    )
    # F: same arithmetic applied to exactly representable Frechet distances.
    f_ok = improvement_percent(9.0, 1.0) == (9.0 - 1.0) / 9.0 * 100.0

    span_ok = True
    for alpha, t_len, expected in SPAN_LENGTH_CASES:
        length = max(2, int(np.floor(alpha * t_len)))
        span = make_span(t_len // 2, t_len, alpha)
        derived_half = length // 2
        if length != expected or span.lo != t_len // 2 - derived_half:
            span_ok = False
    table = ", ".join(f"({a},{t})->{e}" for a, t, e in SPAN_LENGTH_CASES[:3])
    _criterion(
        5,
        "formula fidelity",
        p_ok and f_ok and span_ok,
        f"P/F hand arithmetic exact: {p_ok and f_ok}; span table "
        f"{len(SPAN_LENGTH_CASES)} cases ({table}, ...): {span_ok}",
    )


# -- criterion 6: tokenizer training ---------------------------------------------------


def test_criterion_06_tokenizer_training(desk_run):
    t0 = time.perf_counter()
    log_rows = [
        json.loads(line)
        for line in (desk_run.paths.logs_dir / "tokenizer.jsonl").read_text().splitlines()
    ]
    recon_ratio = log_rows[-1]["recon"] / log_rows[0]["recon"]
    min_util = min(log_rows[-1]["utilization"])

    tokenizer = PoseTokenizer.load(desk_run.paths.tokenizer_file)
    skeleton = read_skeleton(desk_run.paths.corpus / "skeleton.json")
    experts = [
        read_clip(p) for p in sorted((desk_run.paths.corpus / "experts").glob("*.json"))
    ]
    errs, disps = [], []
    for clip in experts:
        recon = tokenizer.reconstruct(clip)
        pos_a = forward_kinematics(clip, skeleton)
        pos_b = forward_kinematics(recon, skeleton)
        errs.append(float(np.linalg.norm(pos_a - pos_b, axis=-1).mean()))
        disps.append(mean_interframe_displacement(clip, skeleton))
    mpjpe = float(np.mean(errs))
    disp = float(np.mean(disps))
    elapsed = desk_run.times["train-tokenizer"] + (time.perf_counter() - t0)

    _criterion(
        6,
        "tokenizer training",
        len(experts) == 512
        and recon_ratio < 0.25
        and mpjpe <= 0.10 * disp
        and min_util >= 0.50
        and elapsed <= 1800.0,
        f"{len(experts)} clips; final/first recon {recon_ratio:.4f} (<0.25); "
        f"recon MPJPE {mpjpe:.4f} vs 10% disp {0.10 * disp:.4f}; "
        f"min book utilization {min_util:.2f} (>=0.50); {elapsed:.0f}s (budget 1800s)",
    )


# -- criterion 7: infiller training ----------------------------------------------------


def test_criterion_07_infiller_heldout_recovery(desk_run):
    t0 = time.perf_counter()
    tokenizer = PoseTokenizer.load(desk_run.paths.tokenizer_file)
    infiller = MotionInfiller.load(desk_run.paths.infiller_file)
    skeleton = read_skeleton(desk_run.paths.corpus / "skeleton.json")
    heldout = [
        read_clip(p) for p in sorted((desk_run.paths.corpus / "heldout").glob("*.json"))
    ]
    spec = desk_run.config.make_signal_spec()
    token_seqs = tokenizer.transform(heldout)
    spans = [
        make_span(
            select_peak(compute_signal(clip, skeleton, spec)),
            clip.num_frames,
            desk_run.config.alpha_train,
        )
        for clip in heldout
    ]
    accuracy = infiller.masked_accuracy(token_seqs, spans)
    chance = 1.0 / infiller.codes_per_book
    elapsed = desk_run.times["train-infiller"] + (time.perf_counter() - t0)

    _criterion(
        7,
        "infiller heldout recovery",
        bool(np.all(accuracy >= 5.0 * chance)) and elapsed <= 1800.0,
        f"{len(heldout)} held-out clips; per-book top-1 "
        f"{[f'{a:.3f}' for a in accuracy]} vs 5x chance {5.0 * chance:.3f}; "
        f"{elapsed:.0f}s (budget 1800s)",
    )


# -- criterion 8: end-to-end benchmark ---------------------------------------------------


def test_criterion_08_end_to_end_benchmark(desk_run):
    report = desk_run.report
    manifest = json.loads(desk_run.paths.pairs_file.read_text())
    num_pairs = len(report["per_pair"])

    preserved = True
    for entry in manifest:
        novice = read_clip(desk_run.root / entry["novice"])
        clip_id = Path(entry["novice"]).stem
        lo, hi = entry["span"]["lo"], entry["span"]["hi"]
        outside = np.ones(novice.num_frames, dtype=bool)
        outside[lo : hi + 1] = False
        for j in range(desk_run.config.num_edits):
            edit = read_clip(desk_run.paths.edits_dir / f"{clip_id}_edit{j}.json")
            if not (
                np.array_equal(edit.data[:, :6], novice.data[:, :6])
                and np.array_equal(edit.data[outside], novice.data[outside])
            ):
                preserved = False

    _criterion(
        8,
        "end-to-end benchmark",
        num_pairs >= 100
        and report["P"] >= 20.0
        and report["F"] >= 20.0
        and preserved,
        f"P {report['P']:.2f}% and F {report['F']:.2f}% (>=20%) over "
        f"{num_pairs} pairs (>=100); root/outside-span bitwise preservation: "
        f"{preserved}",
    )


# -- criterion 9: scaling sweep -----------------------------------------------------------


def test_criterion_09_scaling_with_training_data(desk_run, fraction_report):
    full_p, full_f = desk_run.report["P"], desk_run.report["F"]
    frac_p, frac_f = fraction_report["P"], fraction_report["F"]
    _criterion(
        9,
        "scaling sweep",
        full_p > frac_p and full_f > frac_f,
        f"P {frac_p:.2f}% -> {full_p:.2f}% and F {frac_f:.2f}% -> {full_f:.2f}% "
        f"from train_fraction 0.3 -> 1.0",
    )


# -- criterion 10: determinism ---------------------------------------------------------------


def test_criterion_10_byte_identical_reports(desk_run, desk_rerun):
    bytes_a = desk_run.paths.report_file.read_bytes()
    bytes_b = desk_rerun.report_file.read_bytes()
    _criterion(
        10,
        "determinism",
        bytes_a == bytes_b,
        f"two full runs, identical config and seeds: report bytes equal "
        f"({len(bytes_a)} bytes)",
    )
