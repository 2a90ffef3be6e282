"""Synthetic technique benchmark: corpus structure and ground-truth pairing."""

import numpy as np
import pytest

from motiontune import (
    KinematicSignalSpec,
    SyntheticTechniqueSpec,
    compute_signal,
    generate_corpus,
    make_span,
    select_peak,
)
from motiontune.synth import (
    add_span_noise,
    build_clip,
    corrupt_expert,
    draw_latents,
    shift_clip,
    technique_template,
)


@pytest.fixture(scope="module")
def small_corpus():
    spec = SyntheticTechniqueSpec()
    return generate_corpus(
        spec, num_experts=24, num_heldout=6, num_train_novices=10, num_eval_novices=8, seed=0
    )


def test_corpus_sizes_honored(small_corpus):
    assert len(small_corpus.experts) == 24
    assert len(small_corpus.heldout_experts) == 6
    assert len(small_corpus.train_novices) == 10
    assert len(small_corpus.eval_novices) == 8


def test_clip_shapes_and_metadata(small_corpus):
    for clip in small_corpus.experts:
        assert clip.num_frames == 64
        assert clip.num_joints == 8
        assert clip.fps == 30.0
        assert "peak_frame" in clip.metadata
        assert np.all(np.isfinite(clip.data))


def test_pairing_recorded(small_corpus):
    expert_names = {c.metadata["name"] for c in small_corpus.experts}
    pairing = small_corpus.pairing
    assert len(pairing) == 18
    assert set(pairing.values()) <= expert_names
    for novice in small_corpus.train_novices + small_corpus.eval_novices:
        assert pairing[novice.metadata["name"]] == novice.metadata["source_expert"]


def test_novice_equals_source_outside_window_before_jitter():
    spec = SyntheticTechniqueSpec(timing_jitter=0)
    corpus = generate_corpus(
        spec, num_experts=8, num_heldout=2, num_train_novices=6, num_eval_novices=4, seed=1
    )
    by_name = {c.metadata["name"]: c for c in corpus.experts}
    for novice in corpus.train_novices + corpus.eval_novices:
        source = by_name[novice.metadata["source_expert"]]
        center = novice.metadata["noise_center"]
        outside = np.abs(np.arange(64) - center) > spec.noise_halfwidth
        np.testing.assert_array_equal(novice.data[outside], source.data[outside])
        assert np.any(novice.data[~outside] != source.data[~outside])


def test_designed_peak_is_detected(small_corpus):
    signal_spec = KinematicSignalSpec()
    hits = 0
    for clip in small_corpus.experts:
        t = select_peak(compute_signal(clip, small_corpus.skeleton, signal_spec))
        if abs(t - clip.metadata["peak_frame"]) <= 2.0:
            hits += 1
    assert hits >= 0.95 * len(small_corpus.experts)


def test_noise_window_sits_inside_default_span(small_corpus):
    signal_spec = KinematicSignalSpec()
    spec = small_corpus.spec
    for novice in small_corpus.eval_novices:
        t = select_peak(compute_signal(novice, small_corpus.skeleton, signal_spec))
        span = make_span(t, novice.num_frames, 0.3)
        c = novice.metadata["noise_center"]
        assert span.lo <= c - spec.noise_halfwidth
        assert c + spec.noise_halfwidth <= span.hi


def test_generation_is_deterministic():
    spec = SyntheticTechniqueSpec()
    a = generate_corpus(spec, num_experts=4, num_heldout=2, num_train_novices=2,
                        num_eval_novices=2, seed=5)
    b = generate_corpus(spec, num_experts=4, num_heldout=2, num_train_novices=2,
                        num_eval_novices=2, seed=5)
    for ca, cb in zip(a.experts + a.eval_novices, b.experts + b.eval_novices):
        np.testing.assert_array_equal(ca.data, cb.data)
        assert ca.metadata == cb.metadata
    c = generate_corpus(spec, num_experts=4, num_heldout=2, num_train_novices=2,
                        num_eval_novices=2, seed=6)
    assert np.any(c.experts[0].data != a.experts[0].data)


def test_latents_respect_bands():
    spec = SyntheticTechniqueSpec(amp_band=0.2, phase_band=0.5, freq_band=0.1, burst_band=0.05)
    rng = np.random.default_rng(0)
    for _ in range(200):
        lat = draw_latents(spec, rng)
        assert 0.8 <= lat.amp_scale <= 1.2
        assert 0.0 <= lat.phase <= 0.5
        assert spec.base_frequency * 0.9 <= lat.freq <= spec.base_frequency * 1.1
        assert 0.95 <= lat.burst_scale <= 1.05
        assert abs(lat.peak_frame - spec.peak_phase * 63) <= spec.peak_jitter


def test_shift_clip_moves_frames_bitwise():
    spec = SyntheticTechniqueSpec()
    template = technique_template(spec, 8)
    lat = draw_latents(spec, np.random.default_rng(0))
    from motiontune.motion import default_humanoid

    clip = build_clip(spec, template, lat, default_humanoid(), "c")
    shifted = shift_clip(clip, 1)
    np.testing.assert_array_equal(shifted.data[:-1], clip.data[1:])
    np.testing.assert_array_equal(shifted.data[-1], clip.data[-1])
    assert shifted.metadata["time_shift"] == 1
    assert shifted.metadata["peak_frame"] == pytest.approx(clip.metadata["peak_frame"] - 1)
    back = shift_clip(clip, 0)
    np.testing.assert_array_equal(back.data, clip.data)


def test_add_span_noise_requires_peak():
    from conftest import make_clip

    clip = make_clip(np.zeros((16, 30)))
    with pytest.raises(ValueError, match="peak_frame"):
        add_span_noise(SyntheticTechniqueSpec(), clip, np.random.default_rng(0))


def test_spec_validation():
    with pytest.raises(ValueError, match="num_frames"):
        SyntheticTechniqueSpec(num_frames=4)
    with pytest.raises(ValueError, match="peak_phase"):
        SyntheticTechniqueSpec(peak_phase=1.0)
    with pytest.raises(ValueError, match="does not fit"):
        SyntheticTechniqueSpec(num_frames=9, noise_halfwidth=5)
    with pytest.raises(ValueError, match="timing_jitter"):
        SyntheticTechniqueSpec(timing_jitter=-1)
    with pytest.raises(ValueError, match="phase_band"):
        SyntheticTechniqueSpec(phase_band=1.5)


def test_template_depends_only_on_template_seed():
    spec_a = SyntheticTechniqueSpec(template_seed=3)
    spec_b = SyntheticTechniqueSpec(template_seed=3, base_frequency=9.9)
    ta = technique_template(spec_a, 8)
    tb = technique_template(spec_b, 8)
    np.testing.assert_array_equal(ta["axes"], tb["axes"])
    np.testing.assert_array_equal(ta["burst"], tb["burst"])
    tc = technique_template(SyntheticTechniqueSpec(template_seed=4), 8)
    assert np.any(tc["axes"] != ta["axes"])


def test_corrupt_expert_records_source(small_corpus):
    spec = small_corpus.spec
    expert = small_corpus.experts[0]
    novice = corrupt_expert(spec, expert, np.random.default_rng(9), "nov")
    assert novice.metadata["name"] == "nov"
    assert novice.metadata["source_expert"] == expert.metadata["name"]
    assert abs(novice.metadata["time_shift"]) <= spec.timing_jitter
