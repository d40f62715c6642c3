import numpy as np
import pytest
from sklearn.metrics import silhouette_score

from emgkit.config import PipelineConfig
from emgkit.core import ALL_LABELS, ClassLabel, load_manifest, load_recording
from emgkit.errors import ParameterError
from emgkit.filtering import apply_chain
from emgkit.pipeline import trial_features
from emgkit.segmentation import Segment
from emgkit.synth import (DEFAULT_PROFILES, Envelope, SynthSpec, band_noise, generate_corpus,
                          generate_trial, load_ground_truth, trial_seed, with_overrides)


def silent_spec():
    profiles = {lab: type(p)(tuple(type(c)(0.0, c.spectral_center_hz) for c in p.channels), p.envelope)
                for lab, p in DEFAULT_PROFILES.items()}
    return SynthSpec(class_profiles=profiles, hum_amplitude=0.0, baseline_noise_rms=0.0)


def test_zero_spec_gives_zero_recording():
    assert not np.any(generate_trial(silent_spec(), ClassLabel.A3, 5).recording.samples)


def test_trials_are_deterministic():
    spec = SynthSpec()
    a = generate_trial(spec, ClassLabel.A5, 11)
    b = generate_trial(spec, ClassLabel.A5, 11)
    c = generate_trial(spec, ClassLabel.A5, 12)
    assert np.array_equal(a.recording.samples, b.recording.samples)
    assert a.true_segment == b.true_segment
    assert not np.array_equal(a.recording.samples, c.recording.samples)


def test_geometry_and_length_gate():
    spec = SynthSpec()
    for i, lab in enumerate(ALL_LABELS):
        t = generate_trial(spec, lab, i)
        assert t.recording.samples.shape == (3, 6000) and t.recording.sample_rate_hz == 2000
        assert t.label == lab == t.recording.trial_label
        s, e = t.true_segment
        assert 2000 < e - s < 4000


def test_fixed_hold_gives_expected_length():
    env = Envelope(hold_s=1.5)
    profiles = {lab: type(p)(p.channels, env) for lab, p in DEFAULT_PROFILES.items()}
    spec = SynthSpec(class_profiles=profiles, hold_jitter_s=0.0)
    s, e = generate_trial(spec, ClassLabel.A1, 0).true_segment
    assert e - s == 3000 + 80 + 80  # hold + rise + fall


def test_band_noise_is_confined():
    rng = np.random.default_rng(0)
    x = band_noise(rng, 4000, 2000.0, 120, 40)
    f = np.fft.rfftfreq(4000, 1 / 2000)
    p = np.abs(np.fft.rfft(x)) ** 2
    assert np.sqrt(np.mean(x * x)) == pytest.approx(1.0)
    assert p[(f < 20) | (f > 450)].sum() < 1e-20 * p.sum()
    assert p[np.abs(f - 100) < 8].sum() < 1e-20 * p.sum()


def test_active_regions_are_spectrally_confined():
    spec = SynthSpec()
    fractions = []
    for i in range(16):
        t = generate_trial(spec, ALL_LABELS[i % 8], 100 + i)
        s, e = t.true_segment
        seg = t.recording.samples[:, s:e]
        f = np.fft.rfftfreq(seg.shape[1], 1 / 2000)
        p = (np.abs(np.fft.rfft(seg - seg.mean(axis=1, keepdims=True), axis=1)) ** 2).mean(axis=0)
        keep = np.abs(f - 50) > 2
        out = ((f < 20) | (f > 500)) & keep
        fractions.append(p[out].sum() / p[keep].sum())
    assert np.mean(fractions) < 0.05


def test_classes_are_separable():
    spec = SynthSpec()
    cfg = PipelineConfig()
    chain = cfg.filter.chain()
    rows, labels = [], []
    for lab in ALL_LABELS:
        for i in range(12):
            t = generate_trial(spec, lab, trial_seed(3, lab, i))
            rec = apply_chain(chain, t.recording)
            feats = trial_features(rec, Segment(*t.true_segment), cfg)
            rows.append(list(feats.values()))
            labels.append(lab.index)
    X = np.array(rows)
    X = (X - X.min(0)) / np.where(np.ptp(X, 0) > 0, np.ptp(X, 0), 1)
    assert silhouette_score(X, labels) > 0.2


def test_trial_seed_is_schedule_independent():
    assert trial_seed(1, ClassLabel.A2, 3) == trial_seed(1, ClassLabel.A2, 3)
    seeds = {trial_seed(1, lab, i) for lab in ALL_LABELS for i in range(10)}
    assert len(seeds) == 80


def test_corpus_files(tmp_path):
    manifest = generate_corpus(SynthSpec(), 2, tmp_path / "c", seed=1, threads=3)
    m = load_manifest(manifest)
    assert len(m.entries) == 16
    assert sorted(str(p) for p, _ in m.entries)[0] == "trials/A1_000.csv"
    assert len(list((tmp_path / "c" / "trials").glob("*.csv"))) == 16
    truth = load_ground_truth(tmp_path / "c" / "ground_truth.csv")
    assert len(truth) == 16
    rel, lab = m.entries[5]
    ref = generate_trial(SynthSpec(), lab, trial_seed(1, lab, int(str(rel)[-7:-4])))
    assert truth[str(rel)] == ref.true_segment
    rec = load_recording(m.resolve(rel))
    assert np.allclose(rec.samples, ref.recording.samples, rtol=1e-11, atol=0)


def test_corpus_thread_count_and_seeds(tmp_path):
    a = generate_corpus(SynthSpec(), 2, tmp_path / "a", seed=1, threads=1)
    b = generate_corpus(SynthSpec(), 2, tmp_path / "b", seed=1, threads=4)
    c = generate_corpus(SynthSpec(), 2, tmp_path / "c", seed=2)
    assert a.read_text() == b.read_text() == c.read_text()
    for p in sorted((tmp_path / "a" / "trials").iterdir()):
        assert p.read_bytes() == (tmp_path / "b" / "trials" / p.name).read_bytes()
        va = load_recording(p).samples
        vc = load_recording(tmp_path / "c" / "trials" / p.name).samples
        assert not np.intersect1d(va, vc).size


def test_spec_validation(tmp_path):
    with pytest.raises(ParameterError):
        SynthSpec(n_channels=0)
    with pytest.raises(ParameterError, match="1 s, 2 s"):
        with_overrides(SynthSpec(), hold_jitter_s=0.6)
    with pytest.raises(ParameterError):
        generate_corpus(SynthSpec(), 1, tmp_path)
