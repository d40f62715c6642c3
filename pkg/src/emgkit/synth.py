"""Synthetic sEMG trials with known activity boundaries.

Each channel is baseline white noise, plus band-shaped Gaussian noise under
a trapezoidal envelope, plus a 50 Hz mains hum. The eight class profiles
differ in per-channel gain and spectral centre. A7 sits close to A3 and
A8 close to A4, so those pairs are the hardest to tell apart.

The burst spectrum leaves a gap of ``mains_gap_hz`` around every mains
harmonic the default notch chain removes. Without it, zero-phase notching
strips the burst's own mains-band content, and that component rings for
hundreds of milliseconds before onset and after offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import ALL_LABELS, ClassLabel, Recording, default_channel_ids, save_recording, write_manifest
from .errors import ParameterError

BAND_LOW_HZ, BAND_HIGH_HZ = 20.0, 450.0


@dataclass(frozen=True)
class Envelope:
    onset_s: float = 0.5
    rise_ms: float = 40.0
    hold_s: float = 1.4
    fall_ms: float = 40.0

    @property
    def active_s(self) -> float:
        return self.rise_ms / 1000 + self.hold_s + self.fall_ms / 1000


@dataclass(frozen=True)
class ChannelProfile:
    gain: float
    spectral_center_hz: float
    spectral_width_hz: float = 40.0


@dataclass(frozen=True)
class ClassProfile:
    channels: tuple[ChannelProfile, ...]
    envelope: Envelope


def _profile(gains, centers, hold_s):
    return ClassProfile(tuple(ChannelProfile(g, f) for g, f in zip(gains, centers)),
                        Envelope(hold_s=hold_s))


# (gain ch1..ch3), (centre ch1..ch3), hold
DEFAULT_PROFILES: dict[ClassLabel, ClassProfile] = {
    ClassLabel.A1: _profile((1.00, 0.35, 0.50), (70, 150, 120), 1.30),
    ClassLabel.A2: _profile((0.35, 1.00, 0.50), (150, 70, 120), 1.50),
    ClassLabel.A3: _profile((1.00, 1.00, 0.60), (110, 110, 100), 1.40),
    ClassLabel.A4: _profile((0.60, 0.60, 0.80), (200, 200, 160), 1.50),
    ClassLabel.A5: _profile((1.00, 0.35, 0.40), (180, 90, 140), 1.35),
    ClassLabel.A6: _profile((0.35, 1.00, 0.70), (90, 200, 110), 1.25),
    ClassLabel.A7: _profile((0.89, 1.09, 0.60), (119, 104, 100), 1.42),
    ClassLabel.A8: _profile((0.66, 0.54, 0.80), (189, 213, 160), 1.48),
}


@dataclass(frozen=True)
class SynthSpec:
    n_channels: int = 3
    sample_rate_hz: float = 2000.0
    trial_duration_s: float = 3.0
    class_profiles: Mapping[ClassLabel, ClassProfile] = field(default_factory=lambda: dict(DEFAULT_PROFILES))
    amplitude_v: float = 3e-4          # burst RMS for gain 1
    hum_amplitude: float = 1e-5        # 50 Hz peak amplitude, volts
    baseline_noise_rms: float = 3e-5
    gain_jitter: float = 0.15          # log-normal sigma, whole trial
    channel_gain_jitter: float = 0.07  # log-normal sigma, per channel
    center_jitter: float = 0.04        # relative sigma of spectral centres
    onset_jitter_s: float = 0.1
    hold_jitter_s: float = 0.1
    mains_gap_hz: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if self.n_channels < 1 or self.sample_rate_hz <= 0 or self.trial_duration_s <= 0:
            raise ParameterError("invalid synth geometry")
        for label, prof in self.class_profiles.items():
            if len(prof.channels) < self.n_channels:
                raise ParameterError(f"profile {label} defines fewer than {self.n_channels} channels")
            env = prof.envelope
            lo = env.active_s - self.hold_jitter_s
            hi = env.active_s + self.hold_jitter_s
            if not (1.0 < lo and hi < 2.0):
                raise ParameterError(f"profile {label}: active length must stay within (1 s, 2 s)")
            if env.onset_s - self.onset_jitter_s < 0.3:
                raise ParameterError(f"profile {label}: onset leaves no rest interval")
            if env.onset_s + self.onset_jitter_s + hi > self.trial_duration_s - 0.2:
                raise ParameterError(f"profile {label}: activity does not fit in the trial")
            for ch in prof.channels:
                if not BAND_LOW_HZ <= ch.spectral_center_hz <= BAND_HIGH_HZ:
                    raise ParameterError(f"profile {label}: spectral centre outside 20-450 Hz")


@dataclass(frozen=True)
class SynthTrial:
    recording: Recording
    true_segment: tuple[int, int]
    label: ClassLabel


def band_noise(rng, n: int, fs: float, center: float, width: float,
               mains_gap_hz: float = 8.0, mains_hz: float = 50.0) -> np.ndarray:
    """Unit-RMS Gaussian noise with a Gaussian spectral bump, zero outside 20-450 Hz.

    With ``mains_gap_hz > 0`` the spectrum is also zeroed within that distance
    of every multiple of ``mains_hz``.
    """
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, 1 / fs)
    shape = np.exp(-0.5 * ((f - center) / width) ** 2)
    shape[(f < BAND_LOW_HZ) | (f > BAND_HIGH_HZ)] = 0.0
    if mains_gap_hz > 0:
        off = np.abs(f - mains_hz * np.round(f / mains_hz))
        shape[off < mains_gap_hz] = 0.0
    x = np.fft.irfft(spec * shape, n)
    rms = math.sqrt(float(np.mean(x * x)))
    return x / rms if rms > 0 else x


def trapezoid(n: int, fs: float, s: int, rise: int, hold: int, fall: int) -> np.ndarray:
    env = np.zeros(n)
    idx = np.arange(n)
    if rise:
        r = (idx >= s) & (idx < s + rise)
        env[r] = 0.5 - 0.5 * np.cos(np.pi * (idx[r] - s + 0.5) / rise)
    env[(idx >= s + rise) & (idx < s + rise + hold)] = 1.0
    if fall:
        e0 = s + rise + hold
        d = (idx >= e0) & (idx < e0 + fall)
        env[d] = 0.5 + 0.5 * np.cos(np.pi * (idx[d] - e0 + 0.5) / fall)
    return env


def generate_trial(spec: SynthSpec, label: ClassLabel, seed: int) -> SynthTrial:
    """One trial; bit-identical for identical ``(spec, label, seed)``."""
    label = ClassLabel(label)
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, label.index])
    fs = spec.sample_rate_hz
    n = int(round(spec.trial_duration_s * fs))
    prof = spec.class_profiles[label]
    env = prof.envelope
    onset = env.onset_s + rng.uniform(-spec.onset_jitter_s, spec.onset_jitter_s)
    hold = env.hold_s + rng.uniform(-spec.hold_jitter_s, spec.hold_jitter_s)
    s = int(round(onset * fs))
    rise = int(round(env.rise_ms * fs / 1000))
    fall = int(round(env.fall_ms * fs / 1000))
    hold_n = int(round(hold * fs))
    e = s + rise + hold_n + fall
    shape = trapezoid(n, fs, s, rise, hold_n, fall)
    global_gain = math.exp(spec.gain_jitter * rng.standard_normal())
    t = np.arange(n) / fs
    out = np.zeros((spec.n_channels, n))
    for j in range(spec.n_channels):
        ch = prof.channels[j]
        g = ch.gain * global_gain * math.exp(spec.channel_gain_jitter * rng.standard_normal())
        fc = ch.spectral_center_hz * (1 + spec.center_jitter * rng.standard_normal())
        fc = min(max(fc, BAND_LOW_HZ), BAND_HIGH_HZ)
        burst = band_noise(rng, n, fs, fc, ch.spectral_width_hz, spec.mains_gap_hz)
        base = rng.standard_normal(n)
        phase = rng.uniform(0, 2 * np.pi)
        out[j] = (spec.amplitude_v * g * shape * burst
                  + spec.baseline_noise_rms * base
                  + spec.hum_amplitude * np.sin(2 * np.pi * 50.0 * t + phase))
    rec = Recording(fs, default_channel_ids(spec.n_channels), out, label)
    return SynthTrial(rec, (s, e), label)


def trial_seed(root_seed: int, label: ClassLabel, index: int) -> int:
    """Schedule-independent per-trial seed derived from the corpus seed."""
    ss = np.random.SeedSequence([int(root_seed), ClassLabel(label).index, int(index)])
    return int(ss.generate_state(1)[0])


def generate_corpus(spec: SynthSpec, trials_per_class: int, out_dir, seed: int | None = None,
                    threads: int = 1) -> Path:
    """Write ``trials_per_class * 8`` CSV trials, ``manifest.txt`` and ``ground_truth.csv``.

    Returns the manifest path.
    """
    if trials_per_class < 2:
        raise ParameterError("trials_per_class must be >= 2")
    seed = spec.seed if seed is None else seed
    out = Path(out_dir)
    try:
        (out / "trials").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create corpus directory {out}: {exc}") from exc
    jobs = [(label, i) for i in range(trials_per_class) for label in ALL_LABELS]

    def make(job):
        label, i = job
        trial = generate_trial(spec, label, trial_seed(seed, label, i))
        rel = f"trials/{label.value}_{i:03d}.csv"
        save_recording(trial.recording, out / rel)
        return rel, trial

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            done = list(ex.map(make, jobs))
    else:
        done = [make(j) for j in jobs]
    write_manifest([(rel, t.label) for rel, t in done], out / "manifest.txt")
    lines = ["trial,s_true,e_true,label"]
    lines += [f"{rel},{t.true_segment[0]},{t.true_segment[1]},{t.label.value}" for rel, t in done]
    (out / "ground_truth.csv").write_text("\n".join(lines) + "\n")
    return out / "manifest.txt"


def load_ground_truth(path) -> dict[str, tuple[int, int]]:
    rows = Path(path).read_text().strip().splitlines()[1:]
    out = {}
    for row in rows:
        trial, s, e, _ = row.split(",")
        out[trial] = (int(s), int(e))
    return out


def with_overrides(spec: SynthSpec, **kw) -> SynthSpec:
    return replace(spec, **kw)
