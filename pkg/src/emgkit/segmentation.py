"""Activity-segment detection by multi-threshold short-time energy.

Energy is pooled over channels in fixed frames; a segment opens when a
frame's energy exceeds the start threshold, closes when it falls below the
stop threshold, and is kept only if its length lies inside the validity band.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Recording
from .errors import InvariantError, LengthError, ParameterError

REFERENCE_RATE_HZ = 2000.0


@dataclass(frozen=True)
class EnergySeries:
    window_len: int
    hop: int
    energies: np.ndarray
    frame_starts: np.ndarray

    def __post_init__(self):
        if np.any(self.energies < 0):
            raise InvariantError("energies must be non-negative")
        if len(self.frame_starts) > 1 and np.any(np.diff(self.frame_starts) != self.hop):
            raise InvariantError("frame starts must advance by the hop")

    def __len__(self):
        return len(self.energies)


@dataclass(frozen=True)
class Thresholds:
    th1: float  # start
    th2: float  # stop

    def __post_init__(self):
        if not (self.th2 > 0 and self.th1 >= self.th2):
            raise InvariantError(
                f"thresholds must satisfy th1 >= th2 > 0, got th1={self.th1}, th2={self.th2}")


@dataclass(frozen=True)
class Segment:
    start: int
    end: int

    def __post_init__(self):
        if not self.end > self.start:
            raise InvariantError(f"segment end {self.end} must exceed start {self.start}")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Candidate:
    """A thresholded interval before the length gate is applied."""

    start: int
    end: int
    accepted: bool

    @property
    def length(self) -> int:
        return self.end - self.start


def short_time_energy(rec: Recording, window_len: int = 32, hop: Optional[int] = None) -> EnergySeries:
    """Mean squared amplitude per frame, averaged over all channels.

    Frames start every ``hop`` samples (default: non-overlapping); a trailing
    partial frame is dropped.
    """
    hop = window_len if hop is None else hop
    if window_len < 1 or hop < 1:
        raise ParameterError("window_len and hop must be >= 1")
    x = rec.samples
    n = x.shape[1]
    if n < window_len:
        raise LengthError(f"signal of {n} samples is shorter than one {window_len}-sample window")
    sq = (x * x).sum(axis=0)
    frames = sliding_window_view(sq, window_len)[::hop]
    energies = frames.sum(axis=1) / (window_len * x.shape[0])
    starts = np.arange(len(energies)) * hop
    return EnergySeries(window_len, hop, energies, starts)


def calibrate_thresholds(energy: EnergySeries, sample_rate_hz: float, rest_s: float = 0.25,
                         k_start: float = 5.0, k_stop: float = 2.0) -> Thresholds:
    """Baseline-relative thresholds from frames inside the initial rest interval.

    ``th1 = mean + k_start * std`` and ``th2 = mean + k_stop * std`` of the
    baseline frame energies.
    """
    if not k_start >= k_stop:
        raise ParameterError("k_start must be >= k_stop")
    limit = rest_s * sample_rate_hz
    mask = energy.frame_starts + energy.window_len <= limit
    if not mask.any():
        raise LengthError(f"rest interval of {rest_s} s holds no complete frame")
    base = energy.energies[mask]
    mu, sd = float(base.mean()), float(base.std())
    tiny = np.finfo(float).tiny
    th2 = max(mu + k_stop * sd, tiny)
    th1 = max(mu + k_start * sd, th2)
    return Thresholds(th1, th2)


def find_candidates(energy: EnergySeries, th: Thresholds, min_len: int, max_len: int) -> list[Candidate]:
    """Run the IDLE/ACTIVE state machine and mark each interval against the gate."""
    if not min_len < max_len:
        raise ParameterError("min_len must be < max_len")
    out = []
    active = False
    s = 0
    for k, (e_k, start) in enumerate(zip(energy.energies, energy.frame_starts)):
        if not active:
            if e_k > th.th1:
                active, s = True, int(start)
        elif e_k < th.th2:
            e = int(start)
            out.append(Candidate(s, e, min_len < e - s < max_len))
            active = False
    if active:
        # close at the end of the last complete frame
        e = int(energy.frame_starts[-1]) + energy.window_len
        out.append(Candidate(s, e, min_len < e - s < max_len))
    return out


def detect_segments(energy: EnergySeries, th: Thresholds, min_len: int = 2000,
                    max_len: int = 4000) -> list[Segment]:
    """Segments whose length L satisfies ``min_len < L < max_len``."""
    return [Segment(c.start, c.end) for c in find_candidates(energy, th, min_len, max_len)
            if c.accepted]


def length_gate(sample_rate_hz: float, min_s: float = 1.0, max_s: float = 2.0) -> tuple[int, int]:
    """Gate bounds in samples; the defaults give 2000 and 4000 at 2000 Hz."""
    return int(round(min_s * sample_rate_hz)), int(round(max_s * sample_rate_hz))


def extract_segment(rec: Recording, seg: Segment) -> Recording:
    if not (0 <= seg.start < seg.end <= rec.n_samples):
        raise IndexError(f"segment [{seg.start}, {seg.end}) outside 0..{rec.n_samples}")
    return rec.with_samples(rec.samples[:, seg.start:seg.end])


@dataclass(frozen=True)
class SegmentationResult:
    thresholds: Thresholds
    candidates: tuple[Candidate, ...]

    @property
    def segments(self) -> list[Segment]:
        return [Segment(c.start, c.end) for c in self.candidates if c.accepted]


def segment_recording(rec: Recording, window_len: int = 32, th: Optional[Thresholds] = None,
                      rest_s: float = 0.25, k_start: float = 5.0, k_stop: float = 2.0,
                      min_s: float = 1.0, max_s: float = 2.0) -> SegmentationResult:
    """Energy, thresholds (calibrated unless given) and gated candidates for one trial."""
    energy = short_time_energy(rec, window_len)
    if th is None:
        th = calibrate_thresholds(energy, rec.sample_rate_hz, rest_s, k_start, k_stop)
    lo, hi = length_gate(rec.sample_rate_hz, min_s, max_s)
    return SegmentationResult(th, tuple(find_candidates(energy, th, lo, hi)))


def pick_segment(segments: list[Segment]) -> Optional[Segment]:
    """The longest accepted segment (earliest on ties), or None."""
    if not segments:
        return None
    return max(segments, key=lambda s: (s.length, -s.start))
