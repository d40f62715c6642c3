"""Per-channel time- and frequency-domain sEMG features.

The default catalogue has 17 time-domain and 5 frequency-domain features,
evaluated on two channels for a 44-value vector. Count-type features
(ZC, SSC, WAMP, MYOP) use an amplitude threshold of
``threshold_fraction * RMS`` of the channel, which makes them gain-invariant.

Frequency features use the one-sided periodogram of the mean-removed
segment with a rectangular window and no zero padding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import FeatureMatrix, Recording
from .errors import ConfigError, LengthError
from .filtering import power_spectrum

MIN_SEGMENT_SAMPLES = 64
DEFAULT_THRESHOLD_FRACTION = 0.05


class _Ctx:
    """Lazily computed quantities shared by the features of one channel."""

    def __init__(self, x: np.ndarray, fs: float):
        self.x = x
        self.fs = fs
        self._spec = None

    @property
    def rms(self) -> float:
        return math.sqrt(float(np.mean(self.x * self.x)))

    @property
    def spectrum(self):
        if self._spec is None:
            self._spec = power_spectrum(self.x, self.fs)
        return self._spec

    def threshold(self, params) -> float:
        return params.get("threshold_fraction", DEFAULT_THRESHOLD_FRACTION) * self.rms


def _mav(c, p):
    return float(np.mean(np.abs(c.x)))


def _rms(c, p):
    return c.rms


def _var(c, p):
    # EMG convention: zero-mean assumption, N - 1 normalisation
    return float(np.sum(c.x * c.x) / (len(c.x) - 1))


def _sd(c, p):
    return float(np.std(c.x, ddof=1))


def _wl(c, p):
    return float(np.sum(np.abs(np.diff(c.x))))


def _zc(c, p):
    x, thr = c.x, c.threshold(p)
    a, b = x[:-1], x[1:]
    return float(np.count_nonzero((a * b < 0) & (np.abs(a - b) >= thr)))


def _ssc(c, p):
    x, thr = c.x, c.threshold(p)
    left = x[1:-1] - x[:-2]
    right = x[1:-1] - x[2:]
    big = np.maximum(np.abs(left), np.abs(right)) >= thr
    return float(np.count_nonzero((left * right > 0) & big))


def _wamp(c, p):
    return float(np.count_nonzero(np.abs(np.diff(c.x)) > c.threshold(p)))


def _iemg(c, p):
    return float(np.sum(np.abs(c.x)))


def _log(c, p):
    a = np.abs(c.x)
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    return float(np.exp(np.mean(np.log(a))))


def _dasdv(c, p):
    d = np.diff(c.x)
    return float(np.sqrt(np.sum(d * d) / (len(c.x) - 1)))


def _ssi(c, p):
    return float(np.sum(c.x * c.x))


def _myop(c, p):
    return float(np.mean(np.abs(c.x) > c.threshold(p)))


def _aac(c, p):
    return float(np.sum(np.abs(np.diff(c.x))) / len(c.x))


def _central_moments(x):
    d = x - x.mean()
    return float(np.mean(d * d)), float(np.mean(d ** 3)), float(np.mean(d ** 4))


def _skew(c, p):
    m2, m3, _ = _central_moments(c.x)
    return m3 / m2 ** 1.5 if m2 > 0 else 0.0


def _kurt(c, p):
    m2, _, m4 = _central_moments(c.x)
    return m4 / (m2 * m2) if m2 > 0 else 0.0


def _tm3(c, p):
    return float(abs(np.mean(c.x ** 3)))


def _mnf(c, p):
    f, s = c.spectrum
    tot = s.sum()
    return float(np.sum(f * s) / tot) if tot > 0 else 0.0


def _mdf(c, p):
    f, s = c.spectrum
    tot = s.sum()
    if tot <= 0:
        return 0.0
    k = int(np.searchsorted(np.cumsum(s), 0.5 * tot))
    return float(f[min(k, len(f) - 1)])


def _pkf(c, p):
    f, s = c.spectrum
    return float(f[int(np.argmax(s))])


def _mnp(c, p):
    return float(np.mean(c.spectrum[1]))


def _ttp(c, p):
    return float(np.sum(c.spectrum[1]))


@dataclass(frozen=True)
class FeatureDefinition:
    """One named feature.

    ``scaling`` declares how the value responds to ``x -> a*x`` with
    ``a > 0``: ``"invariant"``, or ``"power:k"`` meaning it scales as ``a**k``.
    """

    name: str
    domain: str
    scaling: str
    parameters: Mapping[str, float] = field(default_factory=dict)

    def compute(self, ctx: _Ctx) -> float:
        return _FUNCS[self.name](ctx, self.parameters)

    @property
    def scale_power(self) -> int:
        return 0 if self.scaling == "invariant" else int(self.scaling.split(":")[1])


_FUNCS: dict[str, Callable] = {
    "MAV": _mav, "RMS": _rms, "VAR": _var, "SD": _sd, "WL": _wl, "ZC": _zc, "SSC": _ssc,
    "WAMP": _wamp, "IEMG": _iemg, "LOG": _log, "DASDV": _dasdv, "SSI": _ssi, "MYOP": _myop,
    "AAC": _aac, "SKEW": _skew, "KURT": _kurt, "TM3": _tm3,
    "MNF": _mnf, "MDF": _mdf, "PKF": _pkf, "MNP": _mnp, "TTP": _ttp,
}

_CATALOGUE = [
    ("MAV", "time", "power:1"), ("RMS", "time", "power:1"), ("VAR", "time", "power:2"),
    ("SD", "time", "power:1"), ("WL", "time", "power:1"), ("ZC", "time", "invariant"),
    ("SSC", "time", "invariant"), ("WAMP", "time", "invariant"), ("IEMG", "time", "power:1"),
    ("LOG", "time", "power:1"), ("DASDV", "time", "power:1"), ("SSI", "time", "power:2"),
    ("MYOP", "time", "invariant"), ("AAC", "time", "power:1"), ("SKEW", "time", "invariant"),
    ("KURT", "time", "invariant"), ("TM3", "time", "power:3"),
    ("MNF", "frequency", "invariant"), ("MDF", "frequency", "invariant"),
    ("PKF", "frequency", "invariant"), ("MNP", "frequency", "power:2"),
    ("TTP", "frequency", "power:2"),
]
_THRESHOLDED = {"ZC", "SSC", "WAMP", "MYOP"}

FEATURE_NAMES: tuple[str, ...] = tuple(n for n, _, _ in _CATALOGUE)


def default_definitions(threshold_fraction: float = DEFAULT_THRESHOLD_FRACTION,
                        names: Sequence[str] | None = None) -> list[FeatureDefinition]:
    """Feature definitions in catalogue order, optionally restricted to ``names``."""
    wanted = FEATURE_NAMES if names is None else tuple(names)
    unknown = [n for n in wanted if n not in _FUNCS]
    if unknown:
        raise ConfigError(f"unknown feature name(s): {', '.join(unknown)}")
    if len(set(wanted)) != len(wanted):
        raise ConfigError("feature names must be unique")
    info = {n: (d, s) for n, d, s in _CATALOGUE}
    return [FeatureDefinition(n, info[n][0], info[n][1],
                              {"threshold_fraction": threshold_fraction} if n in _THRESHOLDED else {})
            for n in wanted]


def feature_names(channels: Sequence[int], defs: Sequence[FeatureDefinition]) -> list[str]:
    return [f"ch{j}_{d.name}" for j in channels for d in defs]


def extract_features(seg: Recording, channels: Sequence[int] = (1, 2),
                     defs: Sequence[FeatureDefinition] | None = None) -> dict[str, float]:
    """Feature vector of a segment, channel-major, as an ordered name -> value dict.

    ``channels`` are 1-based channel indices.
    """
    defs = default_definitions() if defs is None else defs
    for d in defs:
        if d.name not in _FUNCS:
            raise ConfigError(f"unknown feature {d.name!r}")
    if seg.n_samples < MIN_SEGMENT_SAMPLES:
        raise LengthError(f"segment of {seg.n_samples} samples; need at least {MIN_SEGMENT_SAMPLES}")
    bad = [j for j in channels if not 1 <= j <= seg.n_channels]
    if bad:
        raise ConfigError(f"channel(s) {bad} not present in a {seg.n_channels}-channel recording")
    out = {}
    for j in channels:
        ctx = _Ctx(seg.samples[j - 1], seg.sample_rate_hz)
        for d in defs:
            out[f"ch{j}_{d.name}"] = d.compute(ctx)
    return out


def build_feature_matrix(vectors: Sequence[dict], labels) -> FeatureMatrix:
    names = tuple(vectors[0])
    values = np.array([[v[n] for n in names] for v in vectors])
    return FeatureMatrix(names, values, tuple(labels))
