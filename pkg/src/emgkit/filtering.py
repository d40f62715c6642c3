"""Butterworth band-pass / band-stop design and zero-phase application.

Designs go analog prototype -> band transform -> bilinear transform (with
frequency pre-warping) and are stored as cascaded second-order sections.
The sample-by-sample recursion itself is delegated to ``scipy.signal.sosfilt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal as _sig

from .core import Recording
from .errors import ConfigError, InvariantError, LengthError, ParameterError

MAX_ORDER = 16
_POLE_MARGIN = 1e-9
# edge padding covers the slowest pole's decay down to this fraction
PAD_DECAY = 1e-9


@dataclass(frozen=True)
class FilterDesign:
    kind: str
    order: int
    low_hz: float
    high_hz: float
    sample_rate_hz: float


@dataclass(frozen=True)
class IirFilter:
    """Cascade of biquads; each row of ``sections`` is ``(b0, b1, b2, a1, a2)``."""

    sections: np.ndarray
    design_meta: FilterDesign

    def __post_init__(self):
        sec = np.array(self.sections, dtype=float)
        if sec.ndim != 2 or sec.shape[1] != 5:
            raise InvariantError("sections must have shape (n, 5)")
        if not np.all(np.isfinite(sec)):
            raise InvariantError("filter coefficients must be finite")
        sec.setflags(write=False)
        object.__setattr__(self, "sections", sec)
        r = self.max_pole_radius()
        if r >= 1 - _POLE_MARGIN:
            raise InvariantError(f"unstable section: pole radius {r!r}")

    @property
    def sos(self) -> np.ndarray:
        """scipy-style ``(n, 6)`` array with the implicit ``a0 = 1``."""
        s = self.sections
        return np.column_stack([s[:, :3], np.ones(len(s)), s[:, 3:]])

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots([1.0, a1, a2]) for a1, a2 in self.sections[:, 3:]])

    def max_pole_radius(self) -> float:
        return float(np.max(np.abs(self.poles())))

    def frequency_response(self, freqs_hz) -> np.ndarray:
        """Complex response evaluated at the given frequencies."""
        z = np.exp(-1j * 2 * np.pi * np.asarray(freqs_hz, float) / self.design_meta.sample_rate_hz)
        h = np.ones_like(z)
        for b0, b1, b2, a1, a2 in self.sections:
            h = h * (b0 + b1 * z + b2 * z * z) / (1 + a1 * z + a2 * z * z)
        return h

    def pad_length(self, n_samples: int | None = None) -> int:
        """Reflective padding length, at least 3 * (2 * n_sections + 1)."""
        base = 3 * (2 * len(self.sections) + 1)
        decay = math.ceil(math.log(PAD_DECAY) / math.log(self.max_pole_radius()))
        pad = max(base, decay)
        if n_samples is not None:
            pad = min(pad, n_samples - 1)
        return pad


def _prototype_poles(order: int) -> np.ndarray:
    k = np.arange(1, order + 1)
    return np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))


def _pair_conjugates(roots: np.ndarray) -> list[tuple[complex, complex]]:
    """Group roots into conjugate pairs; leftover reals are paired together."""
    tol = 1e-10 * max(1.0, float(np.max(np.abs(roots))))
    cplx = sorted((r for r in roots if r.imag > tol), key=lambda r: (abs(r), r.real))
    reals = sorted(r.real for r in roots if abs(r.imag) <= tol)
    pairs = [(r, r.conjugate()) for r in cplx]
    if len(reals) % 2:
        raise InvariantError("odd number of real roots cannot form biquads")
    pairs += [(complex(reals[i]), complex(reals[i + 1])) for i in range(0, len(reals), 2)]
    return pairs


def design_butterworth(kind: str, order: int, low_hz: float, high_hz: float,
                       sample_rate_hz: float) -> IirFilter:
    """Digital Butterworth band-pass or band-stop filter.

    ``order`` is the analog low-pass prototype order, so the digital filter
    has ``2 * order`` poles, i.e. ``order`` biquad sections.
    """
    if kind not in ("bandpass", "bandstop"):
        raise ParameterError(f"kind must be 'bandpass' or 'bandstop', got {kind!r}")
    if int(order) != order or order < 1:
        raise ParameterError(f"order must be a positive integer, got {order!r}")
    if order > MAX_ORDER:
        raise ParameterError(f"order {order} > {MAX_ORDER} refused (ill-conditioned)")
    fs = float(sample_rate_hz)
    if not (fs > 0 and 0 < low_hz < high_hz < fs / 2):
        raise ParameterError(
            f"band edges must satisfy 0 < low < high < fs/2; got {low_hz}, {high_hz} at fs={fs}")
    order = int(order)
    # pre-warp the band edges so they land exactly after the bilinear map
    wl = 2 * fs * math.tan(math.pi * low_hz / fs)
    wh = 2 * fs * math.tan(math.pi * high_hz / fs)
    bw = wh - wl
    w0sq = wl * wh
    proto = _prototype_poles(order)
    analog = []
    for p in proto:
        if kind == "bandpass":
            # s^2 - p*bw*s + w0^2 = 0
            lin = p * bw
        else:
            # s^2 - (bw/p)*s + w0^2 = 0
            lin = bw / p
        disc = np.sqrt(lin * lin - 4 * w0sq + 0j)
        analog += [(lin + disc) / 2, (lin - disc) / 2]
    analog = np.array(analog)
    digital = (2 * fs + analog) / (2 * fs - analog)

    w0 = 2 * math.atan(math.sqrt(w0sq) / (2 * fs))
    if kind == "bandpass":
        zeros_b = np.array([1.0, 0.0, -1.0])  # zeros at z = +1 and z = -1
        z_ref = np.exp(1j * w0)  # unit gain at the (warped) band center
    else:
        zeros_b = np.array([1.0, -2 * math.cos(w0), 1.0])  # zeros at e^{+-j w0}
        z_ref = 1.0 + 0j  # unit gain at DC

    rows = []
    for p1, p2 in _pair_conjugates(digital):
        a1 = float(-(p1 + p2).real)
        a2 = float((p1 * p2).real)
        num = zeros_b[0] + zeros_b[1] / z_ref + zeros_b[2] / z_ref ** 2
        den = 1 + a1 / z_ref + a2 / z_ref ** 2
        g = 1.0 / abs(num / den)
        rows.append([g * zeros_b[0], g * zeros_b[1], g * zeros_b[2], a1, a2])
    rows = np.array(rows)
    meta = FilterDesign(kind, order, float(low_hz), float(high_hz), fs)
    filt = IirFilter(rows, meta)
    # positive scale factors keep the overall phase; fix a possible sign flip
    if filt.frequency_response([w0 * fs / (2 * math.pi) if kind == "bandpass" else 0.0])[0].real < 0:
        rows[0, :3] *= -1
        filt = IirFilter(rows, meta)
    return filt


def min_filtfilt_length(filt: IirFilter) -> int:
    return 3 * (2 * len(filt.sections) + 1) + 1


def filtfilt(filt: IirFilter, x, axis: int = -1) -> np.ndarray:
    """Zero-phase forward-backward filtering with odd-reflective edge padding.

    Padding extends each end by ``filt.pad_length`` samples (capped at the
    signal length minus one); each pass starts from the section steady
    state scaled by the first sample, as in classical ``filtfilt``.
    """
    x = np.asarray(x, dtype=float)
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    need = min_filtfilt_length(filt)
    if n < need:
        raise LengthError(f"signal of {n} samples is too short; filtfilt needs at least {need}")
    pad = filt.pad_length(n)
    left = 2 * x[..., :1] - x[..., pad:0:-1]
    right = 2 * x[..., -1:] - x[..., -2:-pad - 2:-1]
    ext = np.concatenate([left, x, right], axis=-1)
    sos = filt.sos
    zi = _sig.sosfilt_zi(sos)  # (n_sections, 2)
    zi_shape = (len(sos),) + (1,) * (ext.ndim - 1) + (2,)
    zi = zi.reshape(zi_shape)
    # sosfilt wants zi with shape (n_sections, ..., 2)
    y, _ = _sig.sosfilt(sos, ext, axis=-1, zi=zi * ext[..., :1][None])
    y = y[..., ::-1]
    y, _ = _sig.sosfilt(sos, y, axis=-1, zi=zi * y[..., :1][None])
    y = y[..., ::-1][..., pad:pad + n]
    return np.moveaxis(np.ascontiguousarray(y), -1, axis)


# -- chains ------------------------------------------------------------------------

@dataclass(frozen=True)
class NotchSpec:
    center_hz: float
    half_width_hz: float = 1.0
    order: int = 3


@dataclass(frozen=True)
class FilterChain:
    notches: tuple[IirFilter, ...]
    bandpass: IirFilter | None

    def __post_init__(self):
        centers = [math.sqrt(f.design_meta.low_hz * f.design_meta.high_hz) for f in self.notches]
        if any(b <= a for a, b in zip(centers, centers[1:])):
            raise InvariantError("notch center frequencies must be strictly increasing")
        rates = {f.design_meta.sample_rate_hz for f in self.filters}
        if len(rates) > 1:
            raise InvariantError("all filters in a chain must share one sample rate")

    @property
    def filters(self) -> tuple[IirFilter, ...]:
        return self.notches + ((self.bandpass,) if self.bandpass is not None else ())

    @property
    def sample_rate_hz(self) -> float | None:
        fl = self.filters
        return fl[0].design_meta.sample_rate_hz if fl else None


DEFAULT_NOTCH_CENTERS = tuple(float(c) for c in range(50, 451, 50))


def build_chain(sample_rate_hz: float = 2000.0,
                notches: Sequence[NotchSpec] | None = None,
                band: tuple[float, float] | None = (20.0, 500.0),
                band_order: int = 8) -> FilterChain:
    """Mains-harmonic notches followed by one band-pass.

    Defaults: notches at 50, 100, ..., 450 Hz (+-1 Hz, order 3) and a
    20-500 Hz band-pass of prototype order 8.
    """
    if notches is None:
        notches = [NotchSpec(c) for c in DEFAULT_NOTCH_CENTERS]
    notches = sorted(notches, key=lambda n: n.center_hz)
    designed = tuple(
        design_butterworth("bandstop", n.order, n.center_hz - n.half_width_hz,
                           n.center_hz + n.half_width_hz, sample_rate_hz)
        for n in notches)
    bp = None
    if band is not None:
        bp = design_butterworth("bandpass", band_order, band[0], band[1], sample_rate_hz)
    return FilterChain(designed, bp)


def apply_chain(chain: FilterChain, rec: Recording) -> Recording:
    """Filter every channel through all notches (ascending) then the band-pass."""
    fs = chain.sample_rate_hz
    if fs is not None and abs(fs - rec.sample_rate_hz) > 1e-9 * fs:
        raise ConfigError(
            f"filter chain designed for {fs:g} Hz but recording is sampled at {rec.sample_rate_hz:g} Hz")
    y = rec.samples
    for f in chain.filters:
        y = filtfilt(f, y, axis=-1)
    return rec.with_samples(y)


def power_spectrum(x, sample_rate_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram (rectangular window) of a 1-D signal, mean removed."""
    x = np.asarray(x, float)
    x = x - x.mean()
    n = len(x)
    spec = np.abs(np.fft.rfft(x)) ** 2 / (sample_rate_hz * n)
    if n % 2 == 0:
        spec[1:-1] *= 2
    else:
        spec[1:] *= 2
    return np.fft.rfftfreq(n, 1.0 / sample_rate_hz), spec
