"""Shared data model: recordings, class labels, feature matrices and manifests.

All containers are frozen dataclasses whose array payloads are marked
read-only, so they can be shared between threads without copying.
"""

from __future__ import annotations

import csv
import enum
import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import FormatError, InvariantError, ParseError

MANIFEST_SCHEMA_VERSION = 1
_T_TOLERANCE_S = 1e-6


class ClassLabel(str, enum.Enum):
    """The eight lower-limb movement classes."""

    A1 = "A1"  # squatting
    A2 = "A2"  # bowing
    A3 = "A3"  # lying lateral kick
    A4 = "A4"  # lying straight kick
    A5 = "A5"  # standing lateral kick
    A6 = "A6"  # standing straight kick
    A7 = "A7"  # sitting kick
    A8 = "A8"  # sit-stand-sit

    @property
    def index(self) -> int:
        return int(self.value[1:]) - 1

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        try:
            return cls(text.strip())
        except ValueError:
            raise FormatError(f"unknown class label {text!r}; expected A1..A8") from None

    @classmethod
    def from_index(cls, i: int) -> "ClassLabel":
        return ALL_LABELS[i]


ALL_LABELS: tuple[ClassLabel, ...] = tuple(ClassLabel)
N_CLASSES = len(ALL_LABELS)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Recording:
    """Multi-channel sampled signal, shape ``(n_channels, n_samples)``, in volts."""

    sample_rate_hz: float
    channels: tuple[str, ...]
    samples: np.ndarray
    trial_label: Optional[ClassLabel] = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[None, :]
        if samples.ndim != 2:
            raise InvariantError("samples must be a 2-D array (n_channels, n_samples)")
        if not self.sample_rate_hz > 0:
            raise InvariantError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        channels = tuple(str(c) for c in self.channels)
        if len(channels) < 1 or len(channels) != samples.shape[0]:
            raise InvariantError(
                f"{len(channels)} channel ids for {samples.shape[0]} sample rows")
        if len(set(channels)) != len(channels):
            raise InvariantError("channel ids must be unique")
        if not np.all(np.isfinite(samples)):
            raise InvariantError("recording contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def with_samples(self, samples) -> "Recording":
        return Recording(self.sample_rate_hz, self.channels, samples, self.trial_label)


def default_channel_ids(n: int) -> tuple[str, ...]:
    return tuple(f"ch{j}" for j in range(1, n + 1))


def _check_header(header: list[str], path) -> tuple[str, ...]:
    header = [h.strip() for h in header]
    if len(header) < 2 or header[0] != "t":
        raise FormatError(f"{path}: header must start with 't' followed by channel columns")
    expected = default_channel_ids(len(header) - 1)
    if tuple(header[1:]) != expected:
        raise FormatError(f"{path}: header must be {','.join(('t',) + expected)}")
    return expected


def _locate_bad_row(text: str, n_cols: int, path) -> None:
    """Slow scan used only after the fast parser failed, to report the row."""
    reader = csv.reader(io.StringIO(text))
    next(reader)
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != n_cols:
            raise FormatError(f"{path}: line {lineno}: expected {n_cols} columns, got {len(row)}")
        for cell in row:
            try:
                float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno} (data row {lineno - 1}): non-numeric cell {cell!r}"
                ) from None


def load_recording(path, sample_rate_hz: Optional[float] = None,
                   trial_label: Optional[ClassLabel] = None) -> Recording:
    """Read a ``t,ch1,...,chN`` CSV file.

    The sample rate is inferred from the time column unless given; in either
    case the time column must advance by ``1/sample_rate_hz`` per row.
    """
    path = Path(path)
    text = path.read_text()
    first, _, body = text.partition("\n")
    if not first.strip():
        raise FormatError(f"{path}: missing header")
    channels = _check_header(first.split(","), path)
    n_cols = len(channels) + 1
    if not body.strip():
        raise FormatError(f"{path}: no samples")
    try:
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    except ValueError:
        _locate_bad_row(text, n_cols, path)
        raise FormatError(f"{path}: unreadable data section")
    if data.size == 0:
        raise FormatError(f"{path}: no samples")
    if data.shape[1] != n_cols:
        raise FormatError(f"{path}: expected {n_cols} columns, got {data.shape[1]}")
    if not np.all(np.isfinite(data)):
        _locate_bad_row(text, n_cols, path)
        raise ParseError(f"{path}: non-finite value in data section")
    t = data[:, 0]
    if sample_rate_hz is None:
        if len(t) < 2:
            raise FormatError(f"{path}: cannot infer the sample rate from a single row")
        est = (len(t) - 1) / (t[-1] - t[0])
        snapped = round(est)
        sample_rate_hz = float(snapped) if abs(est - snapped) <= 1e-6 * est else float(est)
    expected_t = t[0] + np.arange(len(t)) / sample_rate_hz
    bad = np.flatnonzero(np.abs(t - expected_t) > _T_TOLERANCE_S)
    if bad.size:
        raise FormatError(
            f"{path}: line {bad[0] + 2}: time column deviates from 1/{sample_rate_hz:g} s spacing")
    return Recording(sample_rate_hz, channels, data[:, 1:].T, trial_label)


def save_recording(rec: Recording, path) -> None:
    """Write ``rec`` as CSV with 12 significant digits per value."""
    path = Path(path)
    if not np.all(np.isfinite(rec.samples)):
        raise InvariantError("refusing to serialize non-finite samples")
    t = np.arange(rec.n_samples) / rec.sample_rate_hz
    data = np.column_stack([t, rec.samples.T])
    header = ",".join(("t",) + default_channel_ids(rec.n_channels))
    try:
        with open(path, "w", newline="") as fh:
            np.savetxt(fh, data, fmt="%.12g", delimiter=",", header=header, comments="")
    except OSError as exc:
        raise OSError(f"cannot write recording to {path}: {exc}") from exc


# -- feature matrices ------------------------------------------------------------

@dataclass(frozen=True)
class FeatureMatrix:
    """Rows are trials, columns are named features."""

    feature_names: tuple[str, ...]
    values: np.ndarray
    labels: tuple[ClassLabel, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise InvariantError("feature values must be 2-D")
        names = tuple(self.feature_names)
        labels = tuple(ClassLabel(l) for l in self.labels)
        if values.shape[1] != len(names):
            raise InvariantError(f"{values.shape[1]} columns but {len(names)} feature names")
        if values.shape[0] < 1:
            raise InvariantError("feature matrix needs at least one row")
        if len(labels) != values.shape[0]:
            raise InvariantError(f"{len(labels)} labels for {values.shape[0]} rows")
        if len(set(names)) != len(names):
            raise InvariantError("feature names must be unique")
        if not np.all(np.isfinite(values)):
            raise InvariantError("feature matrix contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def label_indices(self) -> np.ndarray:
        return np.array([l.index for l in self.labels], dtype=int)

    def take_rows(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=int)
        return FeatureMatrix(self.feature_names, self.values[idx],
                             tuple(self.labels[i] for i in idx))

    def with_values(self, values) -> "FeatureMatrix":
        return FeatureMatrix(self.feature_names, values, self.labels)


def format_feature_matrix(m: FeatureMatrix) -> str:
    # repr() gives the shortest string that round-trips exactly
    lines = [",".join(m.feature_names + ("label",))]
    for row, label in zip(m.values, m.labels):
        lines.append(",".join([repr(float(v)) for v in row] + [label.value]))
    return "\n".join(lines) + "\n"


def save_feature_matrix(m: FeatureMatrix, path) -> None:
    atomic_write_text(path, format_feature_matrix(m))


def load_feature_matrix(path) -> FeatureMatrix:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty feature file")
    header = [h.strip() for h in rows[0]]
    if not header or header[-1] != "label":
        raise FormatError(f"{path}: last header column must be 'label'")
    names = tuple(header[:-1])
    values, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}: line {lineno}: expected {len(header)} columns")
        try:
            values.append([float(c) for c in row[:-1]])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric feature value") from None
        labels.append(ClassLabel.parse(row[-1]))
    if not values:
        raise FormatError(f"{path}: no rows")
    return FeatureMatrix(names, np.array(values), tuple(labels))


# -- manifests ---------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetManifest:
    """Ordered list of ``(recording file, label)`` pairs."""

    entries: tuple[tuple[Path, ClassLabel], ...]
    schema_version: int = MANIFEST_SCHEMA_VERSION
    root: Path = field(default=Path("."))

    def __len__(self):
        return len(self.entries)

    def resolve(self, rel: Path) -> Path:
        return rel if rel.is_absolute() else self.root / rel

    def trial_ids(self) -> list[str]:
        return [str(p) for p, _ in self.entries]


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    """Parse a manifest; ``relative/path.csv,A3`` per line, ``#`` starts a comment."""
    path = Path(path)
    entries = []
    version = MANIFEST_SCHEMA_VERSION
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("#"):
                tag = line.lstrip("#").strip()
                if tag.startswith("schema_version"):
                    try:
                        version = int(tag.split(":", 1)[1].strip())
                    except (IndexError, ValueError):
                        raise FormatError(f"{path}: line {lineno}: bad schema_version") from None
                continue
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise FormatError(f"{path}: line {lineno}: expected 'path,label'")
            try:
                label = ClassLabel.parse(parts[1])
            except FormatError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
            entries.append((Path(parts[0]), label))
    if version != MANIFEST_SCHEMA_VERSION:
        raise FormatError(f"{path}: unsupported manifest schema_version {version}")
    m = DatasetManifest(tuple(entries), version, path.parent)
    if check_files:
        missing = [str(p) for p, _ in m.entries if not m.resolve(p).is_file()]
        if missing:
            raise FormatError(f"{path}: {len(missing)} referenced file(s) missing, first: {missing[0]}")
    return m


def write_manifest(entries: Sequence[tuple[str, ClassLabel]], path) -> None:
    lines = [f"# schema_version: {MANIFEST_SCHEMA_VERSION}"]
    lines += [f"{p},{ClassLabel(l).value}" for p, l in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def iter_trials(manifest: DatasetManifest) -> Iterator[Recording]:
    """Yield each manifest entry as a labelled Recording, in manifest order."""
    for rel, label in manifest.entries:
        yield load_recording(manifest.resolve(rel), trial_label=label)


def atomic_write_text(path, text: str) -> None:
    """Write through a ``.partial`` sibling so interrupted writes stay labelled."""
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    tmp.write_text(text)
    os.replace(tmp, path)
