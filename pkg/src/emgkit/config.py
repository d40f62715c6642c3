"""Pipeline configuration: an INI file with one section per stage.

Every key has a default, so an empty file (or no file) is a valid config.
:func:`load_config` reports every problem it finds, each with the line it
came from, instead of stopping at the first one.
"""

from __future__ import annotations

import configparser
import hashlib
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ConfigError
from .features import FEATURE_NAMES
from .filtering import DEFAULT_NOTCH_CENTERS, MAX_ORDER, NotchSpec, build_chain
from .models import MODEL_KINDS
from .segmentation import Thresholds

SEED_NAMES = ("split", "cv", "mlp-init", "synth")


def sub_seed(root: int, name: str) -> int:
    """Named child seed of ``root``; independent streams for each stage."""
    if name not in SEED_NAMES:
        raise ValueError(f"unknown seed name {name!r}")
    ss = np.random.SeedSequence([int(root), zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


@dataclass(frozen=True)
class FilterConfig:
    sample_rate_hz: float = 2000.0
    notch_centers_hz: tuple[float, ...] = DEFAULT_NOTCH_CENTERS
    notch_half_width_hz: float = 1.0
    notch_order: int = 3
    band_low_hz: float = 20.0
    band_high_hz: float = 500.0
    band_order: int = 8

    def chain(self):
        notches = [NotchSpec(c, self.notch_half_width_hz, self.notch_order)
                   for c in self.notch_centers_hz]
        return build_chain(self.sample_rate_hz, notches, (self.band_low_hz, self.band_high_hz),
                           self.band_order)


@dataclass(frozen=True)
class SegmentationConfig:
    window_len: int = 32
    rest_s: float = 0.25
    k_start: float = 5.0
    k_stop: float = 2.0
    th1: float | None = None
    th2: float | None = None
    min_s: float = 1.0
    max_s: float = 2.0

    def thresholds(self) -> Thresholds | None:
        if self.th1 is None:
            return None
        return Thresholds(self.th1, self.th2)


@dataclass(frozen=True)
class FeatureConfig:
    channels: tuple[int, ...] = (1, 2)
    names: tuple[str, ...] = FEATURE_NAMES
    threshold_fraction: float = 0.05

    @property
    def n_features(self) -> int:
        return len(self.channels) * len(self.names)


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8


@dataclass(frozen=True)
class SelectionConfig:
    C: float = 1.0
    k: int = 25
    step: int = 1
    tol: float = 1e-6
    max_iter: int = 100_000


@dataclass(frozen=True)
class ClassifierConfig:
    model: str = "bpnn"
    hidden: tuple[int, ...] = (32,)
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 500
    batch_size: int = 16
    lda_shrinkage: float = 1e-3
    svm_C: float = 10.0
    svm_kernel: str = "rbf"
    svm_gamma: float | None = None
    svm_tol: float = 1e-6

    def hyperparameters(self, kind: str, mlp_seed: int) -> dict:
        if kind == "bpnn":
            return {"hidden": list(self.hidden), "learning_rate": self.learning_rate,
                    "momentum": self.momentum, "epochs": self.epochs,
                    "batch_size": self.batch_size, "seed": mlp_seed}
        if kind == "lda":
            return {"shrinkage": self.lda_shrinkage}
        return {"C": self.svm_C, "kernel": self.svm_kernel,
                "gamma": "auto" if self.svm_gamma is None else self.svm_gamma,
                "tol": self.svm_tol}


@dataclass(frozen=True)
class PathsConfig:
    manifest: str | None = None
    out_dir: str = "run"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    threads: int = 1


@dataclass(frozen=True)
class PipelineConfig:
    filter: FilterConfig = field(default_factory=FilterConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def seed_for(self, name: str) -> int:
        return sub_seed(self.run.seed, name)

    def with_section(self, section: str, **kw) -> "PipelineConfig":
        return replace(self, **{section: replace(getattr(self, section), **kw)})

    def to_ini(self, include_threads: bool = True) -> str:
        return render_config(self, include_threads)

    def digest(self) -> str:
        """SHA-256 of the config text; the worker cap is left out since it never changes results."""
        return hashlib.sha256(self.to_ini(include_threads=False).encode()).hexdigest()


# -- text <-> values ----------------------------------------------------------------

def _float(s: str) -> float:
    v = float(s)
    if not np.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s: str) -> int:
    return int(s, 10)


def _opt_float(s: str):
    return None if s.strip().lower() == "auto" else _float(s)


def _opt_str(s: str):
    return s.strip() or None


def _list(conv):
    def parse(s: str):
        items = [p.strip() for p in s.replace("\n", ",").split(",") if p.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(conv(p) for p in items)
    return parse


def _str(s: str) -> str:
    return s.strip()


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# section -> (dataclass, key -> (parser, help))
_SCHEMA: dict[str, tuple[type, dict[str, tuple[Callable[[str], Any], str]]]] = {
    "run": (RunConfig, {
        "seed": (_int, "root seed; split, cv, mlp-init and synth seeds derive from it"),
        "threads": (_int, "worker cap for per-trial and per-pair parallel work"),
    }),
    "paths": (PathsConfig, {
        "manifest": (_opt_str, "dataset manifest (relative/path.csv,A1..A8 per line)"),
        "out_dir": (_str, "directory receiving pipeline artifacts"),
    }),
    "filter": (FilterConfig, {
        "sample_rate_hz": (_float, "sample rate the chain is designed for"),
        "notch_centers_hz": (_list(_float), "band-stop centres, strictly increasing"),
        "notch_half_width_hz": (_float, "each notch stops centre +- this width"),
        "notch_order": (_int, "Butterworth prototype order of each notch"),
        "band_low_hz": (_float, "band-pass lower edge"),
        "band_high_hz": (_float, "band-pass upper edge, below Nyquist"),
        "band_order": (_int, "Butterworth prototype order of the band-pass"),
    }),
    "segmentation": (SegmentationConfig, {
        "window_len": (_int, "short-time energy frame length in samples (hop = frame length)"),
        "rest_s": (_float, "leading rest interval used to calibrate thresholds"),
        "k_start": (_float, "th1 = mean + k_start * std of rest-frame energy"),
        "k_stop": (_float, "th2 = mean + k_stop * std of rest-frame energy"),
        "th1": (_opt_float, "fixed start threshold, or auto"),
        "th2": (_opt_float, "fixed stop threshold, or auto"),
        "min_s": (_float, "shortest accepted segment (exclusive)"),
        "max_s": (_float, "longest accepted segment (exclusive)"),
    }),
    "features": (FeatureConfig, {
        "channels": (_list(_int), "1-based channels to extract features from"),
        "names": (_list(_str), "per-channel features, in output order"),
        "threshold_fraction": (_float, "ZC/SSC/WAMP/MYOP threshold as a fraction of segment RMS"),
    }),
    "split": (SplitConfig, {
        "train_fraction": (_float, "per-class share of trials used for training"),
    }),
    "selection": (SelectionConfig, {
        "C": (_float, "linear SVM box constraint during RFE"),
        "k": (_int, "number of features kept"),
        "step": (_int, "features removed per RFE round"),
        "tol": (_float, "SMO stopping tolerance on the KKT residual"),
        "max_iter": (_int, "SMO iteration budget per binary machine"),
    }),
    "classifier": (ClassifierConfig, {
        "model": (_str, "bpnn, lda or svm"),
        "hidden": (_list(_int), "bpnn hidden layer widths"),
        "learning_rate": (_float, "bpnn step size"),
        "momentum": (_float, "bpnn momentum in [0, 1)"),
        "epochs": (_int, "bpnn epoch budget"),
        "batch_size": (_int, "bpnn mini-batch size"),
        "lda_shrinkage": (_float, "ridge as a fraction of the mean covariance eigenvalue"),
        "svm_C": (_float, "svm box constraint"),
        "svm_kernel": (_str, "linear or rbf"),
        "svm_gamma": (_opt_float, "rbf width, or auto for 1 / (d * var(X))"),
        "svm_tol": (_float, "svm KKT tolerance"),
    }),
}
_SECTION_ATTR = {"run": "run", "paths": "paths", "filter": "filter",
                 "segmentation": "segmentation", "features": "features", "split": "split",
                 "selection": "selection", "classifier": "classifier"}
_ORDER = ("run", "paths", "filter", "segmentation", "features", "split", "selection", "classifier")


def render_config(cfg: PipelineConfig, include_threads: bool = True) -> str:
    """INI text for ``cfg``; each key carries a one-line comment."""
    out = []
    for section in _ORDER:
        _, keys = _SCHEMA[section]
        values = getattr(cfg, _SECTION_ATTR[section])
        out.append(f"[{section}]")
        for key, (_, help_text) in keys.items():
            if section == "run" and key == "threads" and not include_threads:
                continue
            v = getattr(values, key)
            if section == "paths" and key == "manifest" and v is None:
                v = ""
            out.append(f"# {help_text}")
            out.append(f"{key} = {_fmt(v)}".rstrip())
        out.append("")
    return "\n".join(out)


def default_config_text() -> str:
    return render_config(PipelineConfig())


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines: dict[tuple[str, str], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip().lower()
        elif section and s and s[0] not in "#;" and ("=" in s or ":" in s) and not raw[0].isspace():
            key = s.split("=", 1)[0] if "=" in s else s.split(":", 1)[0]
            lines.setdefault((section, key.strip().lower()), no)
    return lines


def parse_config_text(text: str, source: str = "<config>") -> PipelineConfig:
    """Parse and validate config text; raises :class:`ConfigError` listing every problem."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       empty_lines_in_values=False)
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}: key outside any [section]") from None
    except configparser.ParsingError as exc:
        src = text.splitlines()
        raise ConfigError([f"{source}: line {no}: cannot parse {src[no - 1].strip()!r}"
                           for no, _ in exc.errors]) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(f"{source}: line {exc.lineno}: duplicate "
                          f"{'key' if hasattr(exc, 'option') else 'section'}") from None

    where = _key_lines(text)
    problems: list[str] = []
    sections = {}
    for section in parser.sections():
        name = section.lower()
        if name not in _SCHEMA:
            problems.append(f"{source}: unknown section [{section}]")
            continue
        cls, keys = _SCHEMA[name]
        lower = {k.lower(): k for k in keys}
        kw = {}
        for key, raw in parser.items(section):
            line = where.get((name, key))
            at = f"{source}: line {line}" if line else source
            if key not in lower:
                problems.append(f"{at}: unknown key '{key}' in [{name}]")
                continue
            conv, _ = keys[lower[key]]
            try:
                kw[lower[key]] = conv(raw)
            except ValueError as exc:
                problems.append(f"{at}: [{name}] {lower[key]} = {raw!r}: {exc}")
        sections[_SECTION_ATTR[name]] = cls(**kw)
    # keys that failed to convert keep their defaults so the checks below still run
    cfg = PipelineConfig(**sections)
    problems += [f"{source}: {p}" for p in check_config(cfg)]
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path=None) -> PipelineConfig:
    """Config from ``path``, or the documented defaults when ``path`` is None."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    cfg = parse_config_text(text, str(path))
    manifest = cfg.paths.manifest
    if manifest is not None and not Path(manifest).is_absolute():
        cfg = cfg.with_section("paths", manifest=str(path.parent / manifest))
    return cfg


def check_config(cfg: PipelineConfig, require_manifest: bool = False) -> list[str]:
    """Every violated constraint, as readable messages (empty when valid)."""
    p: list[str] = []
    f = cfg.filter
    nyq = f.sample_rate_hz / 2
    if f.sample_rate_hz <= 0:
        p.append("[filter] sample_rate_hz must be positive")
    if not 0 < f.band_low_hz < f.band_high_hz:
        p.append("[filter] need 0 < band_low_hz < band_high_hz")
    if f.band_high_hz >= nyq:
        p.append(f"[filter] band_high_hz {f.band_high_hz:g} must be below Nyquist ({nyq:g} Hz)")
    for key in ("band_order", "notch_order"):
        v = getattr(f, key)
        if not 1 <= v <= MAX_ORDER:
            p.append(f"[filter] {key} must lie in 1..{MAX_ORDER}, got {v}")
    if f.notch_half_width_hz <= 0:
        p.append("[filter] notch_half_width_hz must be positive")
    c = f.notch_centers_hz
    if any(b <= a for a, b in zip(c, c[1:])):
        p.append("[filter] notch_centers_hz must be strictly increasing")
    for centre in c:
        if not (0 < centre - f.notch_half_width_hz and centre + f.notch_half_width_hz < nyq):
            p.append(f"[filter] notch at {centre:g} Hz does not fit between 0 and Nyquist")

    s = cfg.segmentation
    if s.window_len < 1:
        p.append("[segmentation] window_len must be >= 1")
    if (s.th1 is None) != (s.th2 is None):
        p.append("[segmentation] th1 and th2 must both be set or both be auto")
    elif s.th1 is not None:
        if s.th2 <= 0:
            p.append(f"[segmentation] Thresholds invariant: th2 must be positive, got {s.th2:g}")
        if s.th1 < s.th2:
            p.append(f"[segmentation] Thresholds invariant: th1 ({s.th1:g}) must be >= th2 ({s.th2:g})")
    if s.rest_s <= 0:
        p.append("[segmentation] rest_s must be positive")
    if not s.k_start >= s.k_stop >= 0:
        p.append("[segmentation] need k_start >= k_stop >= 0")
    if not 0 < s.min_s < s.max_s:
        p.append("[segmentation] need 0 < min_s < max_s")

    ft = cfg.features
    if any(ch < 1 for ch in ft.channels) or len(set(ft.channels)) != len(ft.channels):
        p.append("[features] channels must be distinct 1-based indices")
    unknown = [n for n in ft.names if n not in FEATURE_NAMES]
    if unknown:
        p.append(f"[features] unknown feature name(s): {', '.join(unknown)}")
    if len(set(ft.names)) != len(ft.names):
        p.append("[features] names must be unique")
    if ft.threshold_fraction < 0:
        p.append("[features] threshold_fraction must be >= 0")

    if not 0 < cfg.split.train_fraction < 1:
        p.append("[split] train_fraction must lie in (0, 1)")

    sel = cfg.selection
    if sel.C <= 0:
        p.append("[selection] C must be positive")
    if not 1 <= sel.k <= ft.n_features:
        p.append(f"[selection] k must lie in 1..{ft.n_features}, got {sel.k}")
    if sel.step < 1:
        p.append("[selection] step must be >= 1")
    if sel.tol <= 0 or sel.max_iter < 1:
        p.append("[selection] need tol > 0 and max_iter >= 1")

    cl = cfg.classifier
    if cl.model not in MODEL_KINDS:
        p.append(f"[classifier] model must be one of {', '.join(MODEL_KINDS)}, got {cl.model!r}")
    if any(h < 1 for h in cl.hidden):
        p.append("[classifier] hidden widths must be >= 1")
    if cl.learning_rate <= 0:
        p.append("[classifier] learning_rate must be positive")
    if not 0 <= cl.momentum < 1:
        p.append("[classifier] momentum must lie in [0, 1)")
    if cl.epochs < 0 or cl.batch_size < 1:
        p.append("[classifier] need epochs >= 0 and batch_size >= 1")
    if cl.lda_shrinkage < 0:
        p.append("[classifier] lda_shrinkage must be >= 0")
    if cl.svm_C <= 0 or cl.svm_tol <= 0:
        p.append("[classifier] need svm_C > 0 and svm_tol > 0")
    if cl.svm_kernel not in ("linear", "rbf"):
        p.append(f"[classifier] svm_kernel must be linear or rbf, got {cl.svm_kernel!r}")
    if cl.svm_gamma is not None and cl.svm_gamma <= 0:
        p.append("[classifier] svm_gamma must be positive or auto")

    if cfg.run.threads < 1:
        p.append("[run] threads must be >= 1")
    if cfg.run.seed < 0:
        p.append("[run] seed must be >= 0")
    if require_manifest:
        m = cfg.paths.manifest
        if m is None:
            p.append("[paths] manifest is required")
        elif not Path(m).is_file():
            p.append(f"[paths] manifest {m} does not exist")
    return p


def validate_config(path) -> PipelineConfig:
    """Load ``path`` and insist that everything a pipeline run needs is present."""
    cfg = load_config(path)
    problems = check_config(cfg, require_manifest=True)
    if problems:
        raise ConfigError(problems)
    return cfg

