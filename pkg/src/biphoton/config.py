"""Run configuration: dataclasses, the flat ``key = value`` file format and presets."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ValidationError
from .source import SourceConfig
from .states import TARGETS, format_setting, parse_setting

MODES = ("simulate", "correlate", "fit", "tomo", "pipeline")

# Absolute rates are not reported for the source; these are modeling assumptions.
PAPER_ASSUMPTIONS = (
    "pair_rate_hz=1e5 is assumed (no absolute generation rate is reported)",
    "noise_s_hz=noise_as_hz=5750 are assumed, chosen so the expected peak g2 is about 27.7",
    "emitted state is a Werner state with p=0.95 (not a measured matrix)",
    "one-sided exponential wave packet; the rising edge near zero delay is not modeled",
    "g2_ss(0)=g2_asas(0)=2 (thermal statistics) assumed in the Cauchy-Schwarz factor",
    "coincidence delay is t_as - t_s; the histogram starts at t_min_ps",
    "tomography accumulation time applies per setting",
)


@dataclass(frozen=True)
class AnalysisConfig:
    bin_width_ps: int = 1940
    t_min_ps: int = 0
    n_bins: int = 206  # ~400 ns window at 1.94 ns bins
    fit_start: int | str = "auto"
    fit_weighting: str = "none"
    tail_fraction: float = 0.2
    coincidence_window_ps: int = 120_000
    accidental_subtraction: bool = True


@dataclass(frozen=True)
class TomoConfig:
    target: str = "bell"
    duration_ps: int = 160 * 10**12  # per setting
    likelihood: str = "poisson"
    n_starts: int = 1


@dataclass(frozen=True)
class Paths:
    out_dir: str = "out"
    stokes_path: str | None = None
    anti_stokes_path: str | None = None
    histogram_path: str | None = None
    counts_path: str | None = None
    tag_format: str = "text"  # or "binary"


@dataclass(frozen=True)
class RunConfig:
    mode: str = "pipeline"
    source: SourceConfig = field(default_factory=SourceConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    tomo: TomoConfig = field(default_factory=TomoConfig)
    paths: Paths = field(default_factory=Paths)
    preset: str | None = None

    @property
    def seed(self) -> int:
        return self.source.seed

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, source=replace(self.source, seed=int(seed)))

    def validate(self) -> RunConfig:
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        a = self.analysis
        if a.bin_width_ps <= 0 or a.n_bins < 1:
            raise ValidationError("bin_width_ps and n_bins must be positive")
        if a.coincidence_window_ps <= 0:
            raise ValidationError("coincidence_window_ps must be positive")
        if a.fit_weighting not in ("none", "poisson"):
            raise ValidationError(f"fit_weighting must be none or poisson, got {a.fit_weighting!r}")
        if self.tomo.target not in TARGETS:
            raise ValidationError(f"unknown target {self.tomo.target!r}")
        if self.tomo.likelihood not in ("poisson", "gaussian"):
            raise ValidationError(f"unknown likelihood {self.tomo.likelihood!r}")
        if self.tomo.duration_ps <= 0:
            raise ValidationError("tomo_duration_ps must be positive")
        if self.paths.tag_format not in ("text", "binary"):
            raise ValidationError("tag_format must be text or binary")
        if self.mode in ("simulate", "pipeline") or (self.mode == "tomo" and not self.paths.counts_path):
            self.source.validate()
        for p in self._required_inputs():
            if not p or not Path(p).exists():
                raise ValidationError(f"{self.mode}: input file {p!r} does not exist")
        return self

    def _required_inputs(self) -> list:
        if self.mode == "correlate":
            return [self.paths.stokes_path, self.paths.anti_stokes_path]
        if self.mode == "fit":
            return [self.paths.histogram_path]
        if self.mode == "tomo" and self.paths.counts_path:
            return [self.paths.counts_path]
        return []

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "preset": self.preset,
            "source": self.source.to_dict(),
            "analysis": dataclasses.asdict(self.analysis),
            "tomo": dataclasses.asdict(self.tomo),
        }


# --- flat key = value files ----------------------------------------------------

_SOURCE_KEYS = {
    "pair_rate_hz": float, "tau_co_ps": float, "eta_s": float, "eta_as": float,
    "noise_s_hz": float, "noise_as_hz": float, "duration_ps": int, "state": str,
    "setting": parse_setting, "seed": int,
}
_ANALYSIS_KEYS = {
    "bin_width_ps": int, "t_min_ps": int, "n_bins": int, "fit_start": str,
    "fit_weighting": str, "tail_fraction": float, "coincidence_window_ps": int,
    "accidental_subtraction": "bool",
}
_TOMO_KEYS = {"target": str, "tomo_duration_ps": int, "likelihood": str, "n_starts": int}
_PATH_KEYS = {"out_dir", "stokes_path", "anti_stokes_path", "histogram_path", "counts_path",
              "tag_format"}


def _int(text: str) -> int:
    # accept 160e12 style as long as it is integral
    try:
        return int(text)
    except ValueError:
        v = float(text)
        if v != int(v):
            raise ValidationError(f"expected an integer, got {text!r}") from None
        return int(v)


def _convert(key: str, kind, raw: str, parser: configparser.ConfigParser):
    try:
        if kind == "bool":
            return parser.getboolean("run", key)
        if kind is int:
            return _int(raw)
        if kind is float:
            return float(raw)
        return kind(raw)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"bad value for {key}: {raw!r} ({exc})") from None


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Apply the ``key = value`` lines in ``text`` on top of ``base``.

    Blank lines and ``#``/``;`` comments are ignored; unknown keys are errors.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from None
    cfg = base or RunConfig()
    src, ana, tomo, paths = {}, {}, {}, {}
    mode = cfg.mode
    for key, raw in parser.items("run"):
        if key == "mode":
            mode = raw
        elif key in _SOURCE_KEYS:
            src[key] = _convert(key, _SOURCE_KEYS[key], raw, parser)
        elif key in _ANALYSIS_KEYS:
            val = _convert(key, _ANALYSIS_KEYS[key], raw, parser)
            if key == "fit_start" and val != "auto":
                val = _int(val)
            ana[key] = val
        elif key in _TOMO_KEYS:
            val = _convert(key, _TOMO_KEYS[key], raw, parser)
            tomo["duration_ps" if key == "tomo_duration_ps" else key] = val
        elif key in _PATH_KEYS:
            paths[key] = raw
        else:
            raise ValidationError(f"unknown config key {key!r}")
    return replace(
        cfg,
        mode=mode,
        source=replace(cfg.source, **src),
        analysis=replace(cfg.analysis, **ana),
        tomo=replace(cfg.tomo, **tomo),
        paths=replace(cfg.paths, **paths),
    )


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base)


def dump_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config_text` for label-valued states."""
    s = cfg.source
    if not isinstance(s.state, str):
        raise ValidationError("explicit density matrices cannot be written to a config file")
    lines = [f"mode = {cfg.mode}"]
    for k in _SOURCE_KEYS:
        v = getattr(s, k)
        lines.append(f"{k} = {format_setting(v) if k == 'setting' else v}")
    for k in _ANALYSIS_KEYS:
        lines.append(f"{k} = {getattr(cfg.analysis, k)}")
    lines.append(f"target = {cfg.tomo.target}")
    lines.append(f"tomo_duration_ps = {cfg.tomo.duration_ps}")
    lines.append(f"likelihood = {cfg.tomo.likelihood}")
    lines.append(f"n_starts = {cfg.tomo.n_starts}")
    for k in sorted(_PATH_KEYS):
        v = getattr(cfg.paths, k)
        if v is not None:
            lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


# --- presets -------------------------------------------------------------------

def paper_source(seed: int = 1) -> SourceConfig:
    return SourceConfig(
        pair_rate_hz=1e5,
        tau_co_ps=40_000.0,
        eta_s=0.040,
        eta_as=0.032,
        noise_s_hz=5750.0,
        noise_as_hz=5750.0,
        duration_ps=160 * 10**12,
        state="werner:0.95",
        setting=parse_setting("P2,P2"),
        seed=seed,
    )


def apply_preset(cfg: RunConfig, name: str) -> RunConfig:
    """Pin the values that come from the experiment; keep everything else from ``cfg``."""
    if name != "paper":
        raise ValidationError(f"unknown preset {name!r}")
    src = replace(cfg.source, tau_co_ps=40_000.0, eta_s=0.040, eta_as=0.032,
                  duration_ps=160 * 10**12)
    ana = replace(cfg.analysis, bin_width_ps=1940)
    tomo = replace(cfg.tomo, duration_ps=160 * 10**12)
    return replace(cfg, source=src, analysis=ana, tomo=tomo, preset=name)


def paper_config(seed: int = 1, mode: str = "pipeline") -> RunConfig:
    return apply_preset(RunConfig(mode=mode, source=paper_source(seed)), "paper")
