"""Simulation configuration, frame-clock arithmetic and the key=value file format.

Every parameter block is a frozen dataclass so a ``SimConfig`` can be shared
freely between worker processes.  Amplitudes are in units of sqrt(P0).

Config files are flat ``section.field = value`` lines; ``#`` starts a comment
and tuple-valued fields are written comma separated::

    seed = 7
    node_count = 20
    duration_s = 7200
    noise.A_db = 6
    events.carrier_range = 1.0, 4.5
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised when a configuration violates one of its invariants."""


@dataclass(frozen=True)
class NoiseParams:
    P0: float = 1.0
    A_db: float = 6.0
    T_cycle: float = 3600.0
    emi_freq: float = 60.0
    emi_rel_amp: float = 0.3
    burst_rate: float = 0.2
    burst_dur_range: tuple[float, float] = (0.01, 0.10)
    burst_rel_amp_range: tuple[float, float] = (0.5, 2.0)
    burst_alias_band: tuple[float, float] = (10.0, 48.0)
    thermal_on: bool = True
    emi_on: bool = True
    bursts_on: bool = True
    drift_on: bool = True

    def validate(self, fs: float, event_band: tuple[float, float]) -> None:
        if self.P0 <= 0:
            raise ConfigError("noise.P0 must be > 0")
        if self.A_db <= 0:
            raise ConfigError("noise.A_db must be > 0")
        if self.T_cycle <= 0:
            raise ConfigError("noise.T_cycle must be > 0")
        if self.emi_rel_amp < 0:
            raise ConfigError("noise.emi_rel_amp must be >= 0")
        if self.burst_rate < 0:
            raise ConfigError("noise.burst_rate must be >= 0")
        for name in ("burst_dur_range", "burst_rel_amp_range", "burst_alias_band"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ConfigError(f"noise.{name} must be an ordered non-negative range")
        lo, hi = self.burst_alias_band
        if hi > fs / 2:
            raise ConfigError("noise.burst_alias_band must lie below Nyquist")
        if lo <= event_band[1] and hi >= event_band[0]:
            raise ConfigError("noise.burst_alias_band must not overlap the event band")


@dataclass(frozen=True)
class EventParams:
    rate_per_node_hour: float = 1.0
    duration_s: float = 5.0
    snr_db: float = 18.0
    freq_range: tuple[float, float] = (1.0, 5.0)
    carrier_range: tuple[float, float] = (1.0, 4.5)
    # None means 10**(snr_db/20) in units of sqrt(P0)
    amplitude: float | None = None

    @property
    def peak_amplitude(self) -> float:
        if self.amplitude is not None:
            return self.amplitude
        return math.sqrt(10.0 ** (self.snr_db / 10.0))

    def validate(self, fs: float) -> None:
        if self.rate_per_node_hour < 0:
            raise ConfigError("events.rate_per_node_hour must be >= 0")
        if self.duration_s <= 0:
            raise ConfigError("events.duration_s must be > 0")
        lo, hi = self.freq_range
        if not 0 < lo <= hi < fs / 2:
            raise ConfigError("events.freq_range must lie within (0, fs/2)")
        clo, chi = self.carrier_range
        if not lo <= clo <= chi <= hi:
            raise ConfigError("events.carrier_range must lie within events.freq_range")


@dataclass(frozen=True)
class TsnfaParams:
    gamma_d: int = 3
    gamma_a: int = 64
    zeta: float = 6.0
    r_gate: float = 0.8
    zeta_k: tuple[float, ...] = (6.0, 6.0, 6.0, 6.0, 6.0, 6.0)

    @property
    def alpha(self) -> float:
        return 1.0 - 1.0 / self.gamma_a

    @property
    def snr_min_db(self) -> float:
        return 20.0 * math.log10(self.zeta)

    def validate(self) -> None:
        if self.gamma_d < 1:
            raise ConfigError("tsnfa.gamma_d must be >= 1")
        if self.gamma_a < 2:
            raise ConfigError("tsnfa.gamma_a must be >= 2")
        if self.zeta <= 1:
            raise ConfigError("tsnfa.zeta must be > 1")
        if not 0 < self.r_gate < 1:
            raise ConfigError("tsnfa.r_gate must lie in (0, 1)")
        if len(self.zeta_k) != 6 or any(z <= 1 for z in self.zeta_k):
            raise ConfigError("tsnfa.zeta_k needs six multipliers > 1")


@dataclass(frozen=True)
class ZhangParams:
    beta: float = 0.95
    zeta: float = 6.0
    r_gate: float = 0.8

    def validate(self) -> None:
        if not 0 < self.beta < 1:
            raise ConfigError("zhang.beta must lie in (0, 1)")
        if self.zeta <= 1:
            raise ConfigError("zhang.zeta must be > 1")


@dataclass(frozen=True)
class StftParams:
    # None means the whole warm-up window
    m_cal: int | None = None
    n_sigma: float = 3.0


@dataclass(frozen=True)
class DedarParams:
    beta_e: float = 0.95
    zeta: float = 6.0

    def validate(self) -> None:
        if not 0 < self.beta_e < 1:
            raise ConfigError("dedar.beta_e must lie in (0, 1)")


@dataclass(frozen=True)
class SodParams:
    delta: float = 12.0

    def validate(self) -> None:
        if self.delta < 0:
            raise ConfigError("sod.delta must be >= 0")


@dataclass(frozen=True)
class TinymlParams:
    n_train: int = 10_000
    n_val: int = 2_000
    max_epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-3
    tol: float = 1e-4
    train_seed: int = 0
    percentile: float = 99.0
    weights_path: str = ""


@dataclass(frozen=True)
class NetworkModelParams:
    grid_cols: int = 15
    hop_base_ms: float = 5.0
    hop_jitter_ms: float = 2.0
    message_bytes: int = 32

    def validate(self) -> None:
        if self.grid_cols < 1 or self.message_bytes < 1:
            raise ConfigError("network.grid_cols and network.message_bytes must be >= 1")
        if self.hop_base_ms < 0 or self.hop_jitter_ms < 0:
            raise ConfigError("network latencies must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    fs: float = 100.0
    L: int = 128
    node_count: int = 200
    duration_s: float = 86_400.0
    seed: int = 0
    warmup_frames: int = 128
    grace_frames: int = 2
    noise: NoiseParams = field(default_factory=NoiseParams)
    events: EventParams = field(default_factory=EventParams)
    tsnfa: TsnfaParams = field(default_factory=TsnfaParams)
    zhang: ZhangParams = field(default_factory=ZhangParams)
    stft: StftParams = field(default_factory=StftParams)
    dedar: DedarParams = field(default_factory=DedarParams)
    sod: SodParams = field(default_factory=SodParams)
    tinyml: TinymlParams = field(default_factory=TinymlParams)
    network: NetworkModelParams = field(default_factory=NetworkModelParams)

    def __post_init__(self) -> None:
        self.validate()

    @property
    def frame_duration(self) -> float:
        return self.L / self.fs

    @property
    def bin_resolution(self) -> float:
        return self.fs / self.L

    @property
    def n_frames(self) -> int:
        """Whole frames per node over the run."""
        return int(math.floor(self.duration_s / self.frame_duration + 1e-9))

    @property
    def warmup_end_s(self) -> float:
        return frame_time(self.warmup_frames, self)

    @property
    def duration_h(self) -> float:
        return self.duration_s / 3600.0

    @property
    def m_cal(self) -> int:
        return self.stft.m_cal if self.stft.m_cal is not None else self.warmup_frames

    def validate(self) -> None:
        if self.fs <= 0:
            raise ConfigError("fs must be > 0")
        if self.L < 2 or self.L & (self.L - 1):
            raise ConfigError("L must be a power of two")
        if self.node_count < 1:
            raise ConfigError("node_count must be >= 1")
        if self.warmup_frames < 0 or self.grace_frames < 0:
            raise ConfigError("warmup_frames and grace_frames must be >= 0")
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be > 0")
        if self.duration_s < self.warmup_frames * self.frame_duration:
            raise ConfigError("duration_s must cover the warm-up window")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        self.noise.validate(self.fs, (self.bin_resolution, 6 * self.bin_resolution))
        self.events.validate(self.fs)
        self.tsnfa.validate()
        self.zhang.validate()
        self.dedar.validate()
        self.sod.validate()
        self.network.validate()
        if self.m_cal < 2 or self.m_cal > self.warmup_frames:
            raise ConfigError("stft.m_cal must lie in [2, warmup_frames]")

    def replace(self, **changes: Any) -> SimConfig:
        """Return a copy with top-level fields or dotted ``section.field`` keys changed."""
        return with_overrides(self, changes)


def frame_time(m: int, cfg: SimConfig) -> float:
    """Start time in seconds of frame ``m``."""
    return m * cfg.L / cfg.fs


_SECTIONS = ("noise", "events", "tsnfa", "zhang", "stft", "dedar", "sod", "tinyml", "network")


def _coerce(raw: str, current: Any, annotation: str) -> Any:
    raw = raw.strip()
    if raw.lower() in ("none", "") and "None" in annotation:
        return None
    if isinstance(current, bool) or annotation == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {raw!r}")
    if isinstance(current, tuple) or annotation.startswith("tuple"):
        return tuple(float(p) for p in raw.split(","))
    if isinstance(current, int) or annotation.startswith("int"):
        return int(float(raw)) if "." in raw or "e" in raw.lower() else int(raw)
    if isinstance(current, float) or annotation.startswith("float"):
        return float(raw)
    return raw


def with_overrides(cfg: SimConfig, changes: dict[str, Any]) -> SimConfig:
    top: dict[str, Any] = {}
    sections: dict[str, dict[str, Any]] = {}
    for key, value in changes.items():
        if "." in key:
            section, name = key.split(".", 1)
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section: {section}")
            sections.setdefault(section, {})[name] = value
        else:
            top[key] = value
    for section, values in sections.items():
        block = getattr(cfg, section)
        known = {f.name for f in dataclasses.fields(block)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")
        top[section] = dataclasses.replace(block, **values)
    known_top = {f.name for f in dataclasses.fields(cfg)}
    unknown = set(top) - known_top
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return dataclasses.replace(cfg, **top)


def parse_config_text(text: str, base: SimConfig | None = None) -> SimConfig:
    base = base or SimConfig()
    changes: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if "." in key:
            section, name = key.split(".", 1)
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section {section!r}")
            block = getattr(base, section)
            fields = {f.name: f for f in dataclasses.fields(block)}
            if name not in fields:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            current, annotation = getattr(block, name), str(fields[name].type)
        else:
            fields = {f.name: f for f in dataclasses.fields(base)}
            if key not in fields or key in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            current, annotation = getattr(base, key), str(fields[key].type)
        try:
            changes[key] = _coerce(raw, current, annotation)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return with_overrides(base, changes)


def load_config(path: str | Path, base: SimConfig | None = None) -> SimConfig:
    return parse_config_text(Path(path).read_text(), base)


def dump_config(cfg: SimConfig) -> str:
    """Render ``cfg`` in the key=value format; ``parse_config_text`` inverts it."""
    lines = []
    for f in dataclasses.fields(cfg):
        if f.name in _SECTIONS:
            continue
        lines.append(f"{f.name} = {_fmt(getattr(cfg, f.name))}")
    for section in _SECTIONS:
        block = getattr(cfg, section)
        for f in dataclasses.fields(block):
            lines.append(f"{section}.{f.name} = {_fmt(getattr(block, f.name))}")
    return "\n".join(lines) + "\n"


def _fmt(value: Any) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return "none" if value is None else str(value)


def config_as_dict(cfg: SimConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)
