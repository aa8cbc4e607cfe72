"""Synthetic sensor signal: drifting composite noise plus Poisson-scheduled events.

A node's sample stream is

    x[n] = event(n) + sqrt(P(t)) * (thermal[n] + emi_rel_amp * sin(2 pi f_emi t + phi)
                                    + sum of active bursts)

with P(t) swinging sinusoidally by +/- A_db around P0.  Everything here is a
pure function of the config, the node id and the per-node random streams, so
every detector sees the bit-identical frame sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import EventParams, NoiseParams, SimConfig, frame_time
from .rng import derive_node_stream

# frames of thermal noise drawn per random-access block
THERMAL_BLOCK_FRAMES = 256
BURST_CARRIER_RANGE = (800.0, 2000.0)


def noise_power_at(t, p: NoiseParams):
    """Noise power at time ``t`` (scalar or array, seconds); constant P0 with drift off."""
    if not p.drift_on:
        return np.full(np.shape(t), p.P0) if np.ndim(t) else p.P0
    return p.P0 * 10.0 ** ((p.A_db / 10.0) * np.sin(2.0 * np.pi * np.asarray(t) / p.T_cycle))


@dataclass(frozen=True)
class EventWindow:
    start: float
    end: float
    carrier: float


@dataclass(frozen=True)
class EventSchedule:
    """Ground-truth event windows, one ordered tuple per node."""

    windows: tuple[tuple[EventWindow, ...], ...]

    @property
    def total_event_count(self) -> int:
        return sum(len(w) for w in self.windows)

    def for_node(self, node: int) -> tuple[EventWindow, ...]:
        return self.windows[node]


def schedule_node_events(cfg: SimConfig, rng: np.random.Generator) -> tuple[EventWindow, ...]:
    """Poisson arrivals for one node, re-drawn until they avoid warm-up and each other.

    The count is Poisson(rate * hours); given the count, arrival times are
    i.i.d. uniform, so each onset is drawn uniformly over the admissible span
    and re-drawn while it collides with an accepted window.  Onsets land on
    frame boundaries, so the frame holding an onset never starts before it.
    """
    e = cfg.events
    T = cfg.frame_duration
    lo = cfg.warmup_frames
    hi = int(math.floor((cfg.duration_s - e.duration_s) / T + 1e-9))
    count = int(rng.poisson(e.rate_per_node_hour * cfg.duration_h)) if e.rate_per_node_hour > 0 else 0
    if count == 0 or hi < lo:
        return ()
    accepted: list[tuple[float, float]] = []
    for _ in range(count):
        for _attempt in range(1000):
            start = frame_time(int(rng.integers(lo, hi + 1)), cfg)
            if all(start + e.duration_s <= s or start >= t for s, t in accepted):
                break
        else:
            continue  # span saturated
        accepted.append((start, start + e.duration_s))
    accepted.sort()
    carriers = rng.uniform(*e.carrier_range, size=len(accepted))
    return tuple(EventWindow(s, t, float(c)) for (s, t), c in zip(accepted, carriers))


def schedule_events(cfg: SimConfig) -> EventSchedule:
    windows = tuple(
        schedule_node_events(cfg, derive_node_stream(cfg.seed, node, "events"))
        for node in range(cfg.node_count)
    )
    return EventSchedule(windows)


def event_envelope(t_rel, duration_s: float):
    """Half-cosine decay from 1 at onset to 0 at ``duration_s``; 0 outside."""
    t_rel = np.asarray(t_rel, dtype=float)
    inside = (t_rel >= 0.0) & (t_rel <= duration_s)
    env = 0.5 * (1.0 + np.cos(np.pi * np.clip(t_rel, 0.0, duration_s) / duration_s))
    return np.where(inside, env, 0.0)


def synth_event_sample(t_rel, e: EventParams, carrier: float):
    """Event waveform at time ``t_rel`` after onset (scalar or array)."""
    t_rel = np.asarray(t_rel, dtype=float)
    out = e.peak_amplitude * event_envelope(t_rel, e.duration_s) * np.sin(2.0 * np.pi * carrier * t_rel)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Burst:
    start: float
    duration: float
    rel_amp: float
    carrier: float
    phase: float


def _alias_carrier(alias: float, fs: float, rng: np.random.Generator) -> float:
    """A carrier in the 800-2000 Hz switching range whose alias under ``fs`` is ``alias``."""
    lo, hi = BURST_CARRIER_RANGE
    options = [
        k * fs + s * alias
        for k in range(int(lo // fs), int(hi // fs) + 2)
        for s in (-1.0, 1.0)
        if lo <= k * fs + s * alias <= hi
    ]
    if not options:
        return alias
    return float(options[int(rng.integers(len(options)))])


def schedule_bursts(cfg: SimConfig, node: int) -> tuple[Burst, ...]:
    p = cfg.noise
    if not p.bursts_on or p.burst_rate <= 0:
        return ()
    rng = derive_node_stream(cfg.seed, node, "bursts")
    count = int(rng.poisson(p.burst_rate * cfg.duration_s))
    starts = np.sort(rng.uniform(0.0, cfg.duration_s, size=count))
    durs = rng.uniform(*p.burst_dur_range, size=count)
    amps = rng.uniform(*p.burst_rel_amp_range, size=count)
    aliases = rng.uniform(*p.burst_alias_band, size=count)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return tuple(
        Burst(float(s), float(d), float(a), _alias_carrier(float(f), cfg.fs, rng), float(ph))
        for s, d, a, f, ph in zip(starts, durs, amps, aliases, phases)
    )


@dataclass(frozen=True)
class SignalFrame:
    node: int
    m: int
    start_time: float
    samples: np.ndarray


class NodeSignal:
    """Frame generator for one node; frames are reproducible in any order."""

    def __init__(self, cfg: SimConfig, node: int, events: tuple[EventWindow, ...] = ()):
        self.cfg = cfg
        self.node = node
        self.events = tuple(events)
        self.bursts = schedule_bursts(cfg, node)
        self._burst_starts = np.array([b.start for b in self.bursts])
        self.emi_phase = float(derive_node_stream(cfg.seed, node, "emi_phase").uniform(0.0, 2.0 * np.pi))

    def _thermal(self, m0: int, m1: int) -> np.ndarray:
        L, B = self.cfg.L, THERMAL_BLOCK_FRAMES
        out = np.empty((m1 - m0) * L)
        for block in range(m0 // B, (m1 - 1) // B + 1):
            rng = derive_node_stream(self.cfg.seed, self.node, "thermal", block)
            data = rng.standard_normal(B * L)
            lo = max(m0, block * B)
            hi = min(m1, (block + 1) * B)
            out[(lo - m0) * L : (hi - m0) * L] = data[(lo - block * B) * L : (hi - block * B) * L]
        return out

    def samples(self, m0: int, m1: int) -> np.ndarray:
        """Flat samples of frames ``m0 .. m1-1``."""
        cfg, p = self.cfg, self.cfg.noise
        if m1 <= m0:
            return np.zeros(0)
        n0, n1 = m0 * cfg.L, m1 * cfg.L
        t = np.arange(n0, n1) / cfg.fs
        unit = np.zeros(n1 - n0)
        if p.thermal_on:
            unit += self._thermal(m0, m1)
        if p.emi_on and p.emi_rel_amp > 0:
            unit += p.emi_rel_amp * np.sin(2.0 * np.pi * p.emi_freq * t + self.emi_phase)
        if len(self.bursts):
            t0, t1 = n0 / cfg.fs, n1 / cfg.fs
            first = max(int(np.searchsorted(self._burst_starts, t0 - p.burst_dur_range[1])), 0)
            last = int(np.searchsorted(self._burst_starts, t1))
            for b in self.bursts[first:last]:
                a = max(int(math.ceil(b.start * cfg.fs - 1e-9)), n0)
                z = min(int(math.ceil((b.start + b.duration) * cfg.fs - 1e-9)), n1)
                if z <= a:
                    continue
                tb = np.arange(a, z) / cfg.fs - b.start
                unit[a - n0 : z - n0] += b.rel_amp * np.sin(2.0 * np.pi * b.carrier * tb + b.phase)
        x = np.sqrt(noise_power_at(t, p)) * unit
        for ev in self.events:
            a = max(int(math.ceil(ev.start * cfg.fs - 1e-9)), n0)
            z = min(int(math.floor(ev.end * cfg.fs + 1e-9)) + 1, n1)
            if z <= a:
                continue
            x[a - n0 : z - n0] += synth_event_sample(np.arange(a, z) / cfg.fs - ev.start, cfg.events, ev.carrier)
        return x

    def frames(self, m0: int, m1: int) -> np.ndarray:
        """Frames ``m0 .. m1-1`` as an ``(m1 - m0, L)`` array."""
        return self.samples(m0, m1).reshape(-1, self.cfg.L)

    def frame(self, m: int) -> SignalFrame:
        return SignalFrame(self.node, m, frame_time(m, self.cfg), self.frames(m, m + 1)[0])


def generate_frame(node: int, m: int, schedule: EventSchedule, cfg: SimConfig) -> SignalFrame:
    """One frame of node ``node``; use ``NodeSignal`` directly for bulk generation."""
    if m < 0:
        raise ValueError("frame index must be >= 0")
    return NodeSignal(cfg, node, schedule.for_node(node)).frame(m)


def write_frame_dump(path: str | Path, frames: np.ndarray, cfg: SimConfig, node: int) -> Path:
    """Write frames as little-endian float64 records plus a ``.hdr`` text sidecar."""
    path = Path(path)
    frames = np.ascontiguousarray(frames, dtype="<f8").reshape(-1, cfg.L)
    path.write_bytes(frames.tobytes())
    header = path.with_suffix(path.suffix + ".hdr")
    header.write_text(
        f"format = edgetrigger-frames-v1\nfs = {cfg.fs!r}\nL = {cfg.L}\nnode = {node}\n"
        f"seed = {cfg.seed}\nrecords = {frames.shape[0]}\ndtype = <f8\n"
    )
    return path


def read_frame_dump(path: str | Path) -> tuple[np.ndarray, dict[str, str]]:
    path = Path(path)
    meta = {}
    for line in path.with_suffix(path.suffix + ".hdr").read_text().splitlines():
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    data = np.frombuffer(path.read_bytes(), dtype="<f8")
    return data.reshape(-1, int(meta["L"])), meta
