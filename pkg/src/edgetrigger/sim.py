"""Monte Carlo driver: every detector sees the identical per-node frame stream.

Nodes are independent work units.  Each worker produces a ``NodeResult``;
results are merged in node-id order so the report never depends on the pool
size or on completion order.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import NetworkModelParams, SimConfig, config_as_dict, frame_time
from .detectors import DETECTOR_NAMES, Dedar, Sod, Stft, Tinyml, TsnfaMean, TsnfaMedian, Zhang
from .detectors.base import DetectorNotReady
from .detectors.tinyml import AutoencoderWeights
from .rng import derive_node_stream
from .signal import EventSchedule, EventWindow, NodeSignal, noise_power_at, schedule_events
from .spectral import fft_magnitude

REPORT_FORMAT = "edgetrigger-report-v1"
TRIGGER_LOG_COLUMNS = ("node", "detector", "frame", "time_s", "detail", "class")
FRAMES_PER_CHUNK = 8192


@dataclass(frozen=True)
class TriggerRecord:
    node: int
    detector: str
    frame: int
    time: float
    detail: float | None
    classification: str = "unset"

    def classified(self, label: str) -> TriggerRecord:
        if self.classification != "unset":
            raise ValueError("trigger already classified")
        if label not in ("TP", "FP"):
            raise ValueError(f"bad classification {label!r}")
        return TriggerRecord(self.node, self.detector, self.frame, self.time, self.detail, label)


@dataclass
class AlgorithmMetrics:
    detector: str
    tp: int
    fp: int
    fn: int
    tp_triggers: int
    events: int
    node_hours: float
    latency_median_ms: float | None = None
    latency_p99_ms: float | None = None
    throughput_kb_per_hr: float = 0.0
    fp_high_noise_fraction: float | None = None

    @property
    def dr(self) -> float:
        return 100.0 * self.tp / self.events if self.events else 100.0

    @property
    def precision(self) -> float | None:
        total = self.tp_triggers + self.fp
        return 100.0 * self.tp_triggers / total if total else None

    @property
    def far(self) -> float:
        return self.fp / self.node_hours

    def as_dict(self) -> dict:
        """JSON form; rates are rounded to the 2 decimals the summary table prints."""
        return {
            "detector": self.detector,
            "DR_percent": _r2(self.dr),
            "TP": self.tp,
            "FP": self.fp,
            "FN": self.fn,
            "TP_triggers": self.tp_triggers,
            "precision_percent": _r2(self.precision),
            "FAR_per_node_hour": _r2(self.far),
            "latency_median_ms": _r2(self.latency_median_ms),
            "latency_p99_ms": _r2(self.latency_p99_ms),
            "throughput_kB_per_hr": _r2(self.throughput_kb_per_hr),
            "fp_high_noise_fraction": None if self.fp_high_noise_fraction is None else round(self.fp_high_noise_fraction, 6),
        }


def _r2(x: float | None) -> float | None:
    return None if x is None else round(x, 2)


@dataclass
class RunReport:
    config: dict
    seed: int
    node_count: int
    duration_h: float
    total_events: int
    metrics: dict[str, AlgorithmMetrics]
    per_node: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "seed": self.seed,
            "node_count": self.node_count,
            "duration_h": self.duration_h,
            "total_events": self.total_events,
            "network_model": "model-dependent: latency and throughput come from an invented grid model",
            "detectors": [self.metrics[d].as_dict() for d in self.metrics],
            "per_node": self.per_node,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(_finite(self.as_dict()), indent=2, sort_keys=False) + "\n"


def _finite(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


# scoring


def is_true_positive(trigger: TriggerRecord, schedule: EventSchedule, grace: int, frame_duration: float) -> bool:
    return _window_index(trigger.time, schedule.for_node(trigger.node), grace * frame_duration) >= 0


def _window_index(t: float, windows: tuple[EventWindow, ...], grace_s: float) -> int:
    return int(classify_times(np.array([t]), windows, grace_s)[0])


def classify_times(times: np.ndarray, windows: tuple[EventWindow, ...], grace_s: float) -> np.ndarray:
    """Window index hit by each trigger time, or -1 when it lies outside all windows.

    A time inside one window's grace tail and also past the next onset belongs
    to the later window.
    """
    times = np.asarray(times, dtype=float)
    if not windows or times.size == 0:
        return np.full(times.size, -1, dtype=np.int64)
    starts = np.array([w.start for w in windows])
    ends = np.array([w.end for w in windows]) + grace_s
    idx = np.searchsorted(starts, times, side="right") - 1
    ok = idx >= 0
    ok[ok] = times[ok] <= ends[idx[ok]]
    return np.where(ok, idx, -1).astype(np.int64)


def score_run(triggers, schedule: EventSchedule, grace: int = 2, frame_duration: float = 1.28) -> dict[str, dict]:
    """Per-detector ``TP`` (events detected), ``FP``, ``FN`` and ``TP_triggers``."""
    by_det: dict[str, list[TriggerRecord]] = {}
    for t in triggers:
        by_det.setdefault(t.detector, []).append(t)
    total = schedule.total_event_count
    out = {}
    for det, recs in by_det.items():
        hit: set[tuple[int, int]] = set()
        fp = tp_trig = 0
        for r in recs:
            i = _window_index(r.time, schedule.for_node(r.node), grace * frame_duration)
            if i < 0:
                fp += 1
            else:
                tp_trig += 1
                hit.add((r.node, i))
        out[det] = {"TP": len(hit), "FP": fp, "FN": total - len(hit), "TP_triggers": tp_trig}
    return out


# network model


def hop_count(node: int, params: NetworkModelParams) -> int:
    """Chebyshev grid distance from ``node`` to the sink at grid position (0, 0)."""
    return max(node % params.grid_cols, node // params.grid_cols)


def network_model(node: int, jitter_draw: float, params: NetworkModelParams) -> tuple[float, int]:
    """Latency (ms) and bytes for one trigger; ``jitter_draw`` is uniform in [-1, 1]."""
    hops = hop_count(node, params)
    return hops * (params.hop_base_ms + params.hop_jitter_ms * jitter_draw), params.message_bytes


def jitter_draws(seed: int, node: int, detector: str, frames: np.ndarray) -> np.ndarray:
    """Per-trigger jitter in [-1, 1], a pure function of (seed, node, detector, frame)."""
    frames = np.asarray(frames, dtype=np.int64)
    if frames.size == 0:
        return np.zeros(0)
    rng = derive_node_stream(seed, node, "network", DETECTOR_NAMES.index(detector))
    table = rng.uniform(-1.0, 1.0, size=int(frames.max()) + 1)
    return table[frames]


def throughput_kb_per_hr(trigger_count: int, params: NetworkModelParams, duration_h: float) -> float:
    return trigger_count * params.message_bytes / (1024.0 * duration_h)


def nearest_rank(values, q: float) -> float | None:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return None
    return float(v[max(1, math.ceil(q / 100.0 * v.size)) - 1])


# per-node simulation


@dataclass
class DetectorTrace:
    frames: np.ndarray
    detail: np.ndarray
    window: np.ndarray  # window index per trigger, -1 for FP


@dataclass
class NodeResult:
    node: int
    events: int
    traces: dict[str, DetectorTrace]


def build_detectors(cfg: SimConfig, names, tinyml_model=None) -> dict:
    dets = {}
    for name in names:
        if name == "tsnfa-mean":
            dets[name] = TsnfaMean(cfg.tsnfa, cfg.L)
        elif name == "tsnfa-median":
            dets[name] = TsnfaMedian(cfg.tsnfa, cfg.L)
        elif name == "zhang":
            dets[name] = Zhang(cfg.zhang)
        elif name == "stft":
            dets[name] = Stft(cfg.m_cal, cfg.stft.n_sigma, cfg.L)
        elif name == "dedar":
            dets[name] = Dedar(cfg.dedar)
        elif name == "sod":
            dets[name] = Sod(cfg.sod)
        elif name == "tinyml":
            if tinyml_model is None:
                raise DetectorNotReady("TinyML selected without trained weights; run train-ae first")
            weights, theta = tinyml_model
            dets[name] = Tinyml(weights, theta)
        else:
            raise ValueError(f"unknown detector {name!r}")
    return dets


def canonical_detectors(names) -> tuple[str, ...]:
    names = set(names)
    unknown = names - set(DETECTOR_NAMES)
    if unknown:
        raise ValueError(f"unknown detectors: {sorted(unknown)}")
    return tuple(d for d in DETECTOR_NAMES if d in names)


def simulate_node(cfg: SimConfig, node: int, windows: tuple[EventWindow, ...], names, tinyml_model=None) -> NodeResult:
    dets = build_detectors(cfg, names, tinyml_model)
    signal = NodeSignal(cfg, node, windows)
    fired_parts: dict[str, list] = {n: [] for n in dets}
    detail_parts: dict[str, list] = {n: [] for n in dets}
    M = cfg.n_frames
    for m0 in range(0, M, FRAMES_PER_CHUNK):
        m1 = min(M, m0 + FRAMES_PER_CHUNK)
        frames = signal.frames(m0, m1)
        spectra = fft_magnitude(frames, cfg.L)
        for name, det in dets.items():
            f, d = det.run(frames, spectra)
            idx = np.flatnonzero(f)
            idx = idx[idx + m0 >= cfg.warmup_frames]
            fired_parts[name].append(idx + m0)
            detail_parts[name].append(d[idx])
    grace_s = cfg.grace_frames * cfg.frame_duration
    traces = {}
    for name in dets:
        frames_hit = np.concatenate(fired_parts[name]).astype(np.int64)
        times = frames_hit * cfg.frame_duration
        traces[name] = DetectorTrace(frames_hit, np.concatenate(detail_parts[name]), classify_times(times, windows, grace_s))
    return NodeResult(node, len(windows), traces)


def _node_job(args):
    cfg, node, windows, names, model = args
    return simulate_node(cfg, node, windows, names, model)


def run_node_results(cfg: SimConfig, names, tinyml_model=None, workers: int = 1, schedule: EventSchedule | None = None):
    names = canonical_detectors(names)
    schedule = schedule or schedule_events(cfg)
    if "tinyml" in names and tinyml_model is None:
        raise DetectorNotReady("TinyML selected without trained weights; run train-ae first")
    jobs = [(cfg, n, schedule.for_node(n), names, tinyml_model) for n in range(cfg.node_count)]
    if workers <= 1:
        results = [_node_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_node_job, jobs, chunksize=1))
    results.sort(key=lambda r: r.node)
    return schedule, names, results


def aggregate(cfg: SimConfig, schedule: EventSchedule, names, results: list[NodeResult]) -> RunReport:
    total = schedule.total_event_count
    node_hours = cfg.node_count * cfg.duration_h
    metrics = {}
    per_node = [{"node": r.node, "events": r.events} for r in results]
    for name in names:
        tp = fp = tp_trig = 0
        latencies = []
        fp_high = 0
        trig_count = 0
        for r, row in zip(results, per_node):
            tr = r.traces[name]
            n_tp = len(set(tr.window[tr.window >= 0].tolist()))
            n_fp = int((tr.window < 0).sum())
            tp += n_tp
            fp += n_fp
            tp_trig += int((tr.window >= 0).sum())
            trig_count += tr.frames.size
            row[name] = {"TP": n_tp, "FP": n_fp, "FN": r.events - n_tp}
            if tr.frames.size:
                jit = jitter_draws(cfg.seed, r.node, name, tr.frames)
                hops = hop_count(r.node, cfg.network)
                latencies.append(hops * (cfg.network.hop_base_ms + cfg.network.hop_jitter_ms * jit))
            fp_frames = tr.frames[tr.window < 0]
            if fp_frames.size:
                P = noise_power_at(fp_frames * cfg.frame_duration, cfg.noise)
                fp_high += int((P > 2.0 * cfg.noise.P0).sum())
        lat = np.concatenate(latencies) if latencies else np.zeros(0)
        metrics[name] = AlgorithmMetrics(
            detector=name,
            tp=tp,
            fp=fp,
            fn=total - tp,
            tp_triggers=tp_trig,
            events=total,
            node_hours=node_hours,
            latency_median_ms=float(np.median(lat)) if lat.size else None,
            latency_p99_ms=nearest_rank(lat, 99.0),
            throughput_kb_per_hr=throughput_kb_per_hr(trig_count, cfg.network, cfg.duration_h),
            fp_high_noise_fraction=fp_high / fp if fp else None,
        )
    return RunReport(config_as_dict(cfg), cfg.seed, cfg.node_count, cfg.duration_h, total, metrics, per_node)


def run_simulation(cfg: SimConfig, detectors=DETECTOR_NAMES, tinyml_model=None, workers: int = 1):
    """Run every selected detector over every node; returns ``(report, node_results)``."""
    schedule, names, results = run_node_results(cfg, detectors, tinyml_model, workers)
    return aggregate(cfg, schedule, names, results), results


def trigger_records(cfg: SimConfig, results: list[NodeResult]):
    """All triggers in (node, detector, frame) order, classified."""
    for r in results:
        for name, tr in r.traces.items():
            for m, d, w in zip(tr.frames.tolist(), tr.detail.tolist(), tr.window.tolist()):
                yield TriggerRecord(r.node, name, m, frame_time(m, cfg), None if math.isnan(d) else d,
                                    "TP" if w >= 0 else "FP")


def write_trigger_log(path: str | Path, cfg: SimConfig, results: list[NodeResult]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIGGER_LOG_COLUMNS)
        for t in trigger_records(cfg, results):
            w.writerow([t.node, t.detector, t.frame, repr(t.time), "" if t.detail is None else repr(t.detail),
                        t.classification])
    return path


def load_tinyml_model(path) -> tuple[AutoencoderWeights, float]:
    from .detectors.tinyml import load_weights

    weights, theta, _ = load_weights(path)
    if theta is None:
        raise DetectorNotReady(f"{path}: weights file carries no calibrated threshold")
    return weights, theta
