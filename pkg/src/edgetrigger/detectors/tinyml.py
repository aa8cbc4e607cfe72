"""Dense autoencoder anomaly detector trained on noise-only frames.

Architecture 128 -> 32 -> 8 -> 32 -> 128 with ReLU on every hidden layer and
a linear output (samples are signed).  Training is plain numpy backprop;
deployment freezes both the weights and the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .base import Detector, DetectorDecision, DetectorNotReady

LAYER_SIZES = (128, 32, 8, 32, 128)
WEIGHTS_MAGIC = "edgetrigger-autoencoder"
WEIGHTS_VERSION = 1


@dataclass
class AutoencoderWeights:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    train_seed: int = 0

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def validate(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must pair up layer by layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: bias shape {b.shape} does not match weights {w.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input width {w.shape[0]} != previous output")

    def copy(self) -> AutoencoderWeights:
        return AutoencoderWeights([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.train_seed)

    @classmethod
    def zeros(cls, sizes=LAYER_SIZES) -> AutoencoderWeights:
        return cls([np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])], [np.zeros(b) for b in sizes[1:]])

    @classmethod
    def random(cls, rng: np.random.Generator, sizes=LAYER_SIZES, seed: int = 0) -> AutoencoderWeights:
        ws, bs = [], []
        for a, b in zip(sizes[:-1], sizes[1:]):
            lim = 1.0 / math.sqrt(a)
            ws.append(rng.uniform(-lim, lim, size=(a, b)))
            bs.append(np.zeros(b))
        return cls(ws, bs, seed)


def _forward(w: AutoencoderWeights, x: np.ndarray):
    acts = [x]
    h = x
    last = len(w.weights) - 1
    for i, (W, b) in enumerate(zip(w.weights, w.biases)):
        z = h @ W + b
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def ae_forward(weights: AutoencoderWeights, frame) -> np.ndarray:
    """Reconstruction of one frame ``(L,)`` or a batch ``(n, L)``."""
    x = np.asarray(frame, dtype=float)
    if x.shape[-1] != weights.weights[0].shape[0]:
        raise ValueError(f"input width {x.shape[-1]} != {weights.weights[0].shape[0]}")
    return _forward(weights, x)[-1]


def reconstruction_error(weights: AutoencoderWeights, frames) -> np.ndarray:
    x = np.asarray(frames, dtype=float)
    r = ae_forward(weights, x)
    return np.mean((x - r) ** 2, axis=-1)


def loss_and_grads(weights: AutoencoderWeights, x: np.ndarray):
    """Mean over the batch of the per-frame MSE, and its exact gradient."""
    acts = _forward(weights, x)
    n, L = x.shape
    diff = acts[-1] - x
    loss = float(np.mean(diff**2))
    delta = 2.0 * diff / (n * L)
    gw: list[np.ndarray] = [None] * len(weights.weights)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(weights.weights)  # type: ignore[list-item]
    for i in range(len(weights.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights.weights[i].T) * (acts[i] > 0)
    return loss, gw, gb


@dataclass
class TrainResult:
    weights: AutoencoderWeights
    losses: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def train_autoencoder(
    dataset,
    *,
    seed: int = 0,
    max_epochs: int = 200,
    batch_size: int = 128,
    learning_rate: float = 1e-3,
    tol: float = 1e-4,
    optimizer: str = "adam",
    sizes=None,
    init: AutoencoderWeights | None = None,
) -> TrainResult:
    """Minimize reconstruction MSE on noise-only frames.

    ``optimizer="adam"`` runs shuffled mini-batches; ``optimizer="gd"`` is
    plain full-batch gradient descent with a fixed step.  Training stops after
    ``max_epochs`` or once the epoch loss improves by less than ``tol``
    relative.  ``losses[0]`` is the loss before the first update.
    """
    x = np.asarray(dataset, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("training needs a non-empty (n, L) dataset")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    if sizes is None:
        sizes = (x.shape[1],) + LAYER_SIZES[1:-1] + (x.shape[1],)
    w = init.copy() if init is not None else AutoencoderWeights.random(rng, sizes, seed)
    w.train_seed = seed
    params = w.weights + w.biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    t = 0
    losses = [float(np.mean((ae_forward(w, x) - x) ** 2))]
    for _epoch in range(max_epochs):
        if optimizer == "gd":
            _, gw, gb = loss_and_grads(w, x)
            for p, g in zip(params, gw + gb):
                p -= learning_rate * g
        elif optimizer == "adam":
            order = rng.permutation(x.shape[0])
            for s in range(0, x.shape[0], batch_size):
                _, gw, gb = loss_and_grads(w, x[order[s : s + batch_size]])
                t += 1
                for p, g, a, v in zip(params, gw + gb, m1, m2):
                    a *= b1
                    a += (1 - b1) * g
                    v *= b2
                    v += (1 - b2) * g * g
                    p -= learning_rate * (a / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        else:
            raise ValueError(f"unknown optimizer {optimizer!r}")
        losses.append(float(np.mean((ae_forward(w, x) - x) ** 2)))
        prev, cur = losses[-2], losses[-1]
        if prev > 0 and 0 <= (prev - cur) / prev < tol:
            break
    return TrainResult(w, losses)


def nearest_rank_percentile(values, q: float) -> float:
    """Smallest value with at least ``q`` percent of the sample at or below it."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("percentile of an empty sample")
    rank = max(1, math.ceil(q / 100.0 * v.size))
    return float(v[rank - 1])


def calibrate_threshold(weights: AutoencoderWeights, validation, q: float = 99.0) -> float:
    validation = np.asarray(validation, dtype=float)
    if validation.ndim != 2 or validation.shape[0] < 100:
        raise ValueError("threshold calibration needs at least 100 validation frames")
    return nearest_rank_percentile(reconstruction_error(weights, validation), q)


class Tinyml(Detector):
    name = "tinyml"

    def __init__(self, weights: AutoencoderWeights | None = None, theta_ml: float | None = None):
        self.weights = weights
        self.theta_ml = theta_ml

    @property
    def ready(self) -> bool:
        return self.weights is not None and self.theta_ml is not None

    def run(self, frames, spectra=None):
        if not self.ready:
            raise DetectorNotReady("TinyML needs trained weights and a calibrated threshold")
        e = reconstruction_error(self.weights, np.asarray(frames, dtype=float).reshape(-1, self.weights.sizes[0]))
        return e > self.theta_ml, e


def tinyml_step(state: Tinyml, frame) -> DetectorDecision:
    if not state.ready:
        raise DetectorNotReady("TinyML needs trained weights and a calibrated threshold")
    e = float(reconstruction_error(state.weights, np.asarray(frame, dtype=float)[None, :])[0])
    return DetectorDecision(e > state.theta_ml, e)


def save_weights(path: str | Path, weights: AutoencoderWeights, theta_ml: float | None = None, **meta) -> Path:
    """Versioned weights file: text header, a ``--`` line, then little-endian float64 arrays."""
    weights.validate()
    path = Path(path)
    lines = [f"{WEIGHTS_MAGIC} v{WEIGHTS_VERSION}", f"layers = {','.join(map(str, weights.sizes))}",
             f"train_seed = {weights.train_seed}",
             f"theta_ml = {'none' if theta_ml is None else repr(float(theta_ml))}"]
    lines += [f"{k} = {v}" for k, v in sorted(meta.items())]
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes() for w, b in zip(weights.weights, weights.biases) for a in (w, b)
    )
    path.write_bytes(("\n".join(lines) + "\n--\n").encode() + payload)
    return path


def load_weights(path: str | Path) -> tuple[AutoencoderWeights, float | None, dict[str, str]]:
    raw = Path(path).read_bytes()
    head, sep, payload = raw.partition(b"\n--\n")
    if not sep:
        raise ValueError(f"{path}: missing header terminator")
    lines = head.decode().splitlines()
    if lines[0] != f"{WEIGHTS_MAGIC} v{WEIGHTS_VERSION}":
        raise ValueError(f"{path}: unsupported weights format {lines[0]!r}")
    meta = {}
    for line in lines[1:]:
        k, _, v = line.partition("=")
        meta[k.strip()] = v.strip()
    sizes = [int(s) for s in meta["layers"].split(",")]
    data = np.frombuffer(payload, dtype="<f8")
    expected = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    if data.size != expected:
        raise ValueError(f"{path}: expected {expected} parameters, found {data.size}")
    ws, bs, pos = [], [], 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        ws.append(data[pos : pos + a * b].reshape(a, b).copy())
        pos += a * b
        bs.append(data[pos : pos + b].copy())
        pos += b
    theta = None if meta["theta_ml"] == "none" else float(meta["theta_ml"])
    w = AutoencoderWeights(ws, bs, int(meta["train_seed"]))
    return w, theta, meta


# dataset generation and the full train-then-calibrate job

TRAIN_NODE_BASE = 1_000_000
FRAMES_PER_TRAIN_NODE = 1000


def noise_only_frames(cfg, n_frames: int, split: int = 0, power: float | None = None) -> np.ndarray:
    """Event-free frames at constant noise power (default P0).

    Frames come from synthetic node ids far above any simulated node and are
    keyed by the training seed, so ``split`` 0 (training), 1 (validation) and
    higher (held-out checks) never share a sample.
    """
    from ..signal import NodeSignal

    changes = {"noise.drift_on": False, "events.rate_per_node_hour": 0.0, "seed": cfg.tinyml.train_seed}
    if power is not None:
        changes["noise.P0"] = float(power)
    need_s = FRAMES_PER_TRAIN_NODE * cfg.frame_duration
    changes["duration_s"] = max(need_s, cfg.warmup_frames * cfg.frame_duration)
    dcfg = cfg.replace(**changes)
    out = []
    node = TRAIN_NODE_BASE * (split + 1)
    left = n_frames
    while left > 0:
        k = min(left, FRAMES_PER_TRAIN_NODE)
        out.append(NodeSignal(dcfg, node).frames(0, k))
        left -= k
        node += 1
    return np.concatenate(out) if out else np.zeros((0, cfg.L))


def train_and_calibrate(cfg, optimizer: str = "adam") -> tuple[TrainResult, float]:
    p = cfg.tinyml
    train = noise_only_frames(cfg, p.n_train, split=0)
    val = noise_only_frames(cfg, p.n_val, split=1)
    result = train_autoencoder(
        train,
        seed=p.train_seed,
        max_epochs=p.max_epochs,
        batch_size=p.batch_size,
        learning_rate=p.learning_rate,
        tol=p.tol,
        optimizer=optimizer,
    )
    return result, calibrate_threshold(result.weights, val, p.percentile)
