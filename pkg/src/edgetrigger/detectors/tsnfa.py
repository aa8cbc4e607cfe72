"""Temporal spectral noise-floor adaptive triggering, mean and median variants.

Both variants look only at FFT bins 1..6, require persistence over
``gamma_d`` frames and track the noise floor over ``gamma_a`` frames.  The
mean variant collapses the band to its strongest bin, smooths with a sliding
mean and tracks the floor with a gated EMA.  The median variant keeps the six
bins separate, runs two cascaded sliding medians per bin and fires when any
raw bin magnitude exceeds ``zeta_k`` times that bin's floor.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..config import TsnfaParams
from ..spectral import band_bins, band_max, fft_magnitude
from .base import Detector, DetectorDecision, DetectorNotReady, safe_ratio


def sliding_mean_push(buffer: deque, x: float, depth: int) -> tuple[float, deque]:
    """Append ``x``, evict beyond ``depth``, and return the mean of what is held."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    buffer.append(x)
    while len(buffer) > depth:
        buffer.popleft()
    return sum(buffer) / len(buffer), buffer


def gated_ema_update(floor: float, obs: float, R: float, p: TsnfaParams) -> float:
    if R < p.r_gate:
        return p.alpha * floor + (1.0 - p.alpha) * obs
    return floor


def median_of(buffer) -> float:
    """Exact median; even sizes average the two central order statistics."""
    values = sorted(buffer)
    n = len(values)
    if n == 0:
        raise ValueError("median of an empty buffer")
    if n % 2:
        return values[n // 2]
    return 0.5 * (values[n // 2 - 1] + values[n // 2])


class TsnfaMean(Detector):
    name = "tsnfa-mean"

    def __init__(self, params: TsnfaParams | None = None, L: int = 128):
        self.p = params or TsnfaParams()
        self.L = L
        self.floor: float | None = None
        self.buffer: deque = deque()
        self.last_ratio: float | None = None
        self.frames_seen = 0

    @property
    def initialized(self) -> bool:
        return self.floor is not None

    def initialize(self, statistic: float) -> None:
        """Seed the floor and persistence buffer from the first frame's band maximum."""
        self.floor = float(statistic)
        self.buffer = deque([float(statistic)])
        self.frames_seen = 1

    def update(self, statistic: float) -> tuple[bool, float]:
        """One pipeline step from an already computed band maximum."""
        if self.floor is None:
            raise DetectorNotReady("TSNFA-mean floor is not initialized")
        p = self.p
        xbar, _ = sliding_mean_push(self.buffer, statistic, p.gamma_d)
        R = safe_ratio(xbar, p.zeta * self.floor)
        fired = R > 1.0 and self.frames_seen >= p.gamma_a
        self.floor = gated_ema_update(self.floor, xbar, R, p)
        self.last_ratio = R
        self.frames_seen += 1
        return fired, R

    def run(self, frames, spectra=None):
        if spectra is None:
            spectra = fft_magnitude(frames, self.L)
        stats = np.asarray(band_max(spectra), dtype=float).reshape(-1)
        fired = np.zeros(stats.size, dtype=bool)
        detail = np.full(stats.size, np.nan)
        for i, x in enumerate(stats.tolist()):
            if self.floor is None:
                self.initialize(x)
                continue
            fired[i], detail[i] = self.update(x)
        return fired, detail


def tsnfa_mean_step(state: TsnfaMean, frame, p: TsnfaParams | None = None):
    if not state.initialized:
        raise DetectorNotReady("TSNFA-mean state must be initialized before stepping")
    if p is not None:
        state.p = p
    fired, R = state.update(band_max(fft_magnitude(frame, state.L)))
    return DetectorDecision(bool(fired), R), state


class TsnfaMedian(Detector):
    name = "tsnfa-median"

    def __init__(self, params: TsnfaParams | None = None, L: int = 128):
        self.p = params or TsnfaParams()
        self.L = L
        self.stage1 = [deque() for _ in range(6)]
        self.stage2 = [deque() for _ in range(6)]
        self.floors = [0.0] * 6
        self.frames_seen = 0

    @property
    def initialized(self) -> bool:
        return self.frames_seen > 0

    def initialize(self, bins) -> None:
        self.frames_seen = 0
        self.update(bins)

    def update(self, bins) -> tuple[bool, float]:
        """One per-bin cascade step; returns (fired, max raw-to-threshold ratio)."""
        p = self.p
        fired = False
        worst = 0.0
        for k in range(6):
            raw = float(bins[k])
            s1 = self.stage1[k]
            s1.append(raw)
            if len(s1) > p.gamma_d:
                s1.popleft()
            s2 = self.stage2[k]
            s2.append(median_of(s1))
            if len(s2) > p.gamma_a:
                s2.popleft()
            self.floors[k] = median_of(s2)
            ratio = safe_ratio(raw, p.zeta_k[k] * self.floors[k])
            worst = max(worst, ratio)
            if raw > p.zeta_k[k] * self.floors[k]:
                fired = True
        fired = fired and self.frames_seen >= p.gamma_a
        self.frames_seen += 1
        return fired, worst

    def run(self, frames, spectra=None):
        if spectra is None:
            spectra = fft_magnitude(frames, self.L)
        bins = np.asarray(band_bins(spectra), dtype=float).reshape(-1, 6)
        M = bins.shape[0]
        fired = np.zeros(M, dtype=bool)
        detail = np.full(M, np.nan)
        p = self.p
        # steady state needs full stage-2 windows; the ramp-up runs step by step
        ramp = min(M, max(0, p.gamma_a + p.gamma_d - self.frames_seen))
        for i in range(ramp):
            if self.frames_seen == 0:
                self.initialize(bins[i])
                continue
            fired[i], detail[i] = self.update(bins[i])
        if ramp < M:
            f, d = self._run_vectorized(bins[ramp:])
            fired[ramp:], detail[ramp:] = f, d
        return fired, detail

    def _run_vectorized(self, bins: np.ndarray):
        p = self.p
        gd, ga = p.gamma_d, p.gamma_a
        M = bins.shape[0]
        hist1 = np.array([list(b) for b in self.stage1]).T  # (gd, 6)
        hist2 = np.array([list(b) for b in self.stage2]).T  # (ga, 6)
        raw_ext = np.concatenate([hist1[1:], bins])  # windows of gd end at each new frame
        s1 = _window_median(raw_ext, gd)
        s1_ext = np.concatenate([hist2[1:], s1])
        floors = np.empty_like(bins)
        chunk = 4096
        for c in range(0, M, chunk):
            floors[c : c + chunk] = _window_median(s1_ext[c : c + chunk + ga - 1], ga)
        zk = np.asarray(p.zeta_k)
        thresh = zk * floors
        fired = (bins > thresh).any(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(thresh > 0, bins / np.where(thresh > 0, thresh, 1.0),
                             np.where(bins > 0, np.inf, 0.0))
        detail = ratio.max(axis=1)
        for k in range(6):
            self.stage1[k] = deque(raw_ext[-gd:, k].tolist())
            self.stage2[k] = deque(s1_ext[-ga:, k].tolist())
            self.floors[k] = float(floors[-1, k])
        self.frames_seen += M
        return fired, detail


def _window_median(x: np.ndarray, n: int) -> np.ndarray:
    """Median of every length-``n`` window along axis 0, matching ``median_of``."""
    w = sliding_window_view(x, n, axis=0)  # (rows, 6, n)
    if n % 2:
        return np.partition(w, n // 2, axis=-1)[..., n // 2]
    part = np.partition(w, (n // 2 - 1, n // 2), axis=-1)
    return 0.5 * (part[..., n // 2 - 1] + part[..., n // 2])


def tsnfa_median_step(state: TsnfaMedian, frame, p: TsnfaParams | None = None):
    if not state.initialized:
        raise DetectorNotReady("TSNFA-median state must be initialized before stepping")
    if p is not None:
        state.p = p
    fired, ratio = state.update(band_bins(fft_magnitude(frame, state.L)))
    return DetectorDecision(bool(fired), ratio), state
