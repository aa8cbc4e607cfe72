"""Comparison detectors: time-domain adaptive peak, fixed spectral mask,
broadband energy ratio and send-on-delta."""

from __future__ import annotations

import math

import numpy as np

from ..config import DedarParams, SodParams, ZhangParams
from ..spectral import band_max, fft_magnitude
from .base import Detector, DetectorDecision, DetectorNotReady, safe_ratio


class Zhang(Detector):
    """Frame peak |x| against ``zeta`` times a gated EMA of past peaks.

    The reported ratio is peak over threshold, but the floor gate compares the
    peak with the floor itself (``X_Z / N_Z < r_gate``), a much stricter gate.
    """

    name = "zhang"

    def __init__(self, params: ZhangParams | None = None):
        self.p = params or ZhangParams()
        self.floor: float | None = None

    def update(self, peak: float) -> tuple[bool, float]:
        if self.floor is None:
            raise DetectorNotReady("Zhang floor is not initialized")
        p = self.p
        prev = self.floor
        fired = peak > p.zeta * prev
        if safe_ratio(peak, prev) < p.r_gate:
            self.floor = p.beta * prev + (1.0 - p.beta) * peak
        return fired, safe_ratio(peak, p.zeta * prev)

    def run(self, frames, spectra=None):
        peaks = np.abs(np.asarray(frames, dtype=float)).max(axis=-1).reshape(-1)
        fired = np.zeros(peaks.size, dtype=bool)
        detail = np.full(peaks.size, np.nan)
        for i, x in enumerate(peaks.tolist()):
            if self.floor is None:
                self.floor = x
                continue
            fired[i], detail[i] = self.update(x)
        return fired, detail


def zhang_step(state: Zhang, frame):
    fired, R = state.update(float(np.max(np.abs(frame))))
    return DetectorDecision(bool(fired), R), state


class Stft(Detector):
    """Band maximum against a threshold frozen after calibration.

    Used as a streaming detector, the first ``m_cal`` frames are absorbed as
    calibration data and never fire.
    """

    name = "stft"

    def __init__(self, m_cal: int = 128, n_sigma: float = 3.0, L: int = 128):
        self.m_cal = m_cal
        self.n_sigma = n_sigma
        self.L = L
        self.theta0: float | None = None
        self._cal: list[float] = []

    @property
    def calibrated(self) -> bool:
        return self.theta0 is not None

    def calibrate_from_statistics(self, stats) -> float:
        if self.calibrated:
            raise DetectorNotReady("STFT threshold is already frozen")
        stats = np.asarray(stats, dtype=float)
        if stats.size < 2:
            raise ValueError("calibration needs at least two frames")
        self.theta0 = float(stats.mean() + self.n_sigma * stats.std(ddof=1))
        return self.theta0

    def run(self, frames, spectra=None):
        if spectra is None:
            spectra = fft_magnitude(frames, self.L)
        stats = np.asarray(band_max(spectra), dtype=float).reshape(-1)
        fired = np.zeros(stats.size, dtype=bool)
        detail = np.full(stats.size, np.nan)
        start = 0
        if not self.calibrated:
            need = self.m_cal - len(self._cal)
            self._cal.extend(stats[:need].tolist())
            start = min(need, stats.size)
            if len(self._cal) >= self.m_cal:
                self.calibrate_from_statistics(self._cal)
                self._cal = []
            else:
                return fired, detail
        rest = stats[start:]
        fired[start:] = rest > self.theta0
        detail[start:] = rest / self.theta0 if self.theta0 > 0 else np.where(rest > 0, np.inf, 0.0)
        return fired, detail


def stft_calibrate(frames, state: Stft) -> Stft:
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 2 or frames.shape[0] < 2:
        raise ValueError("calibration needs at least two frames")
    state.calibrate_from_statistics(band_max(fft_magnitude(frames, state.L)))
    return state


def stft_step(state: Stft, frame) -> DetectorDecision:
    if not state.calibrated:
        raise DetectorNotReady("STFT must be calibrated before stepping")
    x = band_max(fft_magnitude(frame, state.L))
    return DetectorDecision(bool(x > state.theta0), safe_ratio(x, state.theta0))


class Dedar(Detector):
    """Frame energy against an always-updating EMA of past frame energies."""

    name = "dedar"

    def __init__(self, params: DedarParams | None = None):
        self.p = params or DedarParams()
        self.e_long: float | None = None

    def update(self, energy: float) -> tuple[bool, float]:
        if self.e_long is None:
            raise DetectorNotReady("DEDaR baseline is not initialized")
        p = self.p
        R = safe_ratio(energy, self.e_long)
        self.e_long = p.beta_e * self.e_long + (1.0 - p.beta_e) * energy
        return R > p.zeta, R

    def run(self, frames, spectra=None):
        frames = np.asarray(frames, dtype=float)
        energy = np.einsum("ij,ij->i", frames.reshape(-1, frames.shape[-1]), frames.reshape(-1, frames.shape[-1]))
        fired = np.zeros(energy.size, dtype=bool)
        detail = np.full(energy.size, np.nan)
        for i, e in enumerate(energy.tolist()):
            if self.e_long is None:
                self.e_long = e
                continue
            fired[i], detail[i] = self.update(e)
        return fired, detail


def dedar_step(state: Dedar, frame):
    frame = np.asarray(frame, dtype=float)
    fired, R = state.update(float(frame @ frame))
    return DetectorDecision(bool(fired), R), state


class Sod(Detector):
    """Send-on-delta transmit gate; a frame fires when it transmitted at least once."""

    name = "sod"

    def __init__(self, params: SodParams | None = None):
        self.p = params or SodParams()
        self.x_ref = 0.0
        self.transmits = 0

    def run(self, frames, spectra=None):
        frames = np.asarray(frames, dtype=float)
        L = frames.shape[-1]
        x = frames.reshape(-1)
        counts = np.zeros(x.size // L, dtype=np.int64)
        delta = self.p.delta
        i = 0
        chunk = 4096
        while i < x.size and math.isfinite(delta):
            seg = np.abs(x[i : i + chunk] - self.x_ref) > delta
            hit = int(np.argmax(seg))
            if not seg[hit]:
                i += chunk
                chunk = min(chunk * 2, 4096)
                continue
            j = i + hit
            self.x_ref = float(x[j])
            counts[j // L] += 1
            i = j + 1
            chunk = 64 if hit < 64 else 4096
        self.transmits += int(counts.sum())
        fired = counts > 0
        return fired, np.where(fired, counts.astype(float), np.nan)


def sod_step(state: Sod, sample: float) -> tuple[bool, Sod]:
    if abs(sample - state.x_ref) > state.p.delta:
        state.x_ref = float(sample)
        state.transmits += 1
        return True, state
    return False, state


def sod_frame_adapter(state: Sod, frame) -> tuple[DetectorDecision, Sod]:
    count = 0
    for sample in np.asarray(frame, dtype=float).tolist():
        sent, state = sod_step(state, sample)
        count += sent
    return DetectorDecision(count > 0, float(count) if count else None), state
