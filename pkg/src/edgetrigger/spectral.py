"""Frame spectra and event-band statistics (rectangular window, no taper)."""

from __future__ import annotations

import numpy as np

EVENT_BINS = slice(1, 7)


def fft_magnitude(frame, L: int = 128) -> np.ndarray:
    """``|DFT|`` of one frame (or a stack of frames) for bins 0..L/2."""
    x = np.asarray(frame, dtype=float)
    if x.shape[-1] != L:
        raise ValueError(f"frame length {x.shape[-1]} != {L}")
    return np.abs(np.fft.rfft(x, axis=-1))


def band_bins(spec) -> np.ndarray:
    """Magnitudes of bins 1..6 in order."""
    return np.asarray(spec)[..., EVENT_BINS]


def band_max(spec):
    """Strongest event-band magnitude; out-of-band bins are ignored."""
    out = band_bins(spec).max(axis=-1)
    return float(out) if np.ndim(out) == 0 else out

