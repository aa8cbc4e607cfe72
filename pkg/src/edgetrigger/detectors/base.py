from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DetectorNotReady(RuntimeError):
    """Raised when a detector is stepped before it is initialized or calibrated."""


@dataclass(frozen=True)
class DetectorDecision:
    fired: bool
    detail: float | None = None

    def __post_init__(self) -> None:
        if self.fired and self.detail is None:
            raise ValueError("a firing decision must carry its detail value")


class Detector:
    """Uniform streaming interface shared by all seven algorithms.

    ``step`` consumes one frame of samples.  ``run`` consumes a block of
    frames and returns ``(fired, detail)`` arrays; it must agree exactly with
    calling ``step`` frame by frame, and leaves the detector in the same state.
    ``detail`` is NaN on frames that carry no diagnostic value.
    """

    name = "detector"

    def step(self, frame) -> DetectorDecision:
        fired, detail = self.run(np.asarray(frame, dtype=float)[None, :])
        d = float(detail[0])
        return DetectorDecision(bool(fired[0]), None if math.isnan(d) else d)

    def run(self, frames: np.ndarray, spectra: np.ndarray | None = None):
        raise NotImplementedError


def safe_ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return math.inf if num > 0 else 0.0
