from .base import Detector, DetectorDecision, DetectorNotReady
from .baseline import (
    Dedar,
    Sod,
    Stft,
    Zhang,
    dedar_step,
    sod_frame_adapter,
    sod_step,
    stft_calibrate,
    stft_step,
    zhang_step,
)
from .tinyml import (
    AutoencoderWeights,
    Tinyml,
    ae_forward,
    calibrate_threshold,
    load_weights,
    save_weights,
    tinyml_step,
    train_autoencoder,
)
from .tsnfa import (
    TsnfaMean,
    TsnfaMedian,
    gated_ema_update,
    median_of,
    sliding_mean_push,
    tsnfa_mean_step,
    tsnfa_median_step,
)

DETECTOR_NAMES = ("tsnfa-mean", "tsnfa-median", "zhang", "stft", "dedar", "sod", "tinyml")

__all__ = [
    "DETECTOR_NAMES",
    "AutoencoderWeights",
    "Dedar",
    "Detector",
    "DetectorDecision",
    "DetectorNotReady",
    "Sod",
    "Stft",
    "Tinyml",
    "TsnfaMean",
    "TsnfaMedian",
    "Zhang",
    "ae_forward",
    "calibrate_threshold",
    "dedar_step",
    "gated_ema_update",
    "load_weights",
    "median_of",
    "save_weights",
    "sliding_mean_push",
    "sod_frame_adapter",
    "sod_step",
    "stft_calibrate",
    "stft_step",
    "tinyml_step",
    "train_autoencoder",
    "tsnfa_mean_step",
    "tsnfa_median_step",
    "zhang_step",
]
