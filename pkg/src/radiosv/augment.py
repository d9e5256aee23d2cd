"""Band-and-noise augmentation.

Waveforms get a random-cutoff Butterworth low-pass; log-mel features get
multiplicative Gaussian noise on the right singular vectors of their rank-k
SVD.  Time/frequency masking and dropout are provided as baselines.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .dsp import AudioBuffer, design_butterworth_lowpass, sos_filter
from .errors import ConfigError, RadioSVError
from .features import FeatureMatrix, _low_rank, log_mel_fbank, svd

MASK_KINDS = ("specaug-time", "specaug-freq", "dropout")


@dataclass(frozen=True)
class AugmentConfig:
    p0: float = 0.5
    cutoff_set_hz: tuple[float, ...] = (2000.0, 3000.0, 5000.0, 7000.0)
    filter_order: int = 8
    noise_lambda: float = 0.1
    rank_k: int | None = None  # None means full rank, min(t, f)
    mask_max_time: int = 20
    mask_max_freq: int = 10
    seed: int = 0
    n_mels: int = 80
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "cutoff_set_hz", tuple(float(c) for c in self.cutoff_set_hz))
        if not 0.0 <= self.p0 <= 1.0:
            raise ConfigError(f"p0 must be in [0, 1], got {self.p0}")
        if self.noise_lambda < 0:
            raise ConfigError(f"noise_lambda must be >= 0, got {self.noise_lambda}")
        if not self.cutoff_set_hz:
            raise ConfigError("cutoff_set_hz must not be empty")
        if any(c <= 0 for c in self.cutoff_set_hz):
            raise ConfigError("cutoffs must be positive")
        if self.rank_k is not None and self.rank_k < 1:
            raise ConfigError(f"rank_k must be >= 1 or full, got {self.rank_k}")
        if self.mask_max_time < 0 or self.mask_max_freq < 0:
            raise ConfigError("mask bounds must be >= 0")

    def validate_for_rate(self, sample_rate: int) -> None:
        bad = [c for c in self.cutoff_set_hz if c >= sample_rate / 2]
        if bad:
            raise ConfigError(f"cutoffs {bad} are not below Nyquist for {sample_rate} Hz audio")

    def replace(self, **changes) -> "AugmentConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class AugmentResult:
    features: FeatureMatrix
    augmented: bool
    cutoff_hz: float | None = None


def bandwidth_manipulate(
    audio: AudioBuffer,
    config: AugmentConfig,
    rng: np.random.Generator,
    cutoff_hz: float | None = None,
) -> tuple[AudioBuffer, float]:
    """Low-pass ``audio`` at a cutoff drawn uniformly from ``config.cutoff_set_hz``.

    Pass ``cutoff_hz`` to skip the draw.  Returns the filtered audio and the
    cutoff used.
    """
    if cutoff_hz is None:
        cutoff_hz = config.cutoff_set_hz[int(rng.integers(len(config.cutoff_set_hz)))]
    filt = design_butterworth_lowpass(config.filter_order, cutoff_hz, audio.sample_rate)
    return sos_filter(audio, filt), cutoff_hz


def make_mask(shape, kind: str, rng: np.random.Generator, max_len: int = 0, p: float = 0.0,
              length: int | None = None) -> np.ndarray:
    """Binary mask for :func:`mask_augment`."""
    t, f = shape
    mask = np.ones((t, f))
    if kind == "dropout":
        if not 0.0 <= p <= 1.0:
            raise RadioSVError(f"dropout probability must be in [0, 1], got {p}")
        if p > 0.0:
            mask = (rng.random((t, f)) >= p).astype(np.float64)
        return mask
    if kind not in MASK_KINDS:
        raise RadioSVError(f"unknown mask kind {kind!r}; expected one of {MASK_KINDS}")
    axis_len = t if kind == "specaug-time" else f
    bound = max_len if length is None else length
    if bound < 0 or bound > axis_len:
        raise RadioSVError(f"mask length bound {bound} exceeds axis length {axis_len}")
    n = int(rng.integers(0, max_len + 1)) if length is None else int(length)
    start = int(rng.integers(0, axis_len - n + 1))
    if kind == "specaug-time":
        mask[start:start + n, :] = 0.0
    else:
        mask[:, start:start + n] = 0.0
    return mask


def mask_augment(X: FeatureMatrix, kind: str, rng: np.random.Generator, max_len: int = 0,
                 p: float = 0.0, length: int | None = None) -> FeatureMatrix:
    """Elementwise product of ``X`` with a random binary mask.

    ``specaug-time`` / ``specaug-freq`` zero one contiguous band whose length
    is uniform on ``0..max_len`` (or exactly ``length``); ``dropout`` zeroes
    each entry independently with probability ``p``.
    """
    mask = make_mask(X.shape, kind, rng, max_len=max_len, p=p, length=length)
    return X.with_values(X.values * mask)


def noise_inject(X: FeatureMatrix, k: int | None, lam: float, rng: np.random.Generator) -> FeatureMatrix:
    """Rank-k reconstruction with ``V_k^T`` scaled elementwise by ``1 + N(0, lam^2)``."""
    t, f = X.shape
    r = min(t, f)
    k = r if k is None else k
    if int(k) != k or not 1 <= k <= r:
        raise RadioSVError(f"rank k must be in [1, {r}], got {k}")
    if lam < 0:
        raise RadioSVError(f"noise lambda must be >= 0, got {lam}")
    k = int(k)
    factors = svd(X)
    vt_k = factors.V[:, :k].T
    if lam > 0:
        vt_k = (1.0 + rng.normal(0.0, lam, size=vt_k.shape)) * vt_k
    return X.with_values(_low_rank(factors.U[:, :k], factors.sigma[:k], vt_k))


def extract_features(audio: AudioBuffer, config: AugmentConfig) -> FeatureMatrix:
    return log_mel_fbank(audio, config.n_mels, config.frame_length_ms, config.frame_shift_ms)


def band_noise_augment(audio: AudioBuffer, config: AugmentConfig, rng: np.random.Generator) -> AugmentResult:
    """Gate on ``u < p0`` with ``u ~ U[0, 1)``; if it fires, band-limit, extract, inject noise."""
    config.validate_for_rate(audio.sample_rate)
    if rng.random() < config.p0:
        filtered, cutoff = bandwidth_manipulate(audio, config, rng)
        feats = extract_features(filtered, config)
        feats = noise_inject(feats, _clamp_rank(config.rank_k, feats), config.noise_lambda, rng)
        return AugmentResult(feats, True, cutoff)
    return AugmentResult(extract_features(audio, config), False, None)


def _clamp_rank(rank_k, feats: FeatureMatrix):
    if rank_k is None:
        return None
    return min(rank_k, min(feats.shape))
