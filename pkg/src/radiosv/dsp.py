"""Time-domain DSP primitives.

Butterworth low-pass design (bilinear transform with cutoff prewarping),
cascaded biquad filtering, magnitude response evaluation and rational
resampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import signal as sps

from . import _backend
from .errors import InvalidCutoffError, InvalidOrderError, RadioSVError, SampleRateMismatchError

MAX_ORDER = 16

# polyphase anti-aliasing filter: half length per unit rate, Kaiser beta and
# cutoff as a fraction of the lower Nyquist rate
_RESAMPLE_HALF_LEN = 32
_RESAMPLE_BETA = 8.0
_RESAMPLE_CUTOFF = 0.9


@dataclass(frozen=True)
class AudioBuffer:
    """Mono PCM samples (nominal range [-1, 1]) with an integer sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise RadioSVError(f"audio must be one-dimensional, got shape {samples.shape}")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise RadioSVError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise RadioSVError("audio contains non-finite samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class BiquadSection:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def is_stable(self) -> bool:
        return abs(self.a2) < 1.0 and abs(self.a1) < 1.0 + self.a2

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.b0, self.b1, self.b2, self.a1, self.a2)


@dataclass(frozen=True)
class SosFilter:
    sections: tuple[BiquadSection, ...]
    order: int
    cutoff_hz: float
    sample_rate_hz: int
    _coefs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.sections) != math.ceil(self.order / 2):
            raise RadioSVError(
                f"order {self.order} needs {math.ceil(self.order / 2)} sections, got {len(self.sections)}"
            )
        coefs = np.array([s.as_tuple() for s in self.sections], dtype=np.float64).reshape(-1, 5)
        object.__setattr__(self, "_coefs", np.ascontiguousarray(coefs))

    @property
    def coefficients(self) -> np.ndarray:
        """``(n_sections, 5)`` array of ``b0, b1, b2, a1, a2`` rows."""
        return self._coefs.copy()


def _check_design_args(order, cutoff_hz, sample_rate_hz):
    if int(order) != order or not 1 <= order <= MAX_ORDER:
        raise InvalidOrderError(f"order must be an integer in [1, {MAX_ORDER}], got {order}")
    if sample_rate_hz <= 0:
        raise InvalidCutoffError(f"sample rate must be positive, got {sample_rate_hz}")
    if not 0.0 < cutoff_hz < sample_rate_hz / 2.0:
        raise InvalidCutoffError(
            f"cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({sample_rate_hz / 2.0} Hz)"
        )


def design_butterworth_lowpass(order: int, cutoff_hz: float, sample_rate_hz: int) -> SosFilter:
    """Design an ``order``-pole Butterworth low-pass as a biquad cascade.

    The analog prototype is scaled to the prewarped cutoff
    ``2 fs tan(pi fc / fs)`` and mapped with the bilinear transform, so the
    digital response is exactly -3.0103 dB at ``cutoff_hz``.  Each section
    has both zeros at z = -1 and unit DC gain.  Odd orders carry one
    first-order section stored with ``b2 = a2 = 0``.
    """
    _check_design_args(order, cutoff_hz, sample_rate_hz)
    order = int(order)
    fs2 = 2.0 * sample_rate_hz
    warped = fs2 * math.tan(math.pi * cutoff_hz / sample_rate_hz)

    sections = []
    # upper-half-plane analog poles; the conjugates are implied
    for k in range(order // 2):
        theta = math.pi * (2 * k + order + 1) / (2 * order)
        s = warped * complex(math.cos(theta), math.sin(theta))
        z = (fs2 + s) / (fs2 - s)
        a1 = -2.0 * z.real
        a2 = z.real * z.real + z.imag * z.imag
        g = (1.0 + a1 + a2) / 4.0
        sections.append(BiquadSection(g, 2.0 * g, g, a1, a2))
    # least resonant section first
    sections.sort(key=lambda sec: sec.a2)
    if order % 2:
        z = (fs2 - warped) / (fs2 + warped)
        g = (1.0 - z) / 2.0
        sections.insert(0, BiquadSection(g, g, 0.0, -z, 0.0))

    return SosFilter(tuple(sections), order, float(cutoff_hz), int(sample_rate_hz))


def sos_filter(audio: AudioBuffer, filt: SosFilter) -> AudioBuffer:
    """Causal single-pass filtering with zero initial state."""
    if filt.sample_rate_hz != audio.sample_rate:
        raise SampleRateMismatchError(
            f"filter designed for {filt.sample_rate_hz} Hz, audio is {audio.sample_rate} Hz"
        )
    if len(audio) == 0:
        raise RadioSVError("cannot filter an empty signal")
    y = sosfilt_array(filt._coefs, audio.samples)
    return AudioBuffer(y, audio.sample_rate)


def sosfilt_array(coefs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Run the selected kernel backend on raw arrays."""
    coefs = np.ascontiguousarray(coefs, dtype=np.float64).reshape(-1, 5)
    x = np.ascontiguousarray(x, dtype=np.float64)
    return _backend.sosfilt(coefs, x)


def frequency_response(filt: SosFilter, freqs_hz) -> np.ndarray:
    """Complex response of the cascade at each frequency in ``freqs_hz``."""
    freqs = np.asarray(freqs_hz, dtype=np.float64)
    zinv = np.exp(-2j * np.pi * freqs / filt.sample_rate_hz)
    h = np.ones_like(zinv)
    for b0, b1, b2, a1, a2 in filt._coefs:
        h = h * (b0 + b1 * zinv + b2 * zinv**2) / (1.0 + a1 * zinv + a2 * zinv**2)
    return h


def magnitude_response(filt: SosFilter, freq_hz):
    """|H(e^{j 2 pi f / fs})| as the product of per-section magnitudes.

    Accepts a scalar or an array of frequencies in ``[0, fs/2]``.
    """
    freqs = np.asarray(freq_hz, dtype=np.float64)
    nyquist = filt.sample_rate_hz / 2.0
    if np.any(freqs < 0.0) or np.any(freqs > nyquist):
        raise InvalidCutoffError(f"frequencies must lie in [0, {nyquist}] Hz")
    mag = np.abs(frequency_response(filt, freqs))
    if mag.ndim == 0:
        return float(mag)
    return mag


def _resample_taps(up: int, down: int) -> np.ndarray:
    max_rate = max(up, down)
    n_taps = 2 * _RESAMPLE_HALF_LEN * max_rate + 1
    return sps.firwin(n_taps, _RESAMPLE_CUTOFF / max_rate, window=("kaiser", _RESAMPLE_BETA))


def resample_array(x: np.ndarray, source_rate: int, target_rate: int) -> np.ndarray:
    """Band-limited rational resampling of a real or complex array.

    Output length is ``round(len(x) * target / source)``.
    """
    if target_rate <= 0 or source_rate <= 0:
        raise RadioSVError(f"sample rates must be positive, got {source_rate} -> {target_rate}")
    if target_rate == source_rate:
        return np.array(x, copy=True)
    ratio = Fraction(int(target_rate), int(source_rate))
    up, down = ratio.numerator, ratio.denominator
    n_out = (2 * len(x) * up + down) // (2 * down)
    y = sps.resample_poly(x, up, down, window=_resample_taps(up, down), padtype="edge")
    return y[:n_out]


def resample(audio: AudioBuffer, target_rate: int) -> AudioBuffer:
    if int(target_rate) != target_rate or target_rate <= 0:
        raise RadioSVError(f"target rate must be a positive integer, got {target_rate}")
    if target_rate == audio.sample_rate:
        return AudioBuffer(audio.samples.copy(), audio.sample_rate)
    return AudioBuffer(resample_array(audio.samples, audio.sample_rate, int(target_rate)), int(target_rate))
