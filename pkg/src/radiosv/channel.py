"""Software FM radio link: modulate, AWGN channel, demodulate, band-limit.

Defaults follow the GNU Radio NBFM/WBFM block conventions: NBFM uses 5 kHz
deviation at a 64 kHz quadrature rate, WBFM 75 kHz at 384 kHz, both with a
16 kHz audio rate.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np

from .dsp import AudioBuffer, design_butterworth_lowpass, resample, resample_array, sosfilt_array
from .errors import ConfigError, RadioSVError, SampleRateMismatchError


class Mode(str, enum.Enum):
    NBFM = "nbfm"
    WBFM = "wbfm"


@dataclass(frozen=True)
class ChannelSpec:
    mode: Mode = Mode.NBFM
    audio_rate_hz: int = 16000
    quad_rate_hz: int = 64000
    max_deviation_hz: float = 5000.0
    rx_cutoff_hz: float = 2700.0
    rx_filter_order: int = 12
    noise_voltage: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.audio_rate_hz <= 0 or self.quad_rate_hz <= 0:
            raise ConfigError("sample rates must be positive")
        if self.max_deviation_hz <= 0:
            raise ConfigError("max_deviation_hz must be positive")
        if self.noise_voltage < 0:
            raise ConfigError(f"noise_voltage must be >= 0, got {self.noise_voltage}")
        if self.quad_rate_hz < 2 * (self.rx_cutoff_hz + self.max_deviation_hz):
            raise ConfigError(
                f"quad_rate_hz {self.quad_rate_hz} is below the Carson bound "
                f"2 * ({self.rx_cutoff_hz} + {self.max_deviation_hz})"
            )
        if not 0 < self.rx_cutoff_hz < self.quad_rate_hz / 2:
            raise ConfigError("rx_cutoff_hz must lie below the quadrature Nyquist rate")
        if self.mode is Mode.NBFM and self.rx_cutoff_hz >= self.audio_rate_hz / 2:
            raise ConfigError("NBFM rx_cutoff_hz must lie below the audio Nyquist rate")

    @classmethod
    def nbfm(cls, **overrides) -> "ChannelSpec":
        return cls(**overrides)

    @classmethod
    def wbfm(cls, **overrides) -> "ChannelSpec":
        params = dict(
            mode=Mode.WBFM,
            quad_rate_hz=384000,
            max_deviation_hz=75000.0,
            rx_cutoff_hz=16000.0,
        )
        params.update(overrides)
        return cls(**params)

    @classmethod
    def for_mode(cls, mode, **overrides) -> "ChannelSpec":
        if Mode(mode) is Mode.WBFM:
            return cls.wbfm(**overrides)
        return cls.nbfm(**overrides)

    def replace(self, **changes) -> "ChannelSpec":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ComplexBaseband:
    iq: np.ndarray
    sample_rate: int

    def __post_init__(self):
        iq = np.asarray(self.iq, dtype=np.complex128)
        if iq.ndim != 1:
            raise RadioSVError("baseband must be one-dimensional")
        if not np.all(np.isfinite(iq)):
            raise RadioSVError("baseband contains non-finite samples")
        object.__setattr__(self, "iq", iq)

    def __len__(self):
        return self.iq.shape[0]


def fm_modulate(audio: AudioBuffer, spec: ChannelSpec) -> ComplexBaseband:
    if audio.sample_rate != spec.audio_rate_hz:
        raise SampleRateMismatchError(
            f"audio is {audio.sample_rate} Hz, channel expects {spec.audio_rate_hz} Hz"
        )
    if len(audio) == 0:
        raise RadioSVError("cannot modulate an empty signal")
    m = audio.samples
    peak = np.max(np.abs(m))
    if peak > 1.0:
        m = m / peak
    m = resample_array(m, spec.audio_rate_hz, spec.quad_rate_hz)
    phase = np.cumsum((2.0 * np.pi * spec.max_deviation_hz / spec.quad_rate_hz) * m)
    return ComplexBaseband(np.exp(1j * phase), spec.quad_rate_hz)


def awgn_channel(signal: ComplexBaseband, noise_voltage: float, seed: int) -> ComplexBaseband:
    """Add complex white Gaussian noise with per-component std ``noise_voltage``."""
    if noise_voltage < 0:
        raise RadioSVError(f"noise_voltage must be >= 0, got {noise_voltage}")
    if noise_voltage == 0:
        return ComplexBaseband(signal.iq.copy(), signal.sample_rate)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_voltage, size=(2, len(signal)))
    return ComplexBaseband(signal.iq + (noise[0] + 1j * noise[1]), signal.sample_rate)


def quadrature_discriminate(iq: np.ndarray, quad_rate_hz: float, max_deviation_hz: float) -> np.ndarray:
    """Phase step between consecutive samples scaled to the deviation; first sample is 0."""
    out = np.zeros(iq.shape[0])
    out[1:] = np.angle(iq[1:] * np.conj(iq[:-1])) * (quad_rate_hz / (2.0 * np.pi * max_deviation_hz))
    return out


def fm_demodulate(signal: ComplexBaseband, spec: ChannelSpec) -> AudioBuffer:
    if signal.sample_rate != spec.quad_rate_hz:
        raise SampleRateMismatchError(
            f"baseband is {signal.sample_rate} Hz, channel expects {spec.quad_rate_hz} Hz"
        )
    if len(signal) < 2:
        raise RadioSVError("demodulation needs at least 2 samples")
    d = quadrature_discriminate(signal.iq, spec.quad_rate_hz, spec.max_deviation_hz)
    rx = design_butterworth_lowpass(spec.rx_filter_order, spec.rx_cutoff_hz, spec.quad_rate_hz)
    d = sosfilt_array(rx.coefficients, d)
    d = resample_array(d, spec.quad_rate_hz, spec.audio_rate_hz)
    return AudioBuffer(np.clip(d, -1.0, 1.0), spec.audio_rate_hz)


def transmit_pipeline(audio: AudioBuffer, spec: ChannelSpec) -> AudioBuffer:
    """Resample, modulate, pass through the AWGN channel, demodulate, restore the input rate."""
    source_rate = audio.sample_rate
    x = resample(audio, spec.audio_rate_hz)
    iq = fm_modulate(x, spec)
    iq = awgn_channel(iq, spec.noise_voltage, spec.seed)
    y = fm_demodulate(iq, spec)
    if source_rate != spec.audio_rate_hz:
        y = resample(y, source_rate)
        y = AudioBuffer(np.clip(y.samples, -1.0, 1.0), source_rate)
    return y
