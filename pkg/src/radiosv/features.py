"""Log-mel filterbank front-end, SVD and rank-k truncation, feature dumps."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .dsp import AudioBuffer
from .errors import RadioSVError, TruncatedFileError

LOG_FLOOR = 1e-10
MEL_LOW_HZ = 20.0
MEL_HIGH_FRACTION = 0.95  # of Nyquist

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60

# t, f (uint32), frame_length_ms, frame_shift_ms (float32), sample_rate_hz (uint32)
_DUMP_HEADER = struct.Struct("<IIffI")


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    sample_rate_hz: int = 16000

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise RadioSVError(f"feature matrix must be t x f with t, f >= 1, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise RadioSVError("feature matrix contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def with_values(self, values) -> "FeatureMatrix":
        return FeatureMatrix(values, self.frame_length_ms, self.frame_shift_ms, self.sample_rate_hz)


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``X = U diag(sigma) V^T`` with r = min(t, f)."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    source: FeatureMatrix | None = None

    @property
    def rank_bound(self) -> int:
        return self.sigma.shape[0]


# ---------------------------------------------------------------------------
# log-mel front-end
# ---------------------------------------------------------------------------


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels: int, sample_rate_hz: int) -> np.ndarray:
    high = MEL_HIGH_FRACTION * sample_rate_hz / 2.0
    edges = mel_to_hz(np.linspace(hz_to_mel(MEL_LOW_HZ), hz_to_mel(high), n_mels + 2))
    return edges[1:-1]


def mel_filterbank(n_mels: int, n_fft: int, sample_rate_hz: int) -> np.ndarray:
    """``(n_mels, n_fft // 2 + 1)`` triangular weights, linear in Hz between mel-spaced edges."""
    high = MEL_HIGH_FRACTION * sample_rate_hz / 2.0
    edges = mel_to_hz(np.linspace(hz_to_mel(MEL_LOW_HZ), hz_to_mel(high), n_mels + 2))
    bins = np.arange(n_fft // 2 + 1) * sample_rate_hz / n_fft
    lower = edges[:-2, None]
    center = edges[1:-1, None]
    upper = edges[2:, None]
    rising = (bins - lower) / (center - lower)
    falling = (upper - bins) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def frame_params(sample_rate_hz: int, frame_length_ms: float, frame_shift_ms: float) -> tuple[int, int, int]:
    """Frame length, shift (samples) and FFT size (next power of two)."""
    length = int(round(sample_rate_hz * frame_length_ms / 1000.0))
    shift = int(round(sample_rate_hz * frame_shift_ms / 1000.0))
    if length < 1 or shift < 1:
        raise RadioSVError("frame length and shift must cover at least one sample")
    n_fft = 1 << (length - 1).bit_length()
    return length, shift, n_fft


def num_frames(n_samples: int, frame_length: int, frame_shift: int) -> int:
    if n_samples < frame_length:
        return 0
    return 1 + (n_samples - frame_length) // frame_shift


def log_mel_fbank(
    audio: AudioBuffer,
    n_mels: int = 80,
    frame_length_ms: float = 25.0,
    frame_shift_ms: float = 10.0,
) -> FeatureMatrix:
    """Hamming-windowed power spectrum through a mel filterbank, then ``log(x + 1e-10)``."""
    if n_mels < 1:
        raise RadioSVError(f"n_mels must be >= 1, got {n_mels}")
    rate = audio.sample_rate
    length, shift, n_fft = frame_params(rate, frame_length_ms, frame_shift_ms)
    t = num_frames(len(audio), length, shift)
    if t < 1:
        raise RadioSVError(
            f"audio has {len(audio)} samples, shorter than one {length}-sample frame"
        )
    frames = np.lib.stride_tricks.sliding_window_view(audio.samples, length)[::shift][:t]
    spec = np.fft.rfft(frames * np.hamming(length), n=n_fft, axis=1)
    power = spec.real**2 + spec.imag**2
    mel = power @ mel_filterbank(n_mels, n_fft, rate).T
    return FeatureMatrix(np.log(mel + LOG_FLOOR), frame_length_ms, frame_shift_ms, rate)


# ---------------------------------------------------------------------------
# SVD
# ---------------------------------------------------------------------------


def _complete_basis(u: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Replace columns of ``u`` not in ``keep`` by an orthonormal completion."""
    m = u.shape[0]
    basis = [u[:, j] for j in np.flatnonzero(keep)]
    out = u.copy()
    candidates = iter(range(m))
    for j in np.flatnonzero(~keep):
        while True:
            e = np.zeros(m)
            e[next(candidates)] = 1.0
            for _ in range(2):
                for b in basis:
                    e -= (b @ e) * b
            norm = np.linalg.norm(e)
            if norm > 1e-6:
                break
        e /= norm
        basis.append(e)
        out[:, j] = e
    return out


def _jacobi_svd(a: np.ndarray):
    """One-sided Jacobi on a tall matrix (m >= n)."""
    a_t = np.ascontiguousarray(a.T, dtype=np.float64).copy()
    v_t, _ = _backend.jacobi_sweeps(a_t, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    sigma = np.sqrt(np.einsum("ij,ij->i", a_t, a_t))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    a_t = a_t[order]
    v = v_t[order].T

    m = a.shape[0]
    cutoff = sigma[0] * max(a.shape) * np.finfo(np.float64).eps if sigma.size else 0.0
    keep = sigma > cutoff
    u = np.zeros((m, sigma.shape[0]))
    u[:, keep] = (a_t[keep] / sigma[keep, None]).T
    sigma = np.where(keep, sigma, 0.0)
    if not keep.all():
        u = _complete_basis(u, keep)
    return u, sigma, v


def svd(x) -> SvdFactors:
    """Thin SVD by one-sided Jacobi rotations.

    Signs are fixed so the largest-magnitude entry of every column of V is
    positive.
    """
    source = x if isinstance(x, FeatureMatrix) else None
    a = np.asarray(x.values if source is not None else x, dtype=np.float64)
    if a.ndim != 2:
        raise RadioSVError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise RadioSVError("cannot decompose a matrix with non-finite entries")
    if a.shape[0] >= a.shape[1]:
        u, sigma, v = _jacobi_svd(a)
    else:
        v, sigma, u = _jacobi_svd(a.T)

    idx = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[idx, np.arange(v.shape[1])] < 0.0, -1.0, 1.0)
    return SvdFactors(u * signs, sigma, v * signs, source)


def _low_rank(u_k: np.ndarray, sigma_k: np.ndarray, vt_k: np.ndarray) -> np.ndarray:
    return (u_k * sigma_k) @ vt_k


def truncate_svd(factors: SvdFactors, k: int) -> FeatureMatrix:
    """Best rank-k approximation ``U_k diag(sigma_k) V_k^T``."""
    r = factors.rank_bound
    if int(k) != k or not 1 <= k <= r:
        raise RadioSVError(f"rank k must be in [1, {r}], got {k}")
    k = int(k)
    values = _low_rank(factors.U[:, :k], factors.sigma[:k], factors.V[:, :k].T)
    if factors.source is not None:
        return factors.source.with_values(values)
    return FeatureMatrix(values)


# ---------------------------------------------------------------------------
# binary dumps
# ---------------------------------------------------------------------------


def write_feature_dump(path, features: FeatureMatrix) -> None:
    """Little-endian header then row-major float32 values."""
    t, f = features.shape
    header = _DUMP_HEADER.pack(t, f, features.frame_length_ms, features.frame_shift_ms, features.sample_rate_hz)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(features.values, dtype="<f4").tobytes())


def read_feature_dump(path) -> FeatureMatrix:
    data = Path(path).read_bytes()
    if len(data) < _DUMP_HEADER.size:
        raise TruncatedFileError(f"{path}: header truncated")
    t, f, length_ms, shift_ms, rate = _DUMP_HEADER.unpack_from(data)
    expected = _DUMP_HEADER.size + 4 * t * f
    if len(data) != expected:
        raise TruncatedFileError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=_DUMP_HEADER.size).reshape(t, f)
    return FeatureMatrix(values.astype(np.float64), float(length_ms), float(shift_ms), int(rate))
