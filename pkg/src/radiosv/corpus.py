"""Corpus plumbing: WAV I/O, manifests, trials, batch processing, desk corpora."""

from __future__ import annotations

import logging
import os
import wave
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import AugmentConfig, band_noise_augment
from .channel import ChannelSpec, transmit_pipeline
from .dsp import AudioBuffer, design_butterworth_lowpass, sos_filter
from .errors import ConfigError, RadioSVError, TruncatedFileError, UnsupportedEncodingError
from .features import write_feature_dump
from .seeding import derive_seed, utterance_rng

logger = logging.getLogger(__name__)

PCM_SCALE = 32768.0
MANIFEST_NAME = "manifest.tsv"
FAILURES_NAME = "failures.txt"


# ---------------------------------------------------------------------------
# WAV
# ---------------------------------------------------------------------------


def read_wav(path) -> AudioBuffer:
    """Read 16-bit PCM mono RIFF/WAVE, scaled by 1/32768."""
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1 or wf.getsampwidth() != 2:
                raise UnsupportedEncodingError(
                    f"{path}: need 16-bit mono PCM, got {wf.getnchannels()} channel(s) "
                    f"of {8 * wf.getsampwidth()} bits"
                )
            n = wf.getnframes()
            rate = wf.getframerate()
            raw = wf.readframes(n)
    except wave.Error as exc:
        # the stdlib reports non-PCM format tags as "unknown format"
        if "format" in str(exc):
            raise UnsupportedEncodingError(f"{path}: {exc}") from exc
        raise TruncatedFileError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise TruncatedFileError(f"{path}: header truncated") from exc
    if len(raw) != 2 * n:
        raise TruncatedFileError(f"{path}: header declares {n} frames, file holds {len(raw) // 2}")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    return AudioBuffer(samples, rate)


def quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    """Round half away from zero and clip to the int16 range."""
    scaled = np.asarray(samples, dtype=np.float64) * PCM_SCALE
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(rounded, -32768, 32767).astype("<i2")


def write_wav(path, audio: AudioBuffer) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(audio.sample_rate)
        wf.writeframes(quantize_pcm16(audio.samples).tobytes())


# ---------------------------------------------------------------------------
# manifests, trials, scores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    speaker_id: str
    path: str
    duration_s: float | None = None


def read_manifest(path) -> list[ManifestEntry]:
    """Tab-separated ``utterance_id speaker_id path [duration_s]``; relative paths resolve against the manifest."""
    path = Path(path)
    base = path.parent
    entries = []
    seen = set()
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (3, 4):
            raise ConfigError(f"{path}:{lineno}: expected 3 or 4 tab-separated fields")
        utt, spk, p = parts[:3]
        if utt in seen:
            raise ConfigError(f"{path}:{lineno}: duplicate utterance id {utt!r}")
        seen.add(utt)
        full = Path(p) if os.path.isabs(p) else base / p
        duration = float(parts[3]) if len(parts) == 4 and parts[3] else None
        entries.append(ManifestEntry(utt, spk, str(full), duration))
    return entries


def write_manifest(path, entries, relative_to=None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for e in sorted(entries, key=lambda e: e.utterance_id):
        p = e.path
        if relative_to is not None:
            p = os.path.relpath(p, relative_to)
        fields = [e.utterance_id, e.speaker_id, p]
        if e.duration_s is not None:
            fields.append(f"{e.duration_s:.6f}")
        lines.append("\t".join(fields))
    path.write_text("".join(line + "\n" for line in lines))


@dataclass(frozen=True)
class TrialPair:
    label: str  # "target" or "nontarget"
    enroll_id: str
    test_id: str


@dataclass(frozen=True)
class ScoreRecord:
    enroll_id: str
    test_id: str
    score: float
    label: str | None = None


def _parse_label(token: str) -> str:
    if token in ("1", "target"):
        return "target"
    if token in ("0", "nontarget"):
        return "nontarget"
    raise RadioSVError(f"bad trial label {token!r}")


def read_trials(path) -> list[TrialPair]:
    """Lines of ``label enroll test`` with label 1 (target) or 0 (nontarget)."""
    trials = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise RadioSVError(f"{path}:{lineno}: expected 'label enroll test'")
        trials.append(TrialPair(_parse_label(parts[0]), parts[1], parts[2]))
    return trials


def read_scores(path) -> list[ScoreRecord]:
    """Lines of ``enroll test score`` with an optional trailing label."""
    records = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) not in (3, 4):
            raise RadioSVError(f"{path}:{lineno}: expected 'enroll test score [label]'")
        score = float(parts[2])
        if not np.isfinite(score):
            raise RadioSVError(f"{path}:{lineno}: non-finite score")
        label = _parse_label(parts[3]) if len(parts) == 4 else None
        records.append(ScoreRecord(parts[0], parts[1], score, label))
    return records


def attach_labels(scores: list[ScoreRecord], trials: list[TrialPair]) -> list[ScoreRecord]:
    lookup = {(t.enroll_id, t.test_id): t.label for t in trials}
    out = []
    for s in scores:
        key = (s.enroll_id, s.test_id)
        if key not in lookup:
            raise RadioSVError(f"no trial label for pair {key}")
        out.append(ScoreRecord(s.enroll_id, s.test_id, s.score, lookup[key]))
    return out


# ---------------------------------------------------------------------------
# batch processing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransmitJob:
    spec: ChannelSpec
    suffix: str = ".wav"

    def validate(self) -> None:
        if not isinstance(self.spec, ChannelSpec):
            raise ConfigError("transmit job needs a ChannelSpec")

    def run(self, audio: AudioBuffer, seed: int, out_path: Path) -> Path:
        y = transmit_pipeline(audio, self.spec.replace(seed=seed))
        write_wav(out_path, y)
        return out_path


@dataclass(frozen=True)
class AugmentJob:
    config: AugmentConfig
    suffix: str = ".fbk"

    def validate(self) -> None:
        if not isinstance(self.config, AugmentConfig):
            raise ConfigError("augment job needs an AugmentConfig")

    def run(self, audio: AudioBuffer, seed: int, out_path: Path) -> Path:
        result = band_noise_augment(audio, self.config, np.random.default_rng(seed))
        write_feature_dump(out_path, result.features)
        return out_path


@dataclass(frozen=True)
class BatchResult:
    entries: list[ManifestEntry]
    failures: list[tuple[str, str]]
    manifest_path: Path | None = None

    @property
    def ok(self) -> bool:
        return not self.failures


def _common_root(entries) -> Path:
    dirs = [os.path.dirname(os.path.abspath(e.path)) for e in entries]
    return Path(os.path.commonpath(dirs))


def _run_one(args):
    entry, job, out_path, global_seed = args
    try:
        audio = read_wav(entry.path)
        job.run(audio, derive_seed(global_seed, entry.utterance_id), out_path)
        duration = len(audio) / audio.sample_rate
        return ManifestEntry(entry.utterance_id, entry.speaker_id, str(out_path), duration), None
    except Exception as exc:  # per-file failures are recorded, not fatal
        return None, (entry.utterance_id, f"{type(exc).__name__}: {exc}")


def batch_process(entries, job, out_dir, workers: int = 1, global_seed: int = 0) -> BatchResult:
    """Apply ``job`` to every manifest entry, mirroring the input directory layout.

    Each utterance gets its own seed derived from ``(global_seed,
    utterance_id)``, so outputs do not depend on ``workers``.  Failed files
    are logged to ``failures.txt`` and skipped.
    """
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    job.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = list(entries)

    tasks = []
    if entries:
        root = _common_root(entries)
        for e in entries:
            rel = Path(os.path.relpath(os.path.abspath(e.path), root)).with_suffix(job.suffix)
            tasks.append((e, job, out_dir / rel, global_seed))

    if workers == 1 or len(tasks) <= 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * workers))))

    done = [r for r, _ in results if r is not None]
    failures = sorted(f for _, f in results if f is not None)
    for utt, err in failures:
        logger.warning("failed %s: %s", utt, err)

    manifest_path = out_dir / MANIFEST_NAME
    write_manifest(manifest_path, done, relative_to=out_dir)
    failure_path = out_dir / FAILURES_NAME
    if failures:
        failure_path.write_text("".join(f"{u}\t{e}\n" for u, e in failures))
    elif failure_path.exists():
        failure_path.unlink()
    done.sort(key=lambda e: e.utterance_id)
    return BatchResult(done, failures, manifest_path)


# ---------------------------------------------------------------------------
# synthetic desk corpus
# ---------------------------------------------------------------------------


def synth_utterance(rng: np.random.Generator, duration_s: float = 1.0, sample_rate: int = 16000) -> AudioBuffer:
    """Speech-like test signal: a gliding harmonic voice source shaped by
    random formant peaks, a syllable-rate envelope and bursts of fricative
    noise, so that it carries energy across the whole band."""
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = rng.uniform(90.0, 240.0) * (1.0 + 0.15 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t))
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    formants = np.sort(rng.uniform([300, 900, 2200, 3300], [900, 2200, 3200, 4500]))
    voiced = np.zeros(n)
    for h in range(1, int(sample_rate / 2 / 90.0)):
        fh = h * f0
        gain = np.sum([1.0 / (1.0 + ((fh - fm) / 150.0) ** 2) for fm in formants], axis=0) / h
        voiced += np.where(fh < sample_rate / 2 * 0.95, gain * np.sin(h * phase), 0.0)
    syll = 0.5 * (1 - np.cos(2 * np.pi * rng.uniform(3.0, 5.0) * t + rng.uniform(0, 2 * np.pi)))

    noise = AudioBuffer(rng.normal(size=n), sample_rate)
    hiss = noise.samples - sos_filter(noise, design_butterworth_lowpass(4, 3500.0, sample_rate)).samples
    burst = (np.sin(2 * np.pi * rng.uniform(1.0, 3.0) * t + rng.uniform(0, 2 * np.pi)) > 0.6).astype(float)

    x = voiced * syll + 0.1 * np.std(voiced) * hiss * burst
    x *= rng.uniform(0.3, 0.7) / np.max(np.abs(x))
    return AudioBuffer(x, sample_rate)


def make_desk_corpus(out_dir, n_utterances: int = 50, n_speakers: int = 10, duration_s: float = 1.0,
                     sample_rate: int = 16000, seed: int = 0) -> Path:
    """Write synthetic WAVs under ``out_dir/<speaker>/`` plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    entries = []
    for i in range(n_utterances):
        spk = f"spk{i % n_speakers:03d}"
        utt = f"{spk}-utt{i:04d}"
        audio = synth_utterance(utterance_rng(seed, utt), duration_s, sample_rate)
        path = out_dir / spk / f"{utt}.wav"
        write_wav(path, audio)
        entries.append(ManifestEntry(utt, spk, str(path), audio.duration))
    manifest = out_dir / MANIFEST_NAME
    write_manifest(manifest, entries, relative_to=out_dir)
    return manifest
