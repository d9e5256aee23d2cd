"""Command-line entry point.

Subcommands: transmit, augment, extract, drift, policy, design-filter, score.
Results go to stdout, progress and warnings to stderr.  Exit status is 0 on
success, 1 when some files failed in a batch job and 2 for invalid
arguments or configuration.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentConfig
from .channel import ChannelSpec, Mode
from .corpus import AugmentJob, TransmitJob, attach_labels, batch_process, read_manifest, read_scores, read_trials, read_wav
from .drift import SCHEDULES, LayerDriftReport, layer_drift, load_activation_sets, select_finetune_policy
from .dsp import design_butterworth_lowpass, magnitude_response
from .errors import RadioSVError
from .features import log_mel_fbank, read_feature_dump
from .scoring import compute_eer, compute_mindcf, records_to_arrays
from .toynet import ToyNet, ToyNetConfig, write_activation_dumps, write_activation_index

logger = logging.getLogger("radiosv")

WORKERS_ENV = "RADIOSV_WORKERS"

CONFIG_KEYS = {
    "io": {"manifest", "output_dir", "workers", "global_seed"},
    "channel": {
        "mode", "noise_voltage", "audio_rate_hz", "quad_rate_hz",
        "max_deviation_hz", "rx_cutoff_hz", "rx_filter_order",
    },
    "augment": {
        "p0", "cutoff_set_hz", "filter_order", "lambda", "rank_k",
        "mask_max_time", "mask_max_freq", "n_mels", "frame_length_ms", "frame_shift_ms",
    },
    "drift": {"clean_dir", "degraded_dir", "top_k", "schedule", "lr_min", "lr_max"},
}


class UsageError(RadioSVError):
    """Bad arguments or configuration; maps to exit status 2."""


@dataclass
class RunConfig:
    sections: dict[str, dict[str, str]] = field(default_factory=dict)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)


def load_config(path) -> RunConfig:
    """Parse an INI-style ``key = value`` file, rejecting unknown sections and keys."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from exc
    sections = {}
    for name in parser.sections():
        if name not in CONFIG_KEYS:
            raise UsageError(f"{path}: unknown section [{name}]")
        unknown = set(parser[name]) - CONFIG_KEYS[name]
        if unknown:
            raise UsageError(f"{path}: unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
        sections[name] = dict(parser[name])
    return RunConfig(sections)


def _pick(flag, config: RunConfig, section: str, key: str, convert, default=None):
    """Flag value, else config value, else default."""
    if flag is not None:
        return flag
    raw = config.get(section, key)
    if raw is None:
        return default
    try:
        return convert(raw)
    except ValueError as exc:
        raise UsageError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _rank(text: str):
    return None if str(text).strip().lower() == "full" else int(text)


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    return value


def _io_settings(args, config: RunConfig):
    manifest = _pick(args.manifest, config, "io", "manifest", str)
    out_dir = _pick(args.out_dir, config, "io", "output_dir", str)
    workers = _pick(args.workers, config, "io", "workers", int, _default_workers())
    seed = _pick(args.seed, config, "io", "global_seed", int, 0)
    if manifest is None or out_dir is None:
        raise UsageError("a manifest and an output directory are required (flags or [io] config)")
    if not Path(manifest).is_file():
        raise UsageError(f"manifest not found: {manifest}")
    if workers < 1:
        raise UsageError(f"workers must be >= 1, got {workers}")
    return Path(manifest), Path(out_dir), workers, seed


def _batch_exit(result) -> int:
    print(f"processed\t{len(result.entries)}")
    print(f"failed\t{len(result.failures)}")
    print(f"manifest\t{result.manifest_path}")
    return 1 if result.failures else 0


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_transmit(args, config: RunConfig) -> int:
    manifest, out_dir, workers, seed = _io_settings(args, config)
    mode = _pick(args.mode, config, "channel", "mode", str, "nbfm")
    try:
        mode = Mode(mode.lower())
    except ValueError:
        raise UsageError(f"unknown mode {mode!r}; expected nbfm or wbfm") from None
    overrides = {}
    for key, flag, conv in (
        ("noise_voltage", args.noise_voltage, float),
        ("audio_rate_hz", None, int),
        ("quad_rate_hz", None, int),
        ("max_deviation_hz", None, float),
        ("rx_cutoff_hz", None, float),
        ("rx_filter_order", args.rx_order, int),
    ):
        value = _pick(flag, config, "channel", key, conv)
        if value is not None:
            overrides[key] = value
    spec = ChannelSpec.for_mode(mode, seed=seed, **overrides)
    entries = read_manifest(manifest)
    logger.info("transmitting %d utterances (%s, noise %.3g) with %d worker(s)",
                len(entries), spec.mode.value, spec.noise_voltage, workers)
    return _batch_exit(batch_process(entries, TransmitJob(spec), out_dir, workers, seed))


def cmd_augment(args, config: RunConfig) -> int:
    manifest, out_dir, workers, seed = _io_settings(args, config)
    params = {}
    for key, flag, conv in (
        ("p0", args.p0, float),
        ("cutoff_set_hz", args.cutoffs, _float_list),
        ("filter_order", args.filter_order, int),
        ("lambda", args.noise_lambda, float),
        ("rank_k", args.rank_k, _rank),
        ("mask_max_time", None, int),
        ("mask_max_freq", None, int),
        ("n_mels", args.n_mels, int),
        ("frame_length_ms", None, float),
        ("frame_shift_ms", None, float),
    ):
        value = _pick(flag, config, "augment", key, conv)
        if value is not None:
            params["noise_lambda" if key == "lambda" else key] = value
    if isinstance(params.get("rank_k"), str):
        params["rank_k"] = _rank(params["rank_k"])
    cfg = AugmentConfig(seed=seed, **params)
    entries = read_manifest(manifest)
    logger.info("augmenting %d utterances with %d worker(s)", len(entries), workers)
    return _batch_exit(batch_process(entries, AugmentJob(cfg), out_dir, workers, seed))


def cmd_extract(args, config: RunConfig) -> int:
    manifest = Path(args.manifest)
    if not manifest.is_file():
        raise UsageError(f"manifest not found: {manifest}")
    net = ToyNet(ToyNetConfig(weight_seed=args.weight_seed))
    out_dir = Path(args.out_dir)
    rows = []
    failures = 0
    for entry in read_manifest(manifest):
        try:
            if entry.path.endswith(".fbk"):
                feats = read_feature_dump(entry.path)
            else:
                feats = log_mel_fbank(read_wav(entry.path))
            acts = net.forward(feats)
            rows += write_activation_dumps(out_dir, entry.utterance_id, feats, acts, net.config.layer_names)
        except RadioSVError as exc:
            failures += 1
            logger.warning("failed %s: %s", entry.utterance_id, exc)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = write_activation_index(out_dir, rows)
    print(f"index\t{index}")
    return 1 if failures else 0


def cmd_drift(args, config: RunConfig) -> int:
    clean = _pick(args.clean, config, "drift", "clean_dir", str)
    degraded = _pick(args.degraded, config, "drift", "degraded_dir", str)
    if clean is None or degraded is None:
        raise UsageError("--clean and --degraded activation directories are required")
    for d in (clean, degraded):
        if not Path(d).is_dir():
            raise UsageError(f"activation directory not found: {d}")
    report = layer_drift(load_activation_sets(clean), load_activation_sets(degraded),
                         Path(clean).name, Path(degraded).name)
    _emit(report.to_text(), args.output)
    return 0


def cmd_policy(args, config: RunConfig) -> int:
    report_path = Path(args.report)
    if not report_path.is_file():
        raise UsageError(f"report not found: {report_path}")
    top_k = _pick(args.top_k, config, "drift", "top_k", int)
    if top_k is None:
        raise UsageError("--top-k is required")
    schedule = _pick(args.schedule, config, "drift", "schedule", str, "decreasing")
    lr_min = _pick(args.lr_min, config, "drift", "lr_min", float, 1e-6)
    lr_max = _pick(args.lr_max, config, "drift", "lr_max", float, 1e-3)
    report = LayerDriftReport.from_text(report_path.read_text())
    policy = select_finetune_policy(report, top_k, schedule, (lr_min, lr_max))
    _emit(policy.to_text(), args.output)
    return 0


def cmd_design_filter(args, config: RunConfig) -> int:
    filt = design_butterworth_lowpass(args.order, args.cutoff, args.rate)
    print(f"# butterworth lowpass order={filt.order} cutoff_hz={filt.cutoff_hz:g} rate_hz={filt.sample_rate_hz}")
    print("# section\tb0\tb1\tb2\ta1\ta2")
    for i, row in enumerate(filt.coefficients):
        print(f"{i}\t" + "\t".join(f"{v:.12g}" for v in row))
    freqs = np.union1d(np.linspace(0.0, args.rate / 2.0, args.points), [args.cutoff])
    mags = magnitude_response(filt, freqs)
    print("# freq_hz\tmagnitude\tdb")
    with np.errstate(divide="ignore"):
        dbs = 20.0 * np.log10(mags)
    for f, m, db in zip(freqs, mags, dbs):
        print(f"{f:.2f}\t{m:.6f}\t{db:.4f}")
    return 0


def cmd_score(args, config: RunConfig) -> int:
    scores_path = Path(args.scores)
    if not scores_path.is_file():
        raise UsageError(f"score file not found: {scores_path}")
    records = read_scores(scores_path)
    if args.trials is not None:
        if not Path(args.trials).is_file():
            raise UsageError(f"trials file not found: {args.trials}")
        records = attach_labels(records, read_trials(args.trials))
    scores, labels = records_to_arrays(records)
    eer, eer_thr = compute_eer(scores, labels)
    dcf, dcf_thr = compute_mindcf(scores, labels, args.p_target)
    print(f"EER\t{eer:.4f}")
    print(f"minDCF\t{dcf:.4f}")
    print(f"EER_threshold\t{eer_thr:.4f}")
    print(f"minDCF_threshold\t{dcf_thr:.4f}")
    return 0


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text)
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_io(p):
    p.add_argument("--config", help="INI config file with [io]/[channel]/[augment]/[drift] sections")
    p.add_argument("--manifest", help="input manifest (utterance_id, speaker_id, path; tab-separated)")
    p.add_argument("--out-dir", help="output directory; input layout is mirrored beneath it")
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.add_argument("--seed", type=int, help="global seed; per-utterance streams derive from it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radiosv", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("transmit", help="simulate NBFM/WBFM transmission of a corpus")
    _add_io(p)
    p.add_argument("--mode", choices=[m.value for m in Mode], help="modulation (default nbfm)")
    p.add_argument("--noise-voltage", type=float, help="per-component AWGN std (default 0)")
    p.add_argument("--rx-order", type=int, help="receive low-pass order (default 12)")
    p.set_defaults(func=cmd_transmit)

    p = sub.add_parser("augment", help="band-and-noise augmentation into feature dumps")
    _add_io(p)
    p.add_argument("--p0", type=float, help="augmentation probability (default 0.5)")
    p.add_argument("--cutoffs", type=_float_list, help="comma-separated cutoff set in Hz")
    p.add_argument("--filter-order", type=int, help="Butterworth order (default 8)")
    p.add_argument("--lambda", dest="noise_lambda", type=float, help="noise std on V (default 0.1)")
    p.add_argument("--rank-k", type=_rank, help="SVD rank or 'full' (default full)")
    p.add_argument("--n-mels", type=int, help="mel bands (default 80)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("extract", help="run the toy net and write per-layer activation dumps")
    p.add_argument("--manifest", required=True, help="manifest of WAV or .fbk feature files")
    p.add_argument("--out-dir", required=True, help="activation dump directory")
    p.add_argument("--weight-seed", type=int, default=ToyNetConfig().weight_seed, help="toy net weight seed")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("drift", help="per-layer Wasserstein drift between two activation dump dirs")
    p.add_argument("--config")
    p.add_argument("--clean", help="clean-corpus activation directory")
    p.add_argument("--degraded", help="degraded-corpus activation directory")
    p.add_argument("--output", help="also write the report to this file")
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("policy", help="fine-tuning layer/learning-rate policy from a drift report")
    p.add_argument("--config")
    p.add_argument("--report", required=True, help="drift report written by 'drift'")
    p.add_argument("--top-k", type=int, help="number of layers to fine-tune")
    p.add_argument("--schedule", choices=SCHEDULES, help="learning-rate schedule (default decreasing)")
    p.add_argument("--lr-min", type=float, help="smallest learning rate (default 1e-6)")
    p.add_argument("--lr-max", type=float, help="largest learning rate (default 1e-3)")
    p.add_argument("--output", help="also write the policy to this file")
    p.set_defaults(func=cmd_policy)

    p = sub.add_parser("design-filter", help="print Butterworth SOS coefficients and magnitude response")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--cutoff", type=float, required=True, help="cutoff in Hz")
    p.add_argument("--rate", type=int, required=True, help="sample rate in Hz")
    p.add_argument("--points", type=int, default=17, help="grid points from 0 to Nyquist")
    p.set_defaults(func=cmd_design_filter, config=None)

    p = sub.add_parser("score", help="EER and minDCF of a score file")
    p.add_argument("scores", help="lines of 'enroll test score [label]'")
    p.add_argument("--trials", help="lines of 'label enroll test' supplying labels")
    p.add_argument("--p-target", type=float, default=0.01, help="target prior for minDCF")
    p.set_defaults(func=cmd_score, config=None)
    return parser


def _setup_logging(verbose: bool) -> None:
    # a fresh handler per call so the current sys.stderr is used
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(args.verbose)
    try:
        config = load_config(getattr(args, "config", None))
        return args.func(args, config)
    except RadioSVError as exc:
        print(f"radiosv: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
