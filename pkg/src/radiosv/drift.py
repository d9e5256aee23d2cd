"""Layer-wise feature drift between clean and degraded corpora.

Each layer's drift is the mean, over channels, of the empirical
1-Wasserstein distance between the per-utterance time-mean activations of
the two corpora.  Layers are then ranked to choose which ones to fine-tune
and with what learning rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RadioSVError

SCHEDULES = ("constant", "increasing", "decreasing")


@dataclass(frozen=True)
class LayerActivationSet:
    layer_name: str
    vectors: np.ndarray  # (n_utterances, channels)

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim == 1:
            vectors = vectors[None, :]
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise RadioSVError(f"layer {self.layer_name!r}: need a non-empty (n, c) set of vectors")
        object.__setattr__(self, "vectors", vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class DriftEntry:
    layer_index: int
    layer_name: str
    distance: float
    relative: float


@dataclass(frozen=True)
class LayerDriftReport:
    entries: tuple[DriftEntry, ...]
    clean_label: str = "clean"
    degraded_label: str = "degraded"
    n_clean: int = 0
    n_degraded: int = 0

    @property
    def distances(self) -> np.ndarray:
        return np.array([e.distance for e in self.entries])

    def to_text(self) -> str:
        lines = [
            f"# clean={self.clean_label} degraded={self.degraded_label} "
            f"n_clean={self.n_clean} n_degraded={self.n_degraded}",
            "# layer_index\tlayer_name\td_i\trelative_d_i",
        ]
        for e in self.entries:
            lines.append(f"{e.layer_index}\t{e.layer_name}\t{e.distance!r}\t{e.relative!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LayerDriftReport":
        meta = {}
        entries = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, value = token.split("=", 1)
                        meta[key] = value
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise RadioSVError(f"malformed drift report line: {line!r}")
            entries.append(DriftEntry(int(parts[0]), parts[1], float(parts[2]), float(parts[3])))
        if not entries:
            raise RadioSVError("drift report has no layer entries")
        return cls(
            tuple(entries),
            meta.get("clean", "clean"),
            meta.get("degraded", "degraded"),
            int(meta.get("n_clean", 0)),
            int(meta.get("n_degraded", 0)),
        )


@dataclass(frozen=True)
class FineTunePolicy:
    selected_layers: tuple[int, ...]
    per_layer_lr: dict[int, float] = field(default_factory=dict)
    schedule: str = "decreasing"
    lr_bounds: tuple[float, float] = (1e-6, 1e-3)

    def to_text(self) -> str:
        lines = [
            f"# schedule={self.schedule} lr_min={self.lr_bounds[0]!r} lr_max={self.lr_bounds[1]!r}",
            "# layer_index\tlr",
        ]
        for idx in self.selected_layers:
            lines.append(f"{idx}\t{self.per_layer_lr[idx]!r}")
        return "\n".join(lines) + "\n"


def layer_statistics(activations) -> np.ndarray:
    """Time-mean of a ``(t, c)`` activation matrix."""
    a = np.asarray(activations, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise RadioSVError(f"expected a non-empty (t, c) activation matrix, got shape {a.shape}")
    return a.mean(axis=0)


def wasserstein_1d(a, b) -> float:
    """Exact W1 between two empirical samples with uniform weights.

    Integrates the absolute difference of the two step quantile functions
    over the merged grid of cumulative levels ``i/n`` and ``j/m``.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    n, m = a.shape[0], b.shape[0]
    if n == 0 or m == 0:
        raise RadioSVError("wasserstein_1d needs two non-empty samples")
    if n == m:
        return float(np.mean(np.abs(a - b)))
    levels_a = np.arange(1, n + 1) / n
    levels_b = np.arange(1, m + 1) / m
    levels = np.union1d(levels_a, levels_b)
    widths = np.diff(levels, prepend=0.0)
    qa = a[np.minimum(np.searchsorted(levels_a, levels, side="left"), n - 1)]
    qb = b[np.minimum(np.searchsorted(levels_b, levels, side="left"), m - 1)]
    return float(np.sum(widths * np.abs(qa - qb)))


def layer_distance(clean: np.ndarray, degraded: np.ndarray) -> float:
    """Mean over channels of per-channel W1 between two ``(n, c)`` statistic sets."""
    c = clean.shape[1]
    return math.fsum(wasserstein_1d(clean[:, j], degraded[:, j]) for j in range(c)) / c


def layer_drift(
    clean: list[LayerActivationSet],
    degraded: list[LayerActivationSet],
    clean_label: str = "clean",
    degraded_label: str = "degraded",
) -> LayerDriftReport:
    if len(clean) != len(degraded):
        raise RadioSVError(f"layer count mismatch: {len(clean)} clean vs {len(degraded)} degraded")
    distances = []
    for i, (c, d) in enumerate(zip(clean, degraded)):
        if c.layer_name != d.layer_name:
            raise RadioSVError(f"layer {i}: name mismatch {c.layer_name!r} vs {d.layer_name!r}")
        if c.dim != d.dim:
            raise RadioSVError(f"layer {c.layer_name!r}: dimension mismatch {c.dim} vs {d.dim}")
        distances.append(layer_distance(c.vectors, d.vectors))
    top = max(distances) if distances else 0.0
    entries = tuple(
        DriftEntry(i, layer.layer_name, dist, dist / top if top > 0 else 0.0)
        for i, (layer, dist) in enumerate(zip(clean, distances))
    )
    n_clean = clean[0].vectors.shape[0] if clean else 0
    n_degraded = degraded[0].vectors.shape[0] if degraded else 0
    return LayerDriftReport(entries, clean_label, degraded_label, n_clean, n_degraded)


def geometric_rates(lr_start: float, lr_end: float, n: int) -> list[float]:
    """``n`` rates log-linearly spaced from ``lr_start`` to ``lr_end`` (endpoints exact)."""
    if n == 1:
        return [lr_start]
    exponents = np.linspace(math.log10(lr_start), math.log10(lr_end), n)
    rates = [10.0 ** float(e) for e in exponents]
    rates[0], rates[-1] = lr_start, lr_end
    return rates


def select_finetune_policy(
    report: LayerDriftReport,
    top_k: int,
    schedule: str = "decreasing",
    lr_bounds: tuple[float, float] = (1e-6, 1e-3),
) -> FineTunePolicy:
    """Pick the ``top_k`` most drifted layers (ties go to the shallower layer).

    ``decreasing`` assigns ``lr_max`` to the shallowest selected layer down to
    ``lr_min`` for the deepest, ``increasing`` the mirror image, ``constant``
    gives every layer ``lr_min``.
    """
    n = len(report.entries)
    if int(top_k) != top_k or not 1 <= top_k <= n:
        raise RadioSVError(f"top_k must be in [1, {n}], got {top_k}")
    if schedule not in SCHEDULES:
        raise RadioSVError(f"unknown schedule {schedule!r}; expected one of {SCHEDULES}")
    lr_min, lr_max = lr_bounds
    if not 0 < lr_min <= lr_max:
        raise RadioSVError(f"lr bounds must satisfy 0 < min <= max, got {lr_bounds}")

    ranked = sorted(report.entries, key=lambda e: (-e.distance, e.layer_index))
    selected = tuple(sorted(e.layer_index for e in ranked[: int(top_k)]))
    if schedule == "constant":
        rates = [lr_min] * len(selected)
    elif schedule == "decreasing":
        rates = geometric_rates(lr_max, lr_min, len(selected))
    else:
        rates = geometric_rates(lr_min, lr_max, len(selected))
    return FineTunePolicy(selected, dict(zip(selected, rates)), schedule, (lr_min, lr_max))


def load_activation_sets(directory, index_name: str = "layers.tsv") -> list[LayerActivationSet]:
    """Read a dump directory written by the toy net into per-layer statistic sets.

    Utterances are ordered by id; each dump is reduced with
    :func:`layer_statistics`.
    """
    from .features import read_feature_dump

    directory = Path(directory)
    index = directory / index_name
    if not index.is_file():
        raise RadioSVError(f"{directory}: missing activation index {index_name}")
    layers: dict[int, tuple[str, dict[str, str]]] = {}
    for lineno, line in enumerate(index.read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise RadioSVError(f"{index}:{lineno}: expected 4 tab-separated fields")
        utt, idx, name, rel = parts
        name_seen, paths = layers.setdefault(int(idx), (name, {}))
        if name_seen != name:
            raise RadioSVError(f"{index}:{lineno}: layer {idx} named both {name_seen!r} and {name!r}")
        paths[utt] = rel
    if sorted(layers) != list(range(len(layers))):
        raise RadioSVError(f"{index}: layer indices must be 0..n-1, got {sorted(layers)}")
    sets = []
    utts = None
    for idx in range(len(layers)):
        name, paths = layers[idx]
        if utts is None:
            utts = sorted(paths)
        elif sorted(paths) != utts:
            raise RadioSVError(f"{index}: layer {idx} covers a different utterance set")
        vectors = [layer_statistics(read_feature_dump(directory / paths[u]).values) for u in utts]
        sets.append(LayerActivationSet(name, np.vstack(vectors)))
    return sets
