"""Fixed-weight dilated 1-D convolution stack used as a stand-in speaker network.

There is no training: weights are drawn once from a seeded generator so
layer activations are reproducible and can feed the drift analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RadioSVError
from .features import FeatureMatrix, write_feature_dump

DEFAULT_LAYERS = (
    (80, 64, 5, 1),
    (64, 64, 3, 2),
    (64, 64, 3, 3),
    (64, 64, 3, 4),
    (64, 32, 1, 1),
)


@dataclass(frozen=True)
class ToyNetConfig:
    """``layers`` holds ``(channels_in, channels_out, kernel_size, dilation)`` tuples."""

    layers: tuple[tuple[int, int, int, int], ...] = DEFAULT_LAYERS
    nonlinearity: str = "relu"
    weight_seed: int = 1

    def __post_init__(self):
        layers = tuple(tuple(int(v) for v in layer) for layer in self.layers)
        if not layers:
            raise RadioSVError("toy net needs at least one layer")
        for i, (c_in, c_out, kernel, dilation) in enumerate(layers):
            if min(c_in, c_out, kernel, dilation) < 1:
                raise RadioSVError(f"layer {i}: sizes must be positive")
            if kernel % 2 == 0:
                raise RadioSVError(f"layer {i}: kernel size {kernel} must be odd")
            if i and layers[i - 1][1] != c_in:
                raise RadioSVError(
                    f"layer {i}: expects {c_in} input channels, previous layer emits {layers[i - 1][1]}"
                )
        if self.nonlinearity != "relu":
            raise RadioSVError(f"unsupported nonlinearity {self.nonlinearity!r}")
        object.__setattr__(self, "layers", layers)

    @property
    def layer_names(self) -> list[str]:
        return [f"conv{i}" for i in range(len(self.layers))]


def init_weights(config: ToyNetConfig) -> list[np.ndarray]:
    """One ``(c_out, c_in, kernel)`` tensor per layer, std ``1/sqrt(c_in * kernel)``."""
    rng = np.random.default_rng(config.weight_seed)
    weights = []
    for c_in, c_out, kernel, _ in config.layers:
        std = 1.0 / np.sqrt(c_in * kernel)
        weights.append(rng.normal(0.0, std, size=(c_out, c_in, kernel)))
    return weights


def conv1d_same(x: np.ndarray, w: np.ndarray, dilation: int) -> np.ndarray:
    """Dilated convolution over time with zero 'same' padding. ``x`` is ``(t, c_in)``."""
    t = x.shape[0]
    kernel = w.shape[2]
    pad = dilation * (kernel - 1) // 2
    xp = np.pad(x, ((pad, pad), (0, 0)))
    out = np.zeros((t, w.shape[0]))
    for j in range(kernel):
        out += xp[j * dilation: j * dilation + t] @ w[:, :, j].T
    return out


@dataclass
class ToyNet:
    config: ToyNetConfig = field(default_factory=ToyNetConfig)
    weights: list[np.ndarray] | None = None

    def __post_init__(self):
        if self.weights is None:
            self.weights = init_weights(self.config)
        for i, ((c_in, c_out, kernel, _), w) in enumerate(zip(self.config.layers, self.weights)):
            if w.shape != (c_out, c_in, kernel):
                raise RadioSVError(f"layer {i}: weight shape {w.shape} != {(c_out, c_in, kernel)}")
            w.setflags(write=False)

    def forward(self, X: FeatureMatrix | np.ndarray) -> list[np.ndarray]:
        x = np.asarray(X.values if isinstance(X, FeatureMatrix) else X, dtype=np.float64)
        c_in = self.config.layers[0][0]
        if x.ndim != 2 or x.shape[1] != c_in:
            raise RadioSVError(f"input must be (t, {c_in}), got shape {x.shape}")
        outputs = []
        for (_, _, _, dilation), w in zip(self.config.layers, self.weights):
            x = np.maximum(conv1d_same(x, w, dilation), 0.0)
            outputs.append(x)
        return outputs


def toy_forward(X: FeatureMatrix, config: ToyNetConfig | None = None) -> list[np.ndarray]:
    return ToyNet(config or ToyNetConfig()).forward(X)


def write_activation_dumps(out_dir, utterance_id: str, X: FeatureMatrix, activations, names) -> list[tuple]:
    """Write one dump per layer under ``out_dir/utterance_id/``; returns index rows."""
    rows = []
    for i, (name, act) in enumerate(zip(names, activations)):
        rel = Path(utterance_id) / f"{i:02d}_{name}.fbk"
        write_feature_dump(Path(out_dir) / rel, X.with_values(act))
        rows.append((utterance_id, i, name, rel.as_posix()))
    return rows


ACTIVATION_INDEX = "layers.tsv"


def write_activation_index(out_dir, rows) -> Path:
    """Index of dumps: ``utterance_id  layer_index  layer_name  relative_path`` per line."""
    path = Path(out_dir) / ACTIVATION_INDEX
    rows = sorted(rows, key=lambda r: (r[0], r[1]))
    path.write_text("".join("\t".join(str(v) for v in row) + "\n" for row in rows))
    return path
