"""Detection metrics for verification trials: EER and normalized minDCF.

A trial is accepted when its score is >= the threshold.
"""

from __future__ import annotations

import numpy as np

from .errors import RadioSVError


def _as_arrays(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if labels.dtype.kind in "OUS":
        labels = labels == "target"
    labels = labels.astype(bool)
    if scores.shape != labels.shape:
        raise RadioSVError("scores and labels differ in length")
    if not np.all(np.isfinite(scores)):
        raise RadioSVError("scores must be finite")
    n_tar = int(labels.sum())
    n_non = int(labels.size - n_tar)
    if n_tar == 0 or n_non == 0:
        raise RadioSVError("need at least one target and one nontarget trial")
    return scores, labels, n_tar, n_non


def operating_points(scores, labels):
    """Miss/false-alarm counts as the threshold sweeps down through each distinct score.

    Returns ``(thresholds, n_miss, n_fa, n_tar, n_non)``; entry 0 is the
    accept-nothing point with threshold ``+inf``.
    """
    scores, labels, n_tar, n_non = _as_arrays(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    is_tar = labels[order]
    last = np.flatnonzero(np.append(s[1:] != s[:-1], True))  # final index of each tie group
    tar_acc = np.cumsum(is_tar)[last]
    non_acc = np.cumsum(~is_tar)[last]
    thresholds = np.concatenate(([np.inf], s[last]))
    n_miss = np.concatenate(([n_tar], n_tar - tar_acc))
    n_fa = np.concatenate(([0], non_acc))
    return thresholds, n_miss, n_fa, n_tar, n_non


def compute_eer(scores, labels) -> tuple[float, float]:
    """Equal error rate in percent and its threshold.

    The crossing of P_miss and P_fa is linearly interpolated between the two
    adjacent operating points that bracket it.
    """
    thresholds, n_miss, n_fa, n_tar, n_non = operating_points(scores, labels)
    p_miss = n_miss / n_tar
    p_fa = n_fa / n_non
    i = int(np.argmax(p_miss <= p_fa))
    if i == 0:
        return 100.0 * float(p_fa[0]), float(thresholds[0])
    d0 = p_miss[i - 1] - p_fa[i - 1]
    d1 = p_miss[i] - p_fa[i]
    w = d0 / (d0 - d1)
    eer = p_fa[i - 1] + w * (p_fa[i] - p_fa[i - 1])
    hi, lo = thresholds[i - 1], thresholds[i]
    threshold = lo if np.isinf(hi) else hi + w * (lo - hi)
    return 100.0 * float(eer), float(threshold)


def compute_mindcf(scores, labels, p_target: float = 0.01, c_miss: float = 1.0,
                   c_fa: float = 1.0) -> tuple[float, float]:
    """Minimum normalized detection cost and the threshold achieving it."""
    if not 0.0 < p_target < 1.0:
        raise RadioSVError(f"p_target must be in (0, 1), got {p_target}")
    thresholds, n_miss, n_fa, n_tar, n_non = operating_points(scores, labels)
    cost = p_target * c_miss * (n_miss / n_tar) + (1.0 - p_target) * c_fa * (n_fa / n_non)
    cost = cost / min(p_target * c_miss, (1.0 - p_target) * c_fa)
    i = int(np.argmin(cost))
    return float(cost[i]), float(thresholds[i])


def records_to_arrays(records):
    """Split labelled :class:`~radiosv.corpus.ScoreRecord` objects into score and label arrays."""
    if any(r.label is None for r in records):
        raise RadioSVError("every score record needs a label")
    return (np.array([r.score for r in records], dtype=np.float64),
            np.array([r.label == "target" for r in records]))
