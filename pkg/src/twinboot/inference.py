"""Test-time prediction from trained twins, calibration and sigma-map analysis."""
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from twinboot.core import estimate_sigma, group_whole, sample_around


def _weights(state):
    if hasattr(state, "w1"):
        return state.w1, state.w2
    w1, w2 = state
    return np.asarray(w1, dtype=np.float64), np.asarray(w2, dtype=np.float64)


def predict_deterministic(predict, state, x):
    """``predict(w, x)`` at the mean of the twin weights."""
    w1, w2 = _weights(state)
    return predict(0.5 * (w1 + w2), x)


@dataclass
class McPrediction:
    mean: np.ndarray
    variance: np.ndarray
    n_samples: int
    per_group: bool
    degenerate_variance: bool


def predict_mc(predict, state, x, n_samples, rng, grouping=None, per_group=True):
    """Average ``predict(w_s, x)`` over ``n_samples`` weight draws around the twin mean.

    With ``per_group`` each group is sampled with its own variance from the
    twin divergence; otherwise one whole-vector variance is used. For
    classifiers ``predict`` should return probabilities, which are averaged.
    The variance is the per-output sample variance (ddof=1); with a single
    sample it is zero and ``degenerate_variance`` is set.
    """
    if n_samples < 1:
        raise ValueError("need at least one Monte Carlo sample")
    w1, w2 = _weights(state)
    if grouping is None:
        grouping = getattr(state, "grouping", None) or group_whole(w1.size)
    if not per_group:
        grouping = group_whole(w1.size)
    sigma_sq = estimate_sigma(w1, w2, grouping)
    center = 0.5 * (w1 + w2)
    first = np.asarray(predict(sample_around(center, sigma_sq, grouping, rng), x), dtype=np.float64)
    mean = first.copy()
    m2 = np.zeros_like(first)
    for s in range(2, n_samples + 1):
        y = np.asarray(predict(sample_around(center, sigma_sq, grouping, rng), x), dtype=np.float64)
        delta = y - mean
        mean += delta / s
        m2 += delta * (y - mean)
    if n_samples == 1:
        return McPrediction(mean, np.zeros_like(mean), 1, per_group, True)
    return McPrediction(mean, m2 / (n_samples - 1), n_samples, per_group, False)


@dataclass
class ReliabilityReport:
    bin_edges: list
    bin_confidence: list
    bin_accuracy: list
    bin_count: list
    ece: float

    def to_dict(self):
        return asdict(self)


def reliability(probabilities, labels, n_bins=10):
    """Top-label reliability diagram and expected calibration error.

    Confidence bins are equal-width on [0, 1], right-closed; empty bins
    report NaN confidence/accuracy and do not contribute to the ECE.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels)
    if p.ndim != 2 or p.shape[0] != labels.shape[0] or p.shape[0] == 0:
        raise ValueError("probabilities must be (n, C) with one label per row")
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("probability rows must be non-negative and sum to 1")
    if n_bins < 1:
        raise ValueError("need at least one bin")
    conf = p.max(axis=1)
    correct = (p.argmax(axis=1) == labels).astype(np.float64)
    idx = np.clip(np.ceil(conf * n_bins).astype(np.int64) - 1, 0, n_bins - 1)
    count = np.bincount(idx, minlength=n_bins)
    conf_sum = np.bincount(idx, weights=conf, minlength=n_bins)
    acc_sum = np.bincount(idx, weights=correct, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        bin_conf = conf_sum / count
        bin_acc = acc_sum / count
    ece = float(np.sum(np.abs(acc_sum - conf_sum)) / conf.size)
    return ReliabilityReport(
        bin_edges=np.linspace(0.0, 1.0, n_bins + 1).tolist(),
        bin_confidence=[None if np.isnan(c) else float(c) for c in bin_conf],
        bin_accuracy=[None if np.isnan(a) else float(a) for a in bin_acc],
        bin_count=count.tolist(),
        ece=ece,
    )


@dataclass
class Correlation:
    spearman: float
    pearson: float
    defined: bool

    def to_dict(self):
        return asdict(self)


def sigma_error_correlation(sigma_map, error_map):
    """Spearman and Pearson correlation between two equally shaped maps.

    Returns NaNs with ``defined=False`` when either map is constant.
    """
    a = np.asarray(sigma_map, dtype=np.float64)
    b = np.asarray(error_map, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"map shapes differ: {a.shape} vs {b.shape}")
    a, b = a.ravel(), b.ravel()
    if a.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return Correlation(float("nan"), float("nan"), False)
    rho = stats.spearmanr(a, b).statistic
    r = stats.pearsonr(a, b).statistic
    return Correlation(float(rho), float(r), True)
