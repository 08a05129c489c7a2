"""Evaluation metrics: accuracy curve, haptic memory, ESP index,
silhouette separability, and the per-joint accuracy distribution.

The accuracy curve p(i) is the evaluation accuracy of a softmax readout
refit on the features accumulated up to interval i, averaged over
evaluation splits of the initial states; its maximum is the learning
performance of a configuration, and its mean over the pre-collision
first quarter period is the haptic-memory score. The ESP index measures
how quickly trajectories from different initial states collapse onto a
common orbit; the silhouette coefficient measures how separable the
classes are in sensor space at each instant.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .protocol import Dataset, assemble_features, eval_split_combinations
from .readout import TrainSpec, train

# Deviation (rad) below which trajectories count as collapsed; reported
# alongside the index, never hidden inside it.
ESP_THRESHOLD = 0.01

# Default coordinate jitter for silhouette computations on real sensor
# data, where quantization can make points coincide exactly.
SILHOUETTE_NOISE = 1e-9


@dataclass
class AccuracyCurve:
    """p(i) for i = 0..L with split mean and standard deviation.

    p(0) is the chance rate: the curve has a value before any data
    accumulates.
    """

    mean: np.ndarray
    std: np.ndarray
    per_split: np.ndarray      # (n_splits, L+1)
    chance_rate: float
    n_intervals: int           # L

    def __len__(self):
        return self.mean.shape[0]


@dataclass
class HapticMemoryScore:
    """Mean accuracy over the pre-collision window i in [0, L//4]."""

    value: float
    window_intervals: int
    truncated: bool


@dataclass
class EspReport:
    """Initial-state deviation statistics of N trajectories."""

    sigma: np.ndarray        # (T, channels) per-channel deviation
    sigma_bar: np.ndarray    # (T,) component average
    index: float             # time average of sigma_bar past the washout
    threshold: float
    holds: bool
    washout_samples: int


@dataclass
class SilhouetteSeries:
    """Silhouette coefficient per time index within the period."""

    values: np.ndarray
    max_value: float
    argmax_index: int


@dataclass
class BodyAccuracy:
    """Max accuracy per joint channel, next to the all-channel result."""

    per_joint: np.ndarray
    all_channels: float
    chance_rate: float


# ---------------------------------------------------------------------------
# Accuracy curve and derived scores


def accuracy_curve(dataset: Dataset, train_spec: TrainSpec = TrainSpec(),
                   channels=None) -> AccuracyCurve:
    """Refit the readout at every accumulated interval and evaluate.

    For each split of the initial states, interval i trains on the
    accumulated features of the training windows and scores the
    evaluation windows; results are averaged across all splits.
    """
    spec = dataset.spec
    stride = spec.interval_stride
    n_intervals = dataset.samples_per_period // stride
    splits = eval_split_combinations(spec)
    if not splits:
        raise ValueError("no evaluation splits available")
    chance = dataset.chance_rate()
    per_split = np.empty((len(splits), n_intervals + 1))
    per_split[:, 0] = chance
    masks = []
    for train_inits, eval_inits in splits:
        tr = np.isin(dataset.init_index, train_inits)
        ev = np.isin(dataset.init_index, eval_inits)
        if not tr.any() or not ev.any():
            raise ValueError("degenerate split: empty train or eval rows")
        masks.append((tr, ev))
    for i in range(1, n_intervals + 1):
        X, y = assemble_features(dataset, i, channels=channels)
        for s, (tr, ev) in enumerate(masks):
            model = train(X[tr], y[tr], train_spec)
            per_split[s, i] = float((model.predict(X[ev]) == y[ev]).mean())
    return AccuracyCurve(mean=per_split.mean(axis=0),
                         std=per_split.std(axis=0),
                         per_split=per_split,
                         chance_rate=chance,
                         n_intervals=n_intervals)


def max_accuracy(curve: AccuracyCurve) -> float:
    """Maximum of the mean accuracy curve over i in [0, L]."""
    if len(curve) == 0:
        raise ValueError("empty accuracy curve")
    return float(curve.mean.max())


def haptic_memory(curve: AccuracyCurve) -> HapticMemoryScore:
    """Mean of p(i) over the pre-collision window i in [0, L//4]."""
    quarter, rem = divmod(curve.n_intervals, 4)
    window = curve.mean[: quarter + 1]
    return HapticMemoryScore(value=float(window.mean()),
                             window_intervals=quarter,
                             truncated=rem != 0)


def body_accuracy_distribution(dataset: Dataset,
                               train_spec: TrainSpec = TrainSpec()) -> BodyAccuracy:
    """Max accuracy training on each joint channel alone, plus all channels."""
    per_joint = np.empty(dataset.n_joints)
    for j in range(dataset.n_joints):
        per_joint[j] = max_accuracy(
            accuracy_curve(dataset, train_spec, channels=[j]))
    full = max_accuracy(accuracy_curve(dataset, train_spec))
    return BodyAccuracy(per_joint=per_joint, all_channels=full,
                        chance_rate=dataset.chance_rate())


# ---------------------------------------------------------------------------
# Echo state property


def esp_index(trajectories, washout_samples: int = 0,
              threshold: float = ESP_THRESHOLD) -> EspReport:
    """Deviation of N same-input trajectories from their mean.

    trajectories has shape (N, T, channels) (a list of equal-shape 2-D
    arrays is accepted); sigma(t) is the per-channel mean absolute
    deviation across the N runs, sigma_bar its channel average, and the
    index the time average of sigma_bar after ``washout_samples``.
    """
    trajs = np.asarray(trajectories, dtype=float)
    if trajs.ndim == 2:  # single-channel convenience: (N, T)
        trajs = trajs[:, :, None]
    if trajs.ndim != 3:
        raise ValueError("expected trajectories of shape (N, T, channels)")
    n = trajs.shape[0]
    if n < 2:
        raise ValueError("need at least 2 trajectories")
    if not 0 <= washout_samples < trajs.shape[1]:
        raise ValueError("washout_samples out of range")
    mean = trajs.mean(axis=0)
    sigma = np.abs(trajs - mean).mean(axis=0)      # (T, channels)
    sigma_bar = sigma.mean(axis=1)                 # (T,)
    index = float(sigma_bar[washout_samples:].mean())
    return EspReport(sigma=sigma, sigma_bar=sigma_bar, index=index,
                     threshold=threshold, holds=index < threshold,
                     washout_samples=washout_samples)


def esp_from_dataset(dataset: Dataset, label=None,
                     threshold: float = ESP_THRESHOLD) -> EspReport:
    """ESP report from the raw joint trajectories kept in a dataset.

    Uses the middle class by default; the washout equals the protocol's
    washout periods.
    """
    if not dataset.raw_joint_series:
        raise ValueError("dataset was built without raw joint series")
    if label is None:
        labels = sorted(dataset.raw_joint_series)
        label = labels[len(labels) // 2]
    trajs = dataset.raw_joint_series[label]
    washout = dataset.spec.n_washout * dataset.samples_per_period
    return esp_index(trajs, washout_samples=washout, threshold=threshold)


# ---------------------------------------------------------------------------
# Silhouette separability


def silhouette(points, labels, noise_sigma: float = 0.0,
               seed: int = 0) -> float:
    """Mean silhouette coefficient with optional coordinate jitter.

    Per-sample: s = (b - a) / max(a, b) with a the mean intra-cluster
    distance (0 by convention for singletons and for coincident
    clusters) and b the smallest mean distance to another cluster.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    labels = np.asarray(labels)
    if pts.shape[0] != labels.shape[0]:
        raise ValueError("points and labels must align")
    uniq = np.unique(labels)
    if uniq.shape[0] < 2:
        raise ValueError("need at least 2 clusters")
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        pts = pts + rng.normal(0.0, noise_sigma, pts.shape)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    n = pts.shape[0]
    scores = np.empty(n)
    cluster_masks = {c: labels == c for c in uniq}
    for i in range(n):
        own = cluster_masks[labels[i]]
        n_own = int(own.sum())
        if n_own <= 1:
            scores[i] = 0.0
            continue
        a = dist[i][own].sum() / (n_own - 1)  # excludes the zero self-term
        b = min(dist[i][cluster_masks[c]].mean()
                for c in uniq if c != labels[i])
        m = max(a, b)
        scores[i] = 0.0 if m == 0.0 else (b - a) / m
    return float(scores.mean())


def silhouette_timeseries(dataset: Dataset, channels=None,
                          noise_sigma: float = SILHOUETTE_NOISE,
                          seed=None) -> SilhouetteSeries:
    """Silhouette of the class clusters at every instant of the period.

    One point per retained window, coordinates = the selected channels
    at that time index."""
    if channels is None:
        channels = list(range(dataset.n_channels))
    if seed is None:
        seed = dataset.spec.seed
    spp = dataset.samples_per_period
    values = np.empty(spp)
    for t in range(spp):
        pts = dataset.windows[:, t, channels]
        values[t] = silhouette(pts, dataset.labels, noise_sigma=noise_sigma,
                               seed=seed + t)
    arg = int(np.argmax(values))
    return SilhouetteSeries(values=values, max_value=float(values[arg]),
                            argmax_index=arg)


# ---------------------------------------------------------------------------
# CSV reports


def write_accuracy_csv(curve: AccuracyCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "mean", "std"])
        for i in range(len(curve)):
            writer.writerow([i, repr(float(curve.mean[i])),
                             repr(float(curve.std[i]))])


def write_esp_csv(report: EspReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_index", "sigma_bar"])
        for t, v in enumerate(report.sigma_bar):
            writer.writerow([t, repr(float(v))])


def write_silhouette_csv(series: SilhouetteSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_index", "silhouette"])
        for t, v in enumerate(series.values):
            writer.writerow([t, repr(float(v))])


def write_body_accuracy_csv(body: BodyAccuracy, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["joint", "max_accuracy"])
        for j, v in enumerate(body.per_joint):
            writer.writerow([j, repr(float(v))])
        writer.writerow(["all", repr(float(body.all_channels))])
