"""Timestamp-aware CNN binary classifier used to measure every augmenter.

The network has the discriminator's topology and conditioning: series and
standardized timestamps enter as two channels, then conv+ReLU+pool twice, a
dense head and a sigmoid.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gan import ConfigError, identity_stats, init_scorer, scorer_logits, timestamp_stats
from .series import IrregularSeries, LabeledDataset, SeriesError, stack, time_range

PREFIX = "clf"


@dataclass
class ClassifierConfig:
    channels: tuple[int, ...] = (32, 64)
    kernel_size: int = 5
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if len(self.channels) != 2 or min(self.channels) < 1:
            raise ConfigError("classifier channels need 2 positive entries")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd and positive, got {self.kernel_size}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be positive and epochs non-negative")


@dataclass
class TrainedClassifier:
    config: ClassifierConfig
    params: dict[str, T.Tensor]
    series_len: int
    t_range: tuple[float, float]
    t_stats: tuple[np.ndarray, np.ndarray] | None = None
    loss_trace: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.t_stats is None:
            self.t_stats = identity_stats(self.series_len)


def _as_arrays(series_batch, timestamps=None) -> tuple[np.ndarray, np.ndarray]:
    if timestamps is None:
        ts, xs = stack(list(series_batch))
    else:
        xs = np.atleast_2d(np.asarray(series_batch, dtype=np.float64))
        ts = np.atleast_2d(np.asarray(timestamps, dtype=np.float64))
        if xs.shape != ts.shape:
            raise SeriesError(f"values {xs.shape} and timestamps {ts.shape} differ in shape")
    return ts, xs


def init_classifier(config: ClassifierConfig, series_len: int, t_range, rng=None) -> TrainedClassifier:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    params = init_scorer(config.channels, config.kernel_size, series_len, rng, PREFIX)
    return TrainedClassifier(config, params, series_len, tuple(float(x) for x in t_range))


def train_classifier(train: LabeledDataset, config: ClassifierConfig, t_range=None) -> TrainedClassifier:
    """Fit with mean binary cross-entropy and Adam on shuffled minibatches."""
    counts = train.counts()
    if counts[0] == 0 or counts[1] == 0:
        raise SeriesError(f"degenerate training set: class counts {counts}")
    lengths = train.lengths()
    if len(lengths) != 1:
        raise SeriesError(f"training series have mixed lengths {sorted(lengths)}")
    t_range = time_range(train) if t_range is None else t_range
    rng = np.random.default_rng(config.seed)
    clf = init_classifier(config, lengths.pop(), t_range, rng)
    lo, hi = clf.t_range
    ts, xs = stack(train.series)
    ts = (ts - lo) / (hi - lo)
    clf.t_stats = timestamp_stats(ts)
    ys = train.labels.astype(np.float64)[:, None]
    params = list(clf.params.values())
    opt = T.AdamState.for_params(params, lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    n = len(ys)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            prob = T.sigmoid(scorer_logits(xs[idx], ts[idx], clf.params, PREFIX, clf.t_stats))
            loss = T.bce_loss(prob, ys[idx])
            T.backward(loss)
            T.adam_step(params, [p.grad for p in params], opt)
            losses.append(loss.item())
        clf.loss_trace.append((epoch, float(np.mean(losses))))
    return clf


def logits(clf: TrainedClassifier, series_batch, timestamps=None) -> np.ndarray:
    """Pre-sigmoid scores; same ranking as :func:`score` without saturation ties."""
    ts, xs = _as_arrays(series_batch, timestamps)
    if xs.shape[1] != clf.series_len:
        raise SeriesError(f"series length {xs.shape[1]} != classifier length {clf.series_len}")
    lo, hi = clf.t_range
    with T.no_grad():
        return scorer_logits(xs, (ts - lo) / (hi - lo), clf.params, PREFIX, clf.t_stats).data[:, 0]


def score(clf: TrainedClassifier, series_batch, timestamps=None) -> np.ndarray:
    """Probability of label 1 per series.

    ``series_batch`` is either a list of :class:`IrregularSeries` or a values
    array ``[N, L]`` paired with raw ``timestamps`` of the same shape.
    """
    with T.no_grad():
        return T.sigmoid(T.Tensor(logits(clf, series_batch, timestamps))).data


def predict(clf: TrainedClassifier, series_batch, timestamps=None) -> np.ndarray:
    return (score(clf, series_batch, timestamps) >= 0.5).astype(int)


def save_classifier(clf: TrainedClassifier, path) -> None:
    meta = {
        "kind": "classifier",
        "config": asdict(clf.config),
        "series_len": clf.series_len,
        "t_range": list(clf.t_range),
    }
    arrays = {k: p.data for k, p in clf.params.items()}
    arrays[f"{PREFIX}.t_mean"], arrays[f"{PREFIX}.t_std"] = clf.t_stats
    save_checkpoint(path, arrays, meta)


def load_classifier(path) -> TrainedClassifier:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "classifier":
        raise CheckpointError(f"{path}: not a classifier checkpoint")
    clf = init_classifier(ClassifierConfig(**meta["config"]), meta["series_len"], meta["t_range"])
    for name, p in clf.params.items():
        if arrays[name].shape != p.shape:
            raise CheckpointError(f"{path}: {name} has shape {arrays[name].shape}, expected {p.shape}")
        p.data = arrays[name]
    clf.t_stats = (arrays[f"{PREFIX}.t_mean"], arrays[f"{PREFIX}.t_std"])
    return clf


def series_from_arrays(ts: np.ndarray, xs: np.ndarray) -> list[IrregularSeries]:
    return [IrregularSeries(t, x) for t, x in zip(ts, xs)]
