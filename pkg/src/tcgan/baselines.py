"""Comparison augmenters: time slicing with majority vote, and time warping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import IrregularSeries, LabeledDataset, SeriesError, interpolate_regular, round_half_up


@dataclass(frozen=True)
class SlicingConfig:
    n_slices: int = 3

    def __post_init__(self):
        if self.n_slices < 1:
            raise SeriesError(f"n_slices must be positive, got {self.n_slices}")


@dataclass(frozen=True)
class WarpConfig:
    ratios: tuple[float, ...] = (0.5, 2.0)
    slice_fraction: float = 1 / 3
    seed: int = 0

    def __post_init__(self):
        if not self.ratios or min(self.ratios) <= 0:
            raise SeriesError("warp ratios must be a non-empty set of positive numbers")
        if not 0 < self.slice_fraction <= 1:
            raise SeriesError(f"slice_fraction must lie in (0, 1], got {self.slice_fraction}")


def slice_lengths(length: int, n_slices: int) -> list[int]:
    base, extra = divmod(length, n_slices)
    return [base + 1] * extra + [base] * (n_slices - extra)


def slice_series(series: IrregularSeries, n_slices: int) -> list[IrregularSeries]:
    """Contiguous partition into ``n_slices`` pieces; longer pieces come first."""
    # every slice must itself be a valid series (>= 2 points)
    if n_slices < 1 or len(series) // n_slices < 2:
        raise SeriesError(f"cannot cut a series of length {len(series)} into {n_slices} slices of >= 2 points")
    bounds = np.cumsum([0] + slice_lengths(len(series), n_slices))
    return [
        IrregularSeries(series.timestamps[a:b], series.values[a:b]) for a, b in zip(bounds[:-1], bounds[1:])
    ]


def _uniform_slices(series: IrregularSeries, n_slices: int) -> list[IrregularSeries]:
    # the classifier needs one input length; shorter slices are resampled up
    pieces = slice_series(series, n_slices)
    width = len(pieces[0])
    return [p if len(p) == width else interpolate_regular(p, width) for p in pieces]


def slicing_augment(dataset: LabeledDataset, config: SlicingConfig = SlicingConfig()) -> LabeledDataset:
    items = [(piece, y) for s, y in dataset.items for piece in _uniform_slices(s, config.n_slices)]
    return LabeledDataset(items, name=f"{dataset.name}-sliced")


def majority_vote(slice_scores) -> int:
    """Majority of slice labels at threshold 0.5; ties go to 1 when the mean score is >= 0.5."""
    p = np.asarray(slice_scores, dtype=np.float64)
    ones = int(np.sum(p >= 0.5))
    zeros = len(p) - ones
    if ones != zeros:
        return int(ones > zeros)
    return int(p.mean() >= 0.5)


def slicing_classify(slice_scorer, series: IrregularSeries, n_slices: int) -> int:
    """``slice_scorer`` maps a list of slices to their probabilities of label 1."""
    return majority_vote(slice_scorer(_uniform_slices(series, n_slices)))


def vote_fraction(slice_scorer, series: IrregularSeries, n_slices: int) -> float:
    """Share of slices voting 1; thresholding at 0.5 reproduces the majority label except on ties."""
    p = np.asarray(slice_scorer(_uniform_slices(series, n_slices)))
    return float(np.mean(p >= 0.5))


def time_warp(series: IrregularSeries, config: WarpConfig, rng: np.random.Generator) -> IrregularSeries:
    """Speed up or slow down one random slice, then restore the original length.

    The slice of ``round(slice_fraction*L)`` points is linearly resampled onto
    ``round(ratio*m)`` points spread evenly over its own time span. A longer
    result is cropped to a random window of ``L`` points; a shorter one is
    resampled back to ``L`` points on an even grid.
    """
    n = len(series)
    m = round_half_up(config.slice_fraction * n)
    if m < 2:
        raise SeriesError(f"warp slice of {m} points is degenerate (length {n})")
    start = int(rng.integers(0, n - m + 1))
    ratio = float(config.ratios[int(rng.integers(0, len(config.ratios)))])
    if ratio == 1.0:
        return series
    t, v = series.timestamps, series.values
    ts, vs = t[start : start + m], v[start : start + m]
    new_m = max(2, round_half_up(ratio * m))
    new_t = np.linspace(ts[0], ts[-1], new_m)
    new_t[-1] = ts[-1]
    new_v = np.interp(new_t, ts, vs)
    t2 = np.concatenate([t[:start], new_t, t[start + m :]])
    v2 = np.concatenate([v[:start], new_v, v[start + m :]])
    if len(t2) > n:
        off = int(rng.integers(0, len(t2) - n + 1))
        return IrregularSeries(t2[off : off + n], v2[off : off + n])
    if len(t2) < n:
        return interpolate_regular(IrregularSeries(t2, v2), n)
    return IrregularSeries(t2, v2)


def warping_augment(
    dataset: LabeledDataset, class_label: int, target_count: int, config: WarpConfig, rng: np.random.Generator
) -> LabeledDataset:
    """Append warped copies of random ``class_label`` members until it has ``target_count``."""
    members = dataset.of_class(class_label)
    if not members:
        raise SeriesError(f"class {class_label} is empty; nothing to warp")
    extra = []
    for _ in range(max(0, target_count - len(members))):
        src = members[int(rng.integers(0, len(members)))]
        extra.append((time_warp(src, config, rng), class_label))
    return LabeledDataset(list(dataset.items) + extra, name=dataset.name)
