"""Irregularly sampled labeled time series: synthesis, degradation, regridding, I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_HEADER = "# tcgan-series v1"


class SeriesError(ValueError):
    """A series or dataset violates its invariants."""


class SeriesParseError(SeriesError):
    pass


@dataclass(frozen=True)
class IrregularSeries:
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=np.float64)
        v = np.array(self.values, dtype=np.float64)
        if t.ndim != 1 or v.ndim != 1 or t.shape != v.shape:
            raise SeriesError(f"timestamps and values must be equal-length vectors, got {t.shape} and {v.shape}")
        if len(t) < 2:
            raise SeriesError(f"a series needs at least 2 points, got {len(t)}")
        if not np.all(np.diff(t) > 0):
            raise SeriesError("timestamps must be strictly increasing")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.timestamps)

    def __eq__(self, other):
        if not isinstance(other, IrregularSeries):
            return NotImplemented
        return np.array_equal(self.timestamps, other.timestamps) and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass
class LabeledDataset:
    items: list[tuple[IrregularSeries, int]] = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        for i, (_, y) in enumerate(self.items):
            if y not in (0, 1):
                raise SeriesError(f"item {i}: label must be 0 or 1, got {y!r}")

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def labels(self) -> np.ndarray:
        return np.array([y for _, y in self.items], dtype=int)

    @property
    def series(self) -> list[IrregularSeries]:
        return [s for s, _ in self.items]

    def counts(self) -> dict[int, int]:
        labels = self.labels
        return {0: int(np.sum(labels == 0)), 1: int(np.sum(labels == 1))}

    def of_class(self, label: int) -> list[IrregularSeries]:
        return [s for s, y in self.items if y == label]

    def lengths(self) -> set[int]:
        return {len(s) for s, _ in self.items}

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return len(self) == len(other) and all(
            a == b and ya == yb for (a, ya), (b, yb) in zip(self.items, other.items)
        )


@dataclass(frozen=True)
class SynthesisParams:
    length: int = 40
    t_range: tuple[float, float] = (0.0, 12.0)
    amplitude_base: float = 1.0
    amplitude_jitter_sigma: float = 0.1
    noise_sigma: float = 0.1
    period: float = 2 * math.pi
    phase_shift: float = 0.0
    vertical_shift: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.length < 2:
            raise SeriesError(f"length must be >= 2, got {self.length}")
        if self.amplitude_jitter_sigma < 0 or self.noise_sigma < 0:
            raise SeriesError("noise sigmas must be non-negative")
        if not self.t_range[1] > self.t_range[0]:
            raise SeriesError(f"empty time range {self.t_range}")


# ---------------------------------------------------------------------------
# synthesis


def sine_wave(t, amplitude=1.0, period=2 * math.pi, phase=0.0, shift=0.0):
    return amplitude * np.sin(2 * np.pi * (np.asarray(t) - phase) / period) + shift


def sawtooth_wave(t, amplitude=1.0, period=2 * math.pi, phase=0.0, shift=0.0):
    """Zero-centred rising sawtooth with range [-amplitude, amplitude)."""
    u = (np.asarray(t) - phase) / period
    return amplitude * 2.0 * (u - np.floor(u + 0.5)) + shift


def _draw_timestamps(params: SynthesisParams, rng: np.random.Generator) -> np.ndarray:
    lo, hi = params.t_range
    t = np.sort(rng.uniform(lo, hi, params.length))
    # duplicate draws are measure-zero but would break strict ordering
    while np.any(np.diff(t) <= 0):
        dup = np.flatnonzero(np.diff(t) <= 0) + 1
        t[dup] = rng.uniform(lo, hi, len(dup))
        t.sort()
    return t


def _generate(wave, params: SynthesisParams, rng: np.random.Generator) -> IrregularSeries:
    t = _draw_timestamps(params, rng)
    a = params.amplitude_base + rng.normal(0.0, params.amplitude_jitter_sigma)
    clean = wave(t, a, params.period, params.phase_shift, params.vertical_shift)
    return IrregularSeries(t, clean + rng.normal(0.0, params.noise_sigma, params.length))


def gen_sine(params: SynthesisParams, rng: np.random.Generator) -> IrregularSeries:
    return _generate(sine_wave, params, rng)


def gen_sawtooth(params: SynthesisParams, rng: np.random.Generator) -> IrregularSeries:
    return _generate(sawtooth_wave, params, rng)


def make_synthetic_dataset(per_class: int, params: SynthesisParams, rng: np.random.Generator | None = None) -> LabeledDataset:
    """``per_class`` sines (label 0) followed by ``per_class`` sawtooths (label 1).

    Uses ``params.seed`` unless an explicit generator is passed.
    """
    if per_class < 1:
        raise SeriesError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(params.seed) if rng is None else rng
    items = [(gen_sine(params, rng), 0) for _ in range(per_class)]
    items += [(gen_sawtooth(params, rng), 1) for _ in range(per_class)]
    return LabeledDataset(items, name=f"synthetic-S{per_class}-L{params.length}")


# ---------------------------------------------------------------------------
# degradation and regridding


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def drop_points(series: IrregularSeries, fraction: float, rng: np.random.Generator) -> IrregularSeries:
    """Remove ``round(fraction*L)`` points chosen uniformly without replacement."""
    if not 0 <= fraction < 1:
        raise SeriesError(f"fraction must lie in [0, 1), got {fraction}")
    n = len(series)
    n_drop = round_half_up(fraction * n)
    if n - n_drop < 2:
        raise SeriesError(f"dropping {n_drop} of {n} points leaves fewer than 2")
    if n_drop == 0:
        return series
    keep = np.sort(rng.choice(n, size=n - n_drop, replace=False))
    return IrregularSeries(series.timestamps[keep], series.values[keep])


def interpolate_regular(series: IrregularSeries, target_len: int) -> IrregularSeries:
    if target_len < 2:
        raise SeriesError(f"target_len must be >= 2, got {target_len}")
    t = series.timestamps
    grid = np.linspace(t[0], t[-1], target_len)
    grid[-1] = t[-1]
    return IrregularSeries(grid, np.interp(grid, t, series.values))


def normalize_timestamps(series: IrregularSeries, t_min: float, t_max: float) -> IrregularSeries:
    if not t_max > t_min:
        raise SeriesError(f"t_max ({t_max}) must exceed t_min ({t_min})")
    return IrregularSeries((series.timestamps - t_min) / (t_max - t_min), series.values)


def denormalize_timestamps(t: np.ndarray, t_min: float, t_max: float) -> np.ndarray:
    return np.asarray(t) * (t_max - t_min) + t_min


def time_range(*datasets: LabeledDataset) -> tuple[float, float]:
    lo = min(float(s.timestamps[0]) for d in datasets for s in d.series)
    hi = max(float(s.timestamps[-1]) for d in datasets for s in d.series)
    return lo, hi


def shares_grid(dataset: LabeledDataset) -> bool:
    """True when every series is sampled on one common timestamp vector."""
    series = dataset.series
    if not series:
        return True
    ref = series[0].timestamps
    return all(len(s) == len(ref) and np.array_equal(s.timestamps, ref) for s in series[1:])


def unbalance(dataset: LabeledDataset, class_label: int, keep_n: int, rng: np.random.Generator) -> LabeledDataset:
    """Subsample ``class_label`` down to ``keep_n`` items; relative order is kept."""
    idx = [i for i, (_, y) in enumerate(dataset.items) if y == class_label]
    if keep_n > len(idx) or keep_n < 0:
        raise SeriesError(f"cannot keep {keep_n} of {len(idx)} items of class {class_label}")
    kept = set(rng.choice(idx, size=keep_n, replace=False).tolist()) if keep_n else set()
    items = [it for i, it in enumerate(dataset.items) if it[1] != class_label or i in kept]
    return LabeledDataset(items, name=dataset.name)


def stack(series: list[IrregularSeries]) -> tuple[np.ndarray, np.ndarray]:
    """Stack equal-length series into ``(timestamps [N,L], values [N,L])``."""
    lengths = {len(s) for s in series}
    if len(lengths) != 1:
        raise SeriesError(f"series lengths differ: {sorted(lengths)}")
    return np.stack([s.timestamps for s in series]), np.stack([s.values for s in series])


# ---------------------------------------------------------------------------
# CSV


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def save_csv(dataset: LabeledDataset, path) -> None:
    lines = [CSV_HEADER]
    for s, y in dataset.items:
        pairs = ",".join(f"{_fmt(t)}:{_fmt(v)}" for t, v in zip(s.timestamps, s.values))
        lines.append(f"{y},{pairs}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_csv(path) -> LabeledDataset:
    """Read the ``label,t1:v1,t2:v2,...`` format; errors cite 1-based line numbers."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if not lines or lines[0].strip() != CSV_HEADER:
        raise SeriesParseError(f"{path}:1: missing header {CSV_HEADER!r}")
    items = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(",")
        try:
            label = int(fields[0])
            pairs = [f.split(":") for f in fields[1:]]
            if any(len(p) != 2 for p in pairs):
                raise ValueError("expected t:v pairs")
            t = [float(p[0]) for p in pairs]
            v = [float(p[1]) for p in pairs]
        except ValueError as exc:
            raise SeriesParseError(f"{path}:{lineno}: malformed line ({exc})") from None
        if label not in (0, 1):
            raise SeriesParseError(f"{path}:{lineno}: label must be 0 or 1, got {label}")
        try:
            items.append((IrregularSeries(t, v), label))
        except SeriesError as exc:
            raise SeriesError(f"{path}:{lineno}: series {len(items)}: {exc}") from None
    return LabeledDataset(items, name=path.stem)
