"""AUROC, train-on-synthetic/test-on-real, and the augmentation comparison protocols.

Every protocol repeats ``n_runs`` times on one fixed train/test split. Run ``r``
draws fresh seeds for GAN initialisation, sampling, augmentation and classifier
initialisation from ``SeedSequence(seed).spawn(n_runs)[r]``, so results depend
only on the inputs and ``seed``, whatever ``jobs`` is.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import classifier as C
from .baselines import SlicingConfig, WarpConfig, slicing_augment, vote_fraction, warping_augment
from .gan import ConfigError, TcganConfig, sample, train_tcgan
from .series import (
    LabeledDataset,
    SeriesError,
    SynthesisParams,
    drop_points,
    interpolate_regular,
    load_csv,
    make_synthetic_dataset,
    round_half_up,
    shares_grid,
    time_range,
    unbalance,
)

METHODS = ("none", "slicing", "warping", "tcgan")
KINDS = ("tstr", "compare", "rebalance", "missing")


# ---------------------------------------------------------------------------
# AUROC


def auroc(scores, labels) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counting one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ValueError(f"scores {s.shape} and labels {y.shape} differ in shape")
    pos = y == 1
    n_pos, n_neg = int(pos.sum()), int((y == 0).sum())
    if n_pos == 0 or n_neg == 0 or n_pos + n_neg != len(y):
        raise ValueError("undefined AUROC: need both labels 0 and 1 present (and no others)")
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    # average 1-based rank of each tie group
    upper = np.cumsum(counts)
    ranks = (upper - (counts - 1) / 2.0)[inverse]
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class AurocResult:
    per_run: list[float]
    ddof: int = 0

    def __post_init__(self):
        if not self.per_run:
            raise ValueError("AurocResult needs at least one run")
        if any(not 0.0 <= a <= 1.0 for a in self.per_run):
            raise ValueError("AUROC values must lie in [0, 1]")

    @property
    def n_runs(self) -> int:
        return len(self.per_run)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_run))

    @property
    def std(self) -> float:
        if len(self.per_run) <= self.ddof:
            return 0.0
        return float(np.std(self.per_run, ddof=self.ddof))

    def __str__(self):
        return f"{self.mean:.4f}±{self.std:.4f}"


# ---------------------------------------------------------------------------
# experiment description


@dataclass
class ExperimentSpec:
    kind: str = "compare"
    name: str = "experiment"
    # data: CSV paths, or synthetic sine/sawtooth when both are unset
    train_csv: str | None = None
    test_csv: str | None = None
    series_len: int = 40
    train_per_class: int = 40
    test_per_class: int = 100
    # TSTR grid over training-set sizes and series lengths (synthetic only)
    sizes: tuple[int, ...] = (40,)
    lengths: tuple[int, ...] = (40, 90)
    # imbalance; counts of None keep the data as loaded
    minority_label: int = 1
    minority_count: int | None = 20
    majority_count: int | None = 200
    methods: tuple[str, ...] = METHODS
    missing_fraction: float = 0.0
    fractions: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)
    ratios: tuple[float, ...] = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    n_runs: int = 10
    seed: int = 0
    data_seed: int = 0
    n_slices: int = 3
    warp_ratios: tuple[float, ...] = (0.5, 2.0)
    warp_slice_fraction: float = 1 / 3
    std_ddof: int = 0
    tcgan: TcganConfig = field(default_factory=TcganConfig)
    classifier: C.ClassifierConfig = field(default_factory=C.ClassifierConfig)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}")
        if (self.train_csv is None) != (self.test_csv is None):
            raise ConfigError("train_csv and test_csv must be given together")
        if not 0 <= self.missing_fraction < 1 or any(not 0 <= f < 1 for f in self.fractions):
            raise ConfigError("missing fractions must lie in [0, 1)")
        if any(not 0 < r <= 1 for r in self.ratios):
            raise ConfigError("ratios must lie in (0, 1]")
        if self.minority_label not in (0, 1):
            raise ConfigError("minority_label must be 0 or 1")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be positive")
        if self.std_ddof not in (0, 1):
            raise ConfigError("std_ddof must be 0 (population) or 1 (sample)")

    @property
    def majority_label(self) -> int:
        return 1 - self.minority_label

    def slicing(self) -> SlicingConfig:
        return SlicingConfig(self.n_slices)

    def warp(self) -> WarpConfig:
        return WarpConfig(tuple(self.warp_ratios), self.warp_slice_fraction)


def _child_seeds(seed: int, n: int, width: int = 4) -> list[list[int]]:
    return [[int(x) for x in ss.generate_state(width)] for ss in np.random.SeedSequence(seed).spawn(n)]


def prepare_data(spec: ExperimentSpec, series_len: int | None = None, train_per_class: int | None = None):
    """Build the fixed (train, test) split a spec describes, before point dropping."""
    data_rng, test_seed, unb_seed = _child_seeds(spec.data_seed, 1, 3)[0]
    if spec.train_csv is not None:
        train, test = load_csv(spec.train_csv), load_csv(spec.test_csv)
    else:
        length = series_len or spec.series_len
        per_class = train_per_class or max(
            spec.train_per_class, spec.minority_count or 0, spec.majority_count or 0
        )
        train = make_synthetic_dataset(per_class, SynthesisParams(length=length, seed=data_rng))
        test = make_synthetic_dataset(spec.test_per_class, SynthesisParams(length=length, seed=test_seed))
    rng = np.random.default_rng(unb_seed)
    for label, keep in ((spec.minority_label, spec.minority_count), (spec.majority_label, spec.majority_count)):
        if keep is not None and keep != train.counts()[label]:
            train = unbalance(train, label, keep, rng)
    return train, test


def degrade(dataset: LabeledDataset, fraction: float, seed: int) -> LabeledDataset:
    if fraction == 0:
        return dataset
    rng = np.random.default_rng(seed)
    return LabeledDataset([(drop_points(s, fraction, rng), y) for s, y in dataset.items], name=dataset.name)


def _regularize(dataset: LabeledDataset, length: int) -> LabeledDataset:
    return LabeledDataset([(interpolate_regular(s, length), y) for s, y in dataset.items], name=dataset.name)


def _single_length(dataset: LabeledDataset) -> int:
    lengths = dataset.lengths()
    if len(lengths) != 1:
        raise SeriesError(f"{dataset.name or 'dataset'}: series lengths differ {sorted(lengths)}")
    return next(iter(lengths))


# ---------------------------------------------------------------------------
# building blocks of one run


def _gan_config(cfg: TcganConfig, length: int, n_train: int, seed: int) -> TcganConfig:
    if n_train < 2:
        raise SeriesError(f"need at least 2 series to train a T-CGAN, got {n_train}")
    return replace(cfg, series_len=length, batch_size=min(cfg.batch_size, n_train), seed=seed)


def generate_like(series, n: int, cfg: TcganConfig, t_range, gan_seed: int, sample_seed: int, t_pool=None):
    """Train a T-CGAN on ``series`` and draw ``n`` new ones.

    Timestamp vectors are resampled with replacement from ``t_pool`` (default:
    the training series themselves).
    """
    if n <= 0:
        return []
    length = len(series[0])
    model = train_tcgan(series, _gan_config(cfg, length, len(series), gan_seed), t_range=t_range)
    rng = np.random.default_rng(sample_seed)
    pool = series if t_pool is None else t_pool
    picks = rng.integers(0, len(pool), n)
    return sample(model, [pool[i].timestamps for i in picks], rng)


def _fit_and_score(train: LabeledDataset, test: LabeledDataset, cfg: C.ClassifierConfig, seed: int, t_range) -> float:
    clf = C.train_classifier(train, replace(cfg, seed=seed), t_range=t_range)
    return auroc(C.logits(clf, test.series), test.labels)


def _method_auroc(method: str, train: LabeledDataset, test: LabeledDataset, spec: ExperimentSpec,
                  seeds: list[int], interp_len: int, target_ratio: float = 1.0) -> float:
    gan_seed, sample_seed, aug_seed, clf_seed = seeds
    minority, majority = spec.minority_label, spec.majority_label
    counts = train.counts()
    target = max(counts[minority], round_half_up(target_ratio * counts[majority]))
    regular = shares_grid(train) and shares_grid(test) and _single_length(train) == _single_length(test)

    if method == "none":
        return _fit_and_score(train, test, spec.classifier, clf_seed, time_range(train, test))

    if method == "tcgan":
        members = train.of_class(minority)
        new = generate_like(members, target - len(members), spec.tcgan, time_range(train, test), gan_seed, sample_seed,
                            t_pool=train.series)
        augmented = LabeledDataset(list(train.items) + [(s, minority) for s in new], name=train.name)
        return _fit_and_score(augmented, test, spec.classifier, clf_seed, time_range(train, test))

    if not regular:
        train, test = _regularize(train, interp_len), _regularize(test, interp_len)
    t_range = time_range(train, test)

    if method == "warping":
        augmented = warping_augment(train, minority, target, spec.warp(), np.random.default_rng(aug_seed))
        return _fit_and_score(augmented, test, spec.classifier, clf_seed, t_range)

    if method == "slicing":
        sliced = slicing_augment(train, spec.slicing())
        clf = C.train_classifier(sliced, replace(spec.classifier, seed=clf_seed), t_range=t_range)

        def scorer(pieces):
            return C.score(clf, pieces)

        votes = [vote_fraction(scorer, s, spec.n_slices) for s in test.series]
        return auroc(votes, test.labels)

    raise ConfigError(f"unknown method {method!r}")


def _map_runs(fn, args_list, jobs: int):
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*args_list)))


# ---------------------------------------------------------------------------
# protocols


def _tstr_run(train, test, tcgan_cfg, clf_cfg, seeds):
    t_range = time_range(train, test)
    items = []
    for label in (0, 1):
        members = train.of_class(label)
        new = generate_like(members, len(members), tcgan_cfg, t_range, seeds[2 * label], seeds[2 * label + 1])
        items += [(s, label) for s in new]
    generated = LabeledDataset(items, name=f"{train.name}-generated")
    return _fit_and_score(generated, test, clf_cfg, seeds[4], t_range)


def _real_run(train, test, clf_cfg, seed):
    return _fit_and_score(train, test, clf_cfg, seed, time_range(train, test))


def tstr_protocol(real_train: LabeledDataset, real_test: LabeledDataset, tcgan_config: TcganConfig,
                  classifier_config: C.ClassifierConfig, n_runs: int = 10, seed: int = 0, jobs: int = 1,
                  ddof: int = 0) -> AurocResult:
    """Train one T-CGAN per class, fit the classifier on generated data only, score real test data."""
    for d in (real_train, real_test):
        _single_length(d)
    seeds = _child_seeds(seed, n_runs, 5)
    args = [(real_train, real_test, tcgan_config, classifier_config, s) for s in seeds]
    return AurocResult(_map_runs(_tstr_run, args, jobs), ddof)


def real_data_control(real_train, real_test, classifier_config, n_runs=10, seed=0, jobs=1, ddof=0) -> AurocResult:
    """The same classifier trained on the real training split."""
    seeds = [s[4] for s in _child_seeds(seed, n_runs, 5)]
    args = [(real_train, real_test, classifier_config, s) for s in seeds]
    return AurocResult(_map_runs(_real_run, args, jobs), ddof)


def _compare_run(train, test, spec, methods, seeds, interp_len):
    return [_method_auroc(m, train, test, spec, seeds, interp_len) for m in methods]


def compare_methods(train: LabeledDataset, test: LabeledDataset, spec: ExperimentSpec,
                    methods=None, interp_len: int | None = None, jobs: int = 1) -> dict[str, AurocResult]:
    """AUROC of each augmentation method on one split, with shared per-run seeds.

    T-CGAN and warping fill the minority class up to the majority count.
    Slicing and warping work on series linearly regridded to ``interp_len``
    points whenever the data is not on one shared grid; the baseline and T-CGAN
    always see the raw (timestamp, value) pairs.
    """
    methods = tuple(spec.methods if methods is None else methods)
    interp_len = interp_len or max(_single_length(train), _single_length(test))
    seeds = _child_seeds(spec.seed, spec.n_runs)
    args = [(train, test, spec, methods, s, interp_len) for s in seeds]
    per_run = _map_runs(_compare_run, args, jobs)
    return {m: AurocResult([r[i] for r in per_run], spec.std_ddof) for i, m in enumerate(methods)}


def _rebalance_run(train, test, spec, ratios, seeds):
    gan_seed, sample_seed, _, clf_seed = seeds
    minority, majority = spec.minority_label, spec.majority_label
    counts = train.counts()
    t_range = time_range(train, test)
    members = train.of_class(minority)
    targets = [max(counts[minority], round_half_up(r * counts[majority])) for r in ratios]
    pool = generate_like(members, max(targets) - len(members), spec.tcgan, t_range, gan_seed, sample_seed,
                         t_pool=train.series)
    out = [_fit_and_score(train, test, spec.classifier, clf_seed, t_range)]
    for target in targets:
        extra = [(s, minority) for s in pool[: target - len(members)]]
        out.append(_fit_and_score(LabeledDataset(list(train.items) + extra), test, spec.classifier, clf_seed, t_range))
    return out


def rebalancing_experiment(train: LabeledDataset, test: LabeledDataset, ratios, spec: ExperimentSpec,
                           jobs: int = 1) -> list[tuple[str, float, AurocResult]]:
    """Rows ``(data, ratio, result)``: the untouched data first, then T-CGAN fills to each ratio.

    Within a run one generator is trained and its samples are shared across
    ratios, each ratio taking a prefix of the same pool.
    """
    counts = train.counts()
    base_ratio = counts[spec.minority_label] / counts[spec.majority_label]
    ratios = [float(r) for r in ratios]
    if base_ratio > min(ratios) + 1e-12:
        raise ConfigError(f"data ratio {base_ratio:.3f} already exceeds the smallest target {min(ratios)}")
    seeds = _child_seeds(spec.seed, spec.n_runs)
    per_run = _map_runs(_rebalance_run, [(train, test, spec, ratios, s) for s in seeds], jobs)
    rows = [("original", base_ratio, AurocResult([r[0] for r in per_run], spec.std_ddof))]
    for i, r in enumerate(ratios, start=1):
        rows.append(("tcgan", r, AurocResult([run[i] for run in per_run], spec.std_ddof)))
    return rows


def missing_fraction_sweep(train: LabeledDataset, test: LabeledDataset, fractions, methods, spec: ExperimentSpec,
                           jobs: int = 1) -> list[tuple[float, str, AurocResult]]:
    """Drop each fraction of points from every series, then compare ``methods``."""
    interp_len = max(_single_length(train), _single_length(test))
    rows = []
    for i, f in enumerate(fractions):
        s_train, s_test = _child_seeds(spec.data_seed + 7919 * (i + 1), 1, 2)[0]
        tr, te = degrade(train, f, s_train), degrade(test, f, s_test)
        results = compare_methods(tr, te, spec, methods, interp_len=interp_len, jobs=jobs)
        rows += [(float(f), m, results[m]) for m in methods]
    return rows


# ---------------------------------------------------------------------------
# running a spec and writing results


@dataclass
class ResultRow:
    experiment: str
    method: str
    param: str
    result: AurocResult


@dataclass
class ExperimentOutput:
    rows: list[ResultRow]
    plot_header: tuple[str, ...] = ()
    plot_rows: list[tuple] = field(default_factory=list)


def run_experiment(spec: ExperimentSpec, jobs: int = 1, log=None) -> ExperimentOutput:
    log = log or (lambda msg: None)
    rows: list[ResultRow] = []
    plot: list[tuple] = []

    if spec.kind == "tstr":
        if spec.train_csv is not None:
            train, test = prepare_data(spec)
            grid = [(None, None, train, test)]
        else:
            grid = []
            for size in spec.sizes:
                for length in spec.lengths:
                    unb = replace(spec, minority_count=None, majority_count=None)
                    tr, te = prepare_data(unb, series_len=length, train_per_class=size)
                    grid.append((size, length, tr, te))
        for size, length, tr, te in grid:
            param = "csv" if size is None else f"S{size}-L{length}"
            log(f"tstr {param}")
            gen = tstr_protocol(tr, te, spec.tcgan, spec.classifier, spec.n_runs, spec.seed, jobs, spec.std_ddof)
            real = real_data_control(tr, te, spec.classifier, spec.n_runs, spec.seed, jobs, spec.std_ddof)
            for method, res in (("gan", gen), ("real", real)):
                rows.append(ResultRow(spec.name, method, param, res))
                plot.append((size if size is not None else "", length if length is not None else "", method, res.mean, res.std))
        return ExperimentOutput(rows, ("size", "length", "method", "mean", "std"), plot)

    train, test = prepare_data(spec)

    if spec.kind == "compare":
        length = max(_single_length(train), _single_length(test))
        tr = degrade(train, spec.missing_fraction, spec.data_seed + 1)
        te = degrade(test, spec.missing_fraction, spec.data_seed + 2)
        results = compare_methods(tr, te, spec, interp_len=length, jobs=jobs)
        param = f"missing={spec.missing_fraction:g}"
        for m, res in results.items():
            rows.append(ResultRow(spec.name, m, param, res))
            plot.append((m, res.mean, res.std))
        return ExperimentOutput(rows, ("method", "mean", "std"), plot)

    if spec.kind == "rebalance":
        for label, ratio, res in rebalancing_experiment(train, test, spec.ratios, spec, jobs):
            rows.append(ResultRow(spec.name, label, f"ratio={ratio:g}", res))
            plot.append((ratio, label, res.mean, res.std))
        return ExperimentOutput(rows, ("ratio", "method", "mean", "std"), plot)

    methods = tuple(m for m in spec.methods if m != "slicing") if spec.methods == METHODS else spec.methods
    for f, m, res in missing_fraction_sweep(train, test, spec.fractions, methods, spec, jobs):
        rows.append(ResultRow(spec.name, m, f"missing={f:g}", res))
        plot.append((f, m, res.mean, res.std))
    return ExperimentOutput(rows, ("fraction", "method", "mean", "std"), plot)


def _num(x) -> str:
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def write_results(rows: list[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "method", "param", "run", "auroc"])
        for row in rows:
            for i, a in enumerate(row.result.per_run):
                w.writerow([row.experiment, row.method, row.param, i, _num(a)])


def write_summary(rows: list[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "method", "param", "mean", "std", "n_runs"])
        for row in rows:
            w.writerow([row.experiment, row.method, row.param, _num(row.result.mean), _num(row.result.std), row.result.n_runs])


def write_plot_csv(header, plot_rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in plot_rows:
            w.writerow([_num(x) for x in r])


def read_plot_csv(path) -> tuple[tuple[str, ...], list[tuple]]:
    """Inverse of :func:`write_plot_csv`; numeric cells come back as floats."""

    def parse(cell):
        try:
            return float(cell)
        except ValueError:
            return cell

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        return header, [tuple(parse(c) for c in r) for r in reader]


def summary_table(rows: list[ResultRow]) -> str:
    width = max([len(r.method) for r in rows] + [6])
    pwidth = max([len(r.param) for r in rows] + [5])
    lines = [f"{'method':<{width}}  {'param':<{pwidth}}  {'AUROC':>15}  runs"]
    for r in rows:
        lines.append(f"{r.method:<{width}}  {r.param:<{pwidth}}  {str(r.result):>15}  {r.result.n_runs}")
    return "\n".join(lines)


