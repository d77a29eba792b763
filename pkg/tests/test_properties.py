"""Property-based invariants. ``CASES`` records how many examples each property ran."""

import functools
import tempfile
from collections import Counter
from pathlib import Path

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tcgan import tensor as T
from tcgan.baselines import WarpConfig, slice_series, time_warp
from tcgan.checkpoint import load_checkpoint, save_checkpoint
from tcgan.evaluation import auroc
from tcgan.gan import TcganConfig, generator_forward, init_model, load_model, save_model
from tcgan.series import (
    IrregularSeries,
    LabeledDataset,
    SeriesError,
    SynthesisParams,
    drop_points,
    interpolate_regular,
    load_csv,
    make_synthetic_dataset,
    save_csv,
)

CASES: Counter = Counter()


def counted(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        CASES[fn.__name__] += 1
        return fn(*args, **kwargs)

    return wrapper


def prop(n):
    return settings(max_examples=n, deadline=None, derandomize=True, database=None,
                    suppress_health_check=[HealthCheck.too_slow])


seeds = st.integers(0, 2**32 - 1)
finite = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def irregular(draw, min_len=2, max_len=60):
    n = draw(st.integers(min_len, max_len))
    steps = draw(hnp.arrays(np.float64, n, elements=st.floats(1e-3, 10.0)))
    t0 = draw(st.floats(-100, 100))
    values = draw(hnp.arrays(np.float64, n, elements=finite))
    return IrregularSeries(t0 + np.cumsum(steps), values)


def increasing(t):
    return bool(np.all(np.diff(t) > 0))


# -- timestamps stay sorted --------------------------------------------------


@prop(150)
@given(length=st.integers(2, 120), seed=seeds, lo=st.floats(-50, 50), width=st.floats(0.5, 100))
@counted
def test_synthesis_sorted_in_range(length, seed, lo, width):
    d = make_synthetic_dataset(2, SynthesisParams(length=length, t_range=(lo, lo + width), seed=seed))
    for s in d.series:
        assert len(s) == length and increasing(s.timestamps)
        assert s.timestamps[0] >= lo and s.timestamps[-1] <= lo + width


@prop(150)
@given(s=irregular(min_len=4), fraction=st.floats(0, 0.5), seed=seeds)
@counted
def test_drop_points_subsequence(s, fraction, seed):
    out = drop_points(s, fraction, np.random.default_rng(seed))
    assert increasing(out.timestamps)
    assert len(out) == len(s) - int(np.floor(fraction * len(s) + 0.5))
    idx = np.searchsorted(s.timestamps, out.timestamps)
    np.testing.assert_array_equal(s.timestamps[idx], out.timestamps)
    np.testing.assert_array_equal(s.values[idx], out.values)


@prop(100)
@given(s=irregular(), target=st.integers(2, 100))
@counted
def test_interpolation_grid(s, target):
    out = interpolate_regular(s, target)
    assert len(out) == target and increasing(out.timestamps)
    assert out.timestamps[0] == s.timestamps[0] and out.timestamps[-1] == s.timestamps[-1]
    assert out.values.min() >= s.values.min() and out.values.max() <= s.values.max()


# -- slicing and warping -----------------------------------------------------


@prop(150)
@given(s=irregular(), data=st.data())
@counted
def test_slices_partition(s, data):
    k = data.draw(st.integers(1, len(s) // 2))
    pieces = slice_series(s, k)
    lengths = [len(p) for p in pieces]
    assert len(pieces) == k and max(lengths) - min(lengths) <= 1 and lengths == sorted(lengths, reverse=True)
    np.testing.assert_array_equal(np.concatenate([p.timestamps for p in pieces]), s.timestamps)
    np.testing.assert_array_equal(np.concatenate([p.values for p in pieces]), s.values)
    assert _too_many_slices(s, len(s) // 2 + 1)


def _too_many_slices(s, k):
    try:
        slice_series(s, k)
    except SeriesError:
        return True
    return False


@prop(150)
@given(s=irregular(min_len=6, max_len=80), frac=st.floats(0.34, 1.0),
       ratios=st.lists(st.sampled_from([0.25, 0.5, 1.0, 1.5, 2.0, 3.0]), min_size=1, max_size=3, unique=True),
       seed=seeds)
@counted
def test_warp_restores_length(s, frac, ratios, seed):
    out = time_warp(s, WarpConfig(ratios=tuple(ratios), slice_fraction=frac), np.random.default_rng(seed))
    assert len(out) == len(s) and increasing(out.timestamps)
    assert out.timestamps[0] >= s.timestamps[0] and out.timestamps[-1] <= s.timestamps[-1]


# -- sigmoid -----------------------------------------------------------------


@prop(150)
@given(x=hnp.arrays(np.float64, hnp.array_shapes(max_dims=3, max_side=6),
                    elements=st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False)))
@counted
def test_sigmoid_open_unit_interval(x):
    y = T.sigmoid(T.Tensor(x)).data
    assert y.shape == x.shape and np.all(np.isfinite(y))
    assert np.all((y > 0) & (y < 1))
    np.testing.assert_array_equal(y[x > 0] >= 0.5, True)


# -- serialization round-trips ------------------------------------------------

names = st.text("abcdefghijklmnopqrstuvwxyz0123456789._", min_size=1, max_size=12)


@prop(100)
@given(arrays=st.dictionaries(names, hnp.arrays(np.float64, hnp.array_shapes(min_dims=0, max_dims=3, min_side=0,
                                                                            max_side=5),
                                                elements=st.floats(allow_nan=False)), max_size=4),
       meta=st.dictionaries(names, st.integers() | st.text(max_size=8), max_size=3))
@counted
def test_checkpoint_roundtrip(arrays, meta):
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "c.ckpt"
        save_checkpoint(p, arrays, meta)
        back, meta2 = load_checkpoint(p)
    assert meta2 == meta and list(back) == list(arrays)
    for k, a in arrays.items():
        assert back[k].shape == a.shape
        np.testing.assert_array_equal(back[k], a)


@prop(30)
@given(seed=seeds, latent=st.integers(1, 5), length=st.sampled_from([8, 12, 16]))
@counted
def test_model_checkpoint_roundtrip(seed, latent, length):
    cfg = TcganConfig(latent_dim=latent, series_len=length, gen_channels=(3, 2, 2, 1), disc_channels=(2, 3),
                      kernel_size=3, seed=seed)
    m = init_model(cfg)
    rng = np.random.default_rng(seed)
    m.t_stats = (rng.random(length), rng.uniform(0.1, 1, length))
    z, t = rng.standard_normal((3, latent)), np.sort(rng.random((3, length)), axis=1)
    with tempfile.TemporaryDirectory() as d:
        save_model(m, Path(d) / "m.ckpt")
        m2 = load_model(Path(d) / "m.ckpt")
    assert m2.config == cfg
    np.testing.assert_array_equal(generator_forward(z, t, m).data, generator_forward(z, t, m2).data)


@prop(100)
@given(items=st.lists(st.tuples(irregular(max_len=20), st.integers(0, 1)), max_size=6))
@counted
def test_csv_roundtrip(items):
    d = LabeledDataset(items)
    with tempfile.TemporaryDirectory() as tmp:
        save_csv(d, Path(tmp) / "d.csv")
        back = load_csv(Path(tmp) / "d.csv")
    assert back == d


# -- AUROC -------------------------------------------------------------------


@prop(100)
@given(data=st.data(), n=st.integers(2, 80), levels=st.integers(1, 20))
@counted
def test_auroc_flip_and_range(data, n, levels):
    labels = data.draw(hnp.arrays(np.int64, n, elements=st.integers(0, 1)))
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    scores = data.draw(hnp.arrays(np.float64, n, elements=st.integers(0, levels).map(float)))
    a = auroc(scores, labels)
    assert 0 <= a <= 1
    assert abs(auroc(scores, 1 - labels) - (1 - a)) < 1e-12
    assert abs(auroc(-scores, labels) - (1 - a)) < 1e-12


PROPERTIES = [
    test_synthesis_sorted_in_range,
    test_drop_points_subsequence,
    test_interpolation_grid,
    test_slices_partition,
    test_warp_restores_length,
    test_sigmoid_open_unit_interval,
    test_checkpoint_roundtrip,
    test_model_checkpoint_roundtrip,
    test_csv_roundtrip,
    test_auroc_flip_and_range,
]
