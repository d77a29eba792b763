from dataclasses import replace

import numpy as np
import pytest

from tcgan import classifier as C
from tcgan.evaluation import (
    AurocResult,
    ExperimentSpec,
    auroc,
    compare_methods,
    degrade,
    prepare_data,
    read_plot_csv,
    rebalancing_experiment,
    run_experiment,
    summary_table,
    tstr_protocol,
    write_plot_csv,
    write_results,
    write_summary,
)
from tcgan.gan import ConfigError, TcganConfig
from tcgan.series import time_range

TINY_GAN = TcganConfig(latent_dim=4, gen_channels=(4, 4, 2, 1), disc_channels=(4, 4), kernel_size=3,
                       batch_size=8, epochs=2)
TINY_CLF = C.ClassifierConfig(channels=(4, 4), kernel_size=3, epochs=3, batch_size=16)


def tiny_spec(**kw):
    base = dict(series_len=12, train_per_class=10, test_per_class=10, minority_count=4, majority_count=10,
                n_runs=2, tcgan=TINY_GAN, classifier=TINY_CLF)
    base.update(kw)
    return ExperimentSpec(**base)


def brute_auroc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


# -- AUROC ------------------------------------------------------------------


def test_auroc_examples():
    assert auroc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auroc([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5
    assert auroc([0.1, 0.9], [1, 0]) == 0.0


def test_auroc_matches_bruteforce():
    rng = np.random.default_rng(0)
    s = rng.random(200)
    y = rng.integers(0, 2, 200)
    assert abs(auroc(s, y) - brute_auroc(s, y)) < 1e-12


def test_auroc_errors():
    with pytest.raises(ValueError, match="undefined"):
        auroc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        auroc([0.1, 0.2], [1, 2])
    with pytest.raises(ValueError):
        auroc([0.1], [1, 0])


def test_auroc_rank_invariance_and_flip():
    rng = np.random.default_rng(4)
    s = np.round(rng.random(60), 1)  # plenty of ties
    y = rng.integers(0, 2, 60)
    a = auroc(s, y)
    assert auroc(np.exp(3 * s) - 7, y) == pytest.approx(a, abs=1e-15)
    assert auroc(s, 1 - y) == pytest.approx(1 - a, abs=1e-15)


def test_auroc_result():
    r = AurocResult([0.8, 0.9, 1.0])
    assert r.mean == pytest.approx(0.9) and r.n_runs == 3
    assert r.std == pytest.approx(np.std([0.8, 0.9, 1.0]))
    assert AurocResult([0.8, 0.9, 1.0], ddof=1).std == pytest.approx(0.1)
    assert str(AurocResult([0.5])) == "0.5000±0.0000"
    with pytest.raises(ValueError):
        AurocResult([])
    with pytest.raises(ValueError):
        AurocResult([1.5])


# -- spec and data ----------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentSpec(kind="bogus")
    with pytest.raises(ConfigError):
        ExperimentSpec(methods=("none", "magic"))
    with pytest.raises(ConfigError):
        ExperimentSpec(train_csv="a.csv")
    with pytest.raises(ConfigError):
        ExperimentSpec(ratios=(0.0, 1.0))


def test_prepare_data_fixed_split():
    spec = tiny_spec()
    tr, te = prepare_data(spec)
    assert tr.counts() == {0: 10, 1: 4} and te.counts() == {0: 10, 1: 10}
    tr2, te2 = prepare_data(spec)
    assert tr == tr2 and te == te2


def test_prepare_data_csv(tmp_path):
    from tcgan.series import SynthesisParams, make_synthetic_dataset, save_csv

    save_csv(make_synthetic_dataset(6, SynthesisParams(length=12, seed=1)), tmp_path / "tr.csv")
    save_csv(make_synthetic_dataset(3, SynthesisParams(length=12, seed=2)), tmp_path / "te.csv")
    spec = tiny_spec(train_csv=str(tmp_path / "tr.csv"), test_csv=str(tmp_path / "te.csv"), minority_count=2,
                     majority_count=None)
    tr, te = prepare_data(spec)
    assert tr.counts() == {0: 6, 1: 2} and len(te) == 6


def test_degrade():
    tr, _ = prepare_data(tiny_spec())
    d = degrade(tr, 0.25, 3)
    assert d.lengths() == {9}
    assert degrade(tr, 0.0, 3) is tr


# -- protocols --------------------------------------------------------------


def test_method_none_is_plain_classifier():
    spec = tiny_spec(n_runs=1)
    tr, te = prepare_data(spec)
    res = compare_methods(tr, te, spec, methods=("none",))
    from tcgan.evaluation import _child_seeds

    seed = _child_seeds(spec.seed, 1)[0][3]
    clf = C.train_classifier(tr, replace(TINY_CLF, seed=seed), t_range=time_range(tr, te))
    assert res["none"].per_run[0] == auroc(C.logits(clf, te.series), te.labels)


def test_compare_methods_rows_and_determinism():
    spec = tiny_spec()
    tr, te = prepare_data(spec)
    tr, te = degrade(tr, 0.2, 1), degrade(te, 0.2, 2)
    a = compare_methods(tr, te, spec, interp_len=12)
    b = compare_methods(tr, te, spec, interp_len=12)
    assert list(a) == ["none", "slicing", "warping", "tcgan"]
    assert all(a[m].per_run == b[m].per_run for m in a)
    assert all(a[m].n_runs == 2 for m in a)


def test_jobs_do_not_change_results():
    spec = tiny_spec()
    tr, te = prepare_data(spec)
    a = compare_methods(tr, te, spec, methods=("none", "tcgan"), jobs=1)
    b = compare_methods(tr, te, spec, methods=("none", "tcgan"), jobs=2)
    assert all(a[m].per_run == b[m].per_run for m in a)


def test_tstr_protocol_runs():
    spec = tiny_spec()
    tr, te = prepare_data(replace(spec, minority_count=None, majority_count=None))
    r = tstr_protocol(tr, te, TINY_GAN, TINY_CLF, n_runs=2)
    assert r.n_runs == 2 and all(0 <= a <= 1 for a in r.per_run)
    assert tstr_protocol(tr, te, TINY_GAN, TINY_CLF, n_runs=2).per_run == r.per_run


def test_rebalancing_rows():
    spec = tiny_spec(n_runs=1)
    tr, te = prepare_data(spec)
    rows = rebalancing_experiment(tr, te, (0.5, 1.0), spec)
    assert [(name, round(r, 2)) for name, r, _ in rows] == [("original", 0.4), ("tcgan", 0.5), ("tcgan", 1.0)]
    with pytest.raises(ConfigError):
        rebalancing_experiment(tr, te, (0.2, 1.0), spec)


def test_run_experiment_kinds(tmp_path):
    out = run_experiment(tiny_spec(kind="missing", fractions=(0.1, 0.3), n_runs=1))
    assert [r.param for r in out.rows] == ["missing=0.1"] * 3 + ["missing=0.3"] * 3
    assert [r.method for r in out.rows[:3]] == ["none", "warping", "tcgan"]
    write_plot_csv(out.plot_header, out.plot_rows, tmp_path / "plot.csv")
    header, rows = read_plot_csv(tmp_path / "plot.csv")
    assert header == out.plot_header
    assert [r[0] for r in rows] == [0.1] * 3 + [0.3] * 3
    assert rows == [tuple(float(x) if isinstance(x, float) else x for x in r) for r in out.plot_rows]

    tstr = run_experiment(tiny_spec(kind="tstr", sizes=(6,), lengths=(12,), n_runs=1))
    assert [(r.method, r.param) for r in tstr.rows] == [("gan", "S6-L12"), ("real", "S6-L12")]


def test_result_csvs(tmp_path):
    out = run_experiment(tiny_spec(kind="compare", n_runs=2, methods=("none", "warping")))
    write_results(out.rows, tmp_path / "r.csv")
    write_summary(out.rows, tmp_path / "s.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "experiment,method,param,run,auroc" and len(lines) == 5
    s = (tmp_path / "s.csv").read_text().splitlines()
    assert s[0] == "experiment,method,param,mean,std,n_runs" and s[1].startswith("experiment,none,missing=0,")
    assert "AUROC" in summary_table(out.rows)
