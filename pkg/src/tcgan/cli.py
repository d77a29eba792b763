"""Command-line entry point: ``tcgan {synth,train,augment,classify,experiment}``.

Settings come from dataclass defaults, then an optional INI config file
(``--config``, sections ``[tcgan]``, ``[classifier]``, ``[experiment]``), then
command-line flags. Exit codes: 0 success, 1 configuration error, 2 data or
I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import classifier as C
from . import evaluation as E
from .checkpoint import CheckpointError
from .gan import ConfigError, TcganConfig, load_model, sample, save_model, train_tcgan, write_loss_trace
from .series import (
    LabeledDataset,
    SeriesError,
    SynthesisParams,
    load_csv,
    make_synthetic_dataset,
    round_half_up,
    save_csv,
    time_range,
)

log = logging.getLogger("tcgan")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# config plumbing


def _coerce(value: str, default):
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        kind = type(default[0]) if default else str
        return tuple(kind(v.strip()) for v in value.split(",") if v.strip())
    if value.strip().lower() in ("none", ""):
        return None
    if default is None:
        try:
            return int(value)
        except ValueError:
            return value
    return value


def _overrides(cls, section: dict[str, str]) -> dict:
    fields = {f.name: f for f in dataclasses.fields(cls)}
    defaults = cls()
    out = {}
    for key, raw in section.items():
        if key not in fields:
            raise ConfigError(f"unknown {cls.__name__} setting {key!r}")
        if raw.strip().lower() in ("", "none") and "None" in str(fields[key].type):
            out[key] = None
            continue
        try:
            out[key] = _coerce(raw, getattr(defaults, key))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    return out


def read_config(path) -> dict[str, dict[str, str]]:
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return {s: dict(parser[s]) for s in parser.sections()}


def build(cls, section: dict[str, str], flags: dict):
    values = _overrides(cls, section)
    values.update({k: v for k, v in flags.items() if v is not None})
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from None


def _default(cls, name):
    return getattr(cls(), name)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    params = SynthesisParams(length=args.length, seed=args.seed)
    dataset = make_synthetic_dataset(args.per_class, params)
    save_csv(dataset, args.out)
    log.info("wrote %d series to %s", len(dataset), args.out)
    return EXIT_OK


def _gan_flags(args) -> dict:
    return {
        "epochs": args.epochs,
        "latent_dim": args.latent_dim,
        "batch_size": args.batch_size,
        "seed": args.seed,
        "loss_variant": args.loss_variant,
    }


def cmd_train(args) -> int:
    cfg_file = read_config(args.config)
    base = build(TcganConfig, cfg_file.get("tcgan", {}), _gan_flags(args))
    out = Path(args.out)
    if out.exists() and not args.force:
        raise ConfigError(f"{out} exists; resuming is not supported, pass --force to overwrite")
    dataset = load_csv(args.dataset)
    lengths = dataset.lengths()
    if len(lengths) != 1:
        raise SeriesError(f"{args.dataset}: series lengths differ {sorted(lengths)}")
    length = lengths.pop()
    t_range = time_range(dataset)
    out.mkdir(parents=True, exist_ok=True)
    for label in (0, 1):
        members = dataset.of_class(label)
        if not members:
            continue
        cfg = dataclasses.replace(base, series_len=length, batch_size=min(base.batch_size, len(members)))

        def progress(epoch, d, g, label=label):
            log.info("class %d epoch %d d_loss %.6f g_loss %.6f", label, epoch, d, g)

        model = train_tcgan(members, cfg, t_range=t_range, log=progress)
        save_model(model, out / f"class{label}.ckpt")
        write_loss_trace(model.loss_trace, out / f"class{label}_loss.csv")
    return EXIT_OK


def cmd_augment(args) -> int:
    dataset = load_csv(args.dataset)
    counts = dataset.counts()
    minority = min((0, 1), key=lambda y: (counts[y], y))
    majority = 1 - minority
    target = round_half_up(args.ratio * counts[majority])
    items = list(dataset.items)
    if target <= counts[minority]:
        log.warning("ratio %.3g does not exceed current %d/%d; writing the data unchanged",
                    args.ratio, counts[minority], counts[majority])
    else:
        model = load_model(Path(args.ckpt) / f"class{minority}.ckpt")
        members = dataset.of_class(minority)
        rng = np.random.default_rng(args.seed)
        picks = rng.integers(0, len(members), target - counts[minority])
        new = sample(model, [members[i].timestamps for i in picks], rng)
        items += [(s, minority) for s in new]
    save_csv(LabeledDataset(items, name=dataset.name), args.out)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg_file = read_config(args.config)
    cfg = build(C.ClassifierConfig, cfg_file.get("classifier", {}),
                {"epochs": args.epochs, "batch_size": args.batch_size, "seed": args.seed})
    train, test = load_csv(args.train), load_csv(args.test)
    clf = C.train_classifier(train, cfg, t_range=time_range(train, test))
    probs = C.score(clf, test.series)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,label,score\n")
        for i, (y, p) in enumerate(zip(test.labels, probs)):
            fh.write(f"{i},{y},{p:.17g}\n")
    if args.ckpt_out:
        C.save_classifier(clf, args.ckpt_out)
    if len(set(test.labels.tolist())) == 2:
        print(f"AUROC {E.auroc(C.logits(clf, test.series), test.labels):.4f}")
    return EXIT_OK


def load_spec(path, seed=None, runs=None) -> E.ExperimentSpec:
    sections = read_config(path)
    unknown = set(sections) - {"experiment", "tcgan", "classifier"}
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    exp = {k: v for k, v in sections.get("experiment", {}).items()}
    base = Path(path).parent
    for key in ("train_csv", "test_csv"):
        if exp.get(key):
            exp[key] = str(base / exp[key])
    values = _overrides(E.ExperimentSpec, exp)
    if seed is not None:
        values["seed"] = seed
    if runs is not None:
        values["n_runs"] = runs
    values["tcgan"] = build(TcganConfig, sections.get("tcgan", {}), {})
    values["classifier"] = build(C.ClassifierConfig, sections.get("classifier", {}), {})
    try:
        return E.ExperimentSpec(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def cmd_experiment(args) -> int:
    spec = load_spec(args.spec, args.seed, args.runs)
    out = Path(args.out_dir)
    if not out.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out}")
    result = E.run_experiment(spec, jobs=args.jobs, log=log.info)
    E.write_results(result.rows, out / "results.csv")
    E.write_summary(result.rows, out / "summary.csv")
    E.write_plot_csv(result.plot_header, result.plot_rows, out / "plot.csv")
    print(E.summary_table(result.rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def make_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="tcgan", description="Timestamp-conditioned GAN augmentation for irregular time series.",
                formatter_class=fmt)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic sine/sawtooth dataset", formatter_class=fmt)
    s.add_argument("-S", "--per-class", type=int, default=40, help="series per class")
    s.add_argument("-L", "--length", type=int, default=40, help="points per series")
    s.add_argument("--out", required=True, help="output CSV path")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train one T-CGAN per class", formatter_class=fmt)
    t.add_argument("dataset", help="training CSV")
    t.add_argument("--out", required=True, help="checkpoint directory to create")
    t.add_argument("--config", help="INI file with a [tcgan] section")
    t.add_argument("--epochs", type=int, help=f"(default: {_default(TcganConfig, 'epochs')})")
    t.add_argument("--latent-dim", type=int, help=f"(default: {_default(TcganConfig, 'latent_dim')})")
    t.add_argument("--batch-size", type=int, help=f"(default: {_default(TcganConfig, 'batch_size')})")
    t.add_argument("--loss-variant", choices=("minimax", "non_saturating"),
                   help=f"(default: {_default(TcganConfig, 'loss_variant')})")
    t.add_argument("--seed", type=int, help=f"(default: {_default(TcganConfig, 'seed')})")
    t.add_argument("--force", action="store_true", help="overwrite an existing checkpoint directory")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("augment", help="fill the minority class with generated series", formatter_class=fmt)
    a.add_argument("dataset", help="input CSV")
    a.add_argument("--ckpt", required=True, help="checkpoint directory written by 'train'")
    a.add_argument("--ratio", type=float, default=1.0, help="target minority/majority ratio")
    a.add_argument("--out", required=True, help="output CSV path")
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_augment)

    c = sub.add_parser("classify", help="train the CNN classifier and score a test set", formatter_class=fmt)
    c.add_argument("--train", required=True, help="training CSV")
    c.add_argument("--test", required=True, help="test CSV")
    c.add_argument("--out", required=True, help="scores CSV (index,label,score)")
    c.add_argument("--ckpt-out", help="optional classifier checkpoint path")
    c.add_argument("--config", help="INI file with a [classifier] section")
    c.add_argument("--epochs", type=int, help=f"(default: {_default(C.ClassifierConfig, 'epochs')})")
    c.add_argument("--batch-size", type=int, help=f"(default: {_default(C.ClassifierConfig, 'batch_size')})")
    c.add_argument("--seed", type=int, help=f"(default: {_default(C.ClassifierConfig, 'seed')})")
    c.set_defaults(func=cmd_classify)

    e = sub.add_parser("experiment", help="run an experiment spec (tstr, compare, rebalance, missing)",
                       formatter_class=fmt)
    e.add_argument("spec", help="INI experiment spec")
    e.add_argument("--out-dir", default=".", help="directory for results.csv, summary.csv, plot.csv")
    e.add_argument("--seed", type=int, help="override [experiment] seed")
    e.add_argument("--runs", type=int, help="override [experiment] n_runs")
    e.add_argument("--jobs", type=int, default=1, help="parallel repetitions")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SeriesError, CheckpointError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
