"""Timestamp-conditioned GAN: generator, discriminator, adversarial training, sampling.

The generator concatenates the noise vector with the normalized timestamp
vector, projects it densely to ``[gen_channels[0], L]`` and refines it with four
length-preserving transposed convolutions. The discriminator sees the series and
its timestamps as two input channels.

Both networks read timestamps through a fixed per-position standardization
(training-set mean and std of each sorted slot). Sorted uniform draws only
wander about +-1/sqrt(L) around their slot, so raw [0, 1] inputs bury the
conditioning signal under the noise vector and the generator collapses to one
curve.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .series import IrregularSeries, LabeledDataset, SeriesError, stack, time_range

INIT_STD = 0.02
T_STD_FLOOR = 1e-2  # keeps regular grids (zero spread) from blowing up
LOSS_VARIANTS = ("minimax", "non_saturating")


class ConfigError(ValueError):
    pass


@dataclass
class TcganConfig:
    latent_dim: int = 50
    series_len: int = 40
    gen_channels: tuple[int, ...] = (64, 64, 32, 1)
    disc_channels: tuple[int, ...] = (32, 64)
    kernel_size: int = 5
    batch_size: int = 32
    epochs: int = 300
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    loss_variant: str = "non_saturating"

    def __post_init__(self):
        self.gen_channels = tuple(int(c) for c in self.gen_channels)
        self.disc_channels = tuple(int(c) for c in self.disc_channels)
        if len(self.gen_channels) != 4 or len(self.disc_channels) != 2:
            raise ConfigError("gen_channels needs 4 entries and disc_channels 2")
        if self.gen_channels[-1] != 1:
            raise ConfigError("the last generator layer must have a single channel")
        if min(self.gen_channels + self.disc_channels) < 1:
            raise ConfigError("channel counts must be positive")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd and positive, got {self.kernel_size}")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 for batch normalization")
        if self.latent_dim < 1 or self.series_len < 1 or self.epochs < 0:
            raise ConfigError("latent_dim and series_len must be positive, epochs non-negative")
        if self.series_len // 4 < 1:
            raise ConfigError(f"series_len {self.series_len} too short for two pooling stages")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ConfigError(f"loss_variant must be one of {LOSS_VARIANTS}")

    def adam(self) -> dict:
        return dict(lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)


# ---------------------------------------------------------------------------
# shared convolutional scorer (discriminator and classifier)


def _normal(rng, shape, name):
    return T.Tensor(rng.normal(0.0, INIT_STD, shape), requires_grad=True, name=name)


def _zeros(shape, name):
    return T.Tensor(np.zeros(shape), requires_grad=True, name=name)


def init_scorer(channels, kernel_size: int, series_len: int, rng, prefix: str) -> dict[str, T.Tensor]:
    """Parameters of the conv+pool x2, dense head network over ``[N, 2, L]`` input."""
    c1, c2 = channels
    k = kernel_size
    flat = c2 * ((series_len // 2) // 2)
    if flat < 1:
        raise SeriesError(f"series length {series_len} too short for two pooling stages")
    return {
        f"{prefix}.conv1.w": _normal(rng, (c1, 2, k), f"{prefix}.conv1.w"),
        f"{prefix}.conv1.b": _zeros((c1,), f"{prefix}.conv1.b"),
        f"{prefix}.conv2.w": _normal(rng, (c2, c1, k), f"{prefix}.conv2.w"),
        f"{prefix}.conv2.b": _zeros((c2,), f"{prefix}.conv2.b"),
        f"{prefix}.dense.w": _normal(rng, (flat, 1), f"{prefix}.dense.w"),
        f"{prefix}.dense.b": _zeros((1,), f"{prefix}.dense.b"),
    }


def timestamp_stats(t_norm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-position mean and floored std of normalized timestamp rows ``[N, L]``."""
    t_norm = np.asarray(t_norm, dtype=np.float64)
    return t_norm.mean(axis=0), np.maximum(t_norm.std(axis=0), T_STD_FLOOR)


def identity_stats(length: int) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(length), np.ones(length)


def scorer_logits(x, t, params: dict[str, T.Tensor], prefix: str, t_stats=None) -> T.Tensor:
    """Logits ``[N, 1]``; ``t_stats`` (mean, std) standardizes the timestamp channel."""
    x, t = T.as_tensor(x), T.as_tensor(t)
    if x.data.ndim != 2 or x.shape != t.shape:
        raise T.ShapeError(f"series {x.shape} and timestamps {t.shape} must both be [N, L]")
    n, length = x.shape
    if length // 4 < 1:
        raise T.GeometryError(f"series length {length} too short for two pooling stages")
    if t_stats is not None:
        if t_stats[0].shape != (length,):
            raise T.ShapeError(f"timestamp statistics cover length {t_stats[0].shape[0]}, input has {length}")
        t = T.Tensor((t.data - t_stats[0]) / t_stats[1])
    w1 = params[f"{prefix}.conv1.w"]
    pad = (w1.shape[2] - 1) // 2
    h = T.concat([T.reshape(x, (n, 1, length)), T.reshape(t, (n, 1, length))], axis=1)
    h = T.conv1d(h, w1, 1, pad, params[f"{prefix}.conv1.b"])
    h = T.maxpool1d(T.relu(h), 2)
    h = T.conv1d(h, params[f"{prefix}.conv2.w"], 1, pad, params[f"{prefix}.conv2.b"])
    h = T.maxpool1d(T.relu(h), 2)
    h = T.reshape(h, (n, h.shape[1] * h.shape[2]))
    return T.dense(h, params[f"{prefix}.dense.w"], params[f"{prefix}.dense.b"])


# ---------------------------------------------------------------------------
# model


@dataclass
class TcganModel:
    config: TcganConfig
    gen: dict[str, T.Tensor]
    gen_bn: list[T.RunningStats]
    disc: dict[str, T.Tensor]
    t_range: tuple[float, float] = (0.0, 1.0)
    t_stats: tuple[np.ndarray, np.ndarray] | None = None
    loss_trace: list[tuple[int, float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.t_stats is None:
            self.t_stats = identity_stats(self.config.series_len)

    def gen_params(self) -> list[T.Tensor]:
        return list(self.gen.values())

    def disc_params(self) -> list[T.Tensor]:
        return list(self.disc.values())

    def arrays(self) -> dict[str, np.ndarray]:
        out = {k: p.data for k, p in self.gen.items()}
        for i, s in enumerate(self.gen_bn, start=1):
            out[f"gen.bn{i}.running_mean"] = s.mean
            out[f"gen.bn{i}.running_var"] = s.var
        out.update({k: p.data for k, p in self.disc.items()})
        out["cond.t_mean"], out["cond.t_std"] = self.t_stats
        return out


def init_model(config: TcganConfig, rng: np.random.Generator | None = None) -> TcganModel:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    length, k = config.series_len, config.kernel_size
    c = config.gen_channels
    gen = {
        "gen.dense.w": _normal(rng, (config.latent_dim + length, c[0] * length), "gen.dense.w"),
        "gen.dense.b": _zeros((c[0] * length,), "gen.dense.b"),
    }
    cin = c[0]
    for i, cout in enumerate(c, start=1):
        gen[f"gen.deconv{i}.w"] = _normal(rng, (cin, cout, k), f"gen.deconv{i}.w")
        if i < 4:
            gen[f"gen.bn{i}.gamma"] = T.Tensor(np.ones(cout), requires_grad=True, name=f"gen.bn{i}.gamma")
            gen[f"gen.bn{i}.beta"] = _zeros((cout,), f"gen.bn{i}.beta")
        cin = cout
    gen["gen.deconv4.b"] = _zeros((1,), "gen.deconv4.b")
    bn = [T.RunningStats.fresh(ch) for ch in c[:3]]
    disc = init_scorer(config.disc_channels, k, length, rng, "disc")
    return TcganModel(config, gen, bn, disc)


def _check_timestamps(t: np.ndarray, length: int):
    if t.ndim != 2 or t.shape[1] != length:
        raise SeriesError(f"timestamp rows must have length {length}, got shape {t.shape}")
    if np.any(np.diff(t, axis=1) < 0):
        raise SeriesError("timestamp rows must be sorted ascending")
    if t.size and (t.min() < 0.0 or t.max() > 1.0):
        raise SeriesError("normalized timestamps must lie in [0, 1]")


def generator_forward(z, t, model: TcganModel, training: bool = False) -> T.Tensor:
    """Map noise ``[N, latent]`` and normalized timestamps ``[N, L]`` to values ``[N, L]``."""
    z, t = T.as_tensor(z), T.as_tensor(t)
    cfg = model.config
    length = cfg.series_len
    _check_timestamps(t.data, length)
    n = t.shape[0]
    if z.shape != (n, cfg.latent_dim):
        raise T.ShapeError(f"noise must have shape ({n}, {cfg.latent_dim}), got {z.shape}")
    g = model.gen
    pad = (cfg.kernel_size - 1) // 2
    ts = T.Tensor((t.data - model.t_stats[0]) / model.t_stats[1])
    h = T.dense(T.concat([z, ts], axis=1), g["gen.dense.w"], g["gen.dense.b"])
    h = T.relu(T.reshape(h, (n, cfg.gen_channels[0], length)))
    for i in range(1, 4):
        h = T.conv1d_transpose(h, g[f"gen.deconv{i}.w"], 1, pad)
        h = T.batchnorm1d(h, g[f"gen.bn{i}.gamma"], g[f"gen.bn{i}.beta"], model.gen_bn[i - 1], training)
        h = T.relu(h)
    h = T.conv1d_transpose(h, g["gen.deconv4.w"], 1, pad, g["gen.deconv4.b"])
    return T.reshape(h, (n, length))


def discriminator_forward(x, t, model: TcganModel) -> T.Tensor:
    return T.sigmoid(scorer_logits(x, t, model.disc, "disc", model.t_stats))


# ---------------------------------------------------------------------------
# training


def generator_loss(d_fake: T.Tensor, variant: str) -> T.Tensor:
    if variant == "non_saturating":
        return T.bce_loss(d_fake, np.ones(d_fake.shape))
    # mean log(1 - D) == -bce(D, 0)
    return T.scale(T.bce_loss(d_fake, np.zeros(d_fake.shape)), -1.0)


def discriminator_step(model: TcganModel, x_real, t_real, z, opt: T.AdamState) -> float:
    """One update of the discriminator only; the generator runs without a tape."""
    n = len(x_real)
    with T.no_grad():
        fake = generator_forward(z, t_real, model, training=True).data
    d_real = discriminator_forward(x_real, t_real, model)
    d_fake = discriminator_forward(fake, t_real, model)
    loss = T.add(T.bce_loss(d_real, np.ones((n, 1))), T.bce_loss(d_fake, np.zeros((n, 1))))
    T.backward(loss)
    params = model.disc_params()
    T.adam_step(params, [p.grad for p in params], opt)
    return loss.item()


def generator_step(model: TcganModel, t_real, z, opt: T.AdamState) -> float:
    fake = generator_forward(z, t_real, model, training=True)
    loss = generator_loss(discriminator_forward(fake, t_real, model), model.config.loss_variant)
    T.backward(loss)
    params = model.gen_params()
    T.adam_step(params, [p.grad for p in params], opt)
    return loss.item()


def _training_arrays(train, config: TcganConfig, t_range):
    series = train.series if isinstance(train, LabeledDataset) else list(train)
    if not series:
        raise SeriesError("empty training set")
    lengths = {len(s) for s in series}
    if len(lengths) != 1:
        raise SeriesError(f"training series have mixed lengths {sorted(lengths)}")
    if lengths != {config.series_len}:
        raise SeriesError(f"series length {lengths.pop()} != config.series_len {config.series_len}")
    if len(series) < config.batch_size:
        raise ConfigError(f"batch_size {config.batch_size} exceeds training set size {len(series)}")
    if t_range is None:
        t_range = time_range(LabeledDataset([(s, 0) for s in series]))
    lo, hi = t_range
    ts, xs = stack(series)
    ts = (ts - lo) / (hi - lo)
    _check_timestamps(ts, config.series_len)
    return ts, xs, (float(lo), float(hi))


def train_tcgan(train, config: TcganConfig, t_range: tuple[float, float] | None = None, log=None) -> TcganModel:
    """Adversarially train on single-class series sharing one length.

    ``train`` is a LabeledDataset (labels ignored) or a list of series. Raw
    timestamps are mapped to [0, 1] with ``t_range`` (default: the data's own
    span), which is stored on the model for sampling.
    """
    ts, xs, t_range = _training_arrays(train, config, t_range)
    rng = np.random.default_rng(config.seed)
    model = init_model(config, rng)
    model.t_range = t_range
    model.t_stats = timestamp_stats(ts)
    d_opt = T.AdamState.for_params(model.disc_params(), **config.adam())
    g_opt = T.AdamState.for_params(model.gen_params(), **config.adam())
    n, bs = len(xs), config.batch_size
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        d_losses, g_losses = [], []
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            if len(idx) < 2:
                continue
            t_b, x_b = ts[idx], xs[idx]
            d_losses.append(discriminator_step(model, x_b, t_b, rng.standard_normal((len(idx), config.latent_dim)), d_opt))
            g_losses.append(generator_step(model, t_b, rng.standard_normal((len(idx), config.latent_dim)), g_opt))
        model.loss_trace.append((epoch, float(np.mean(d_losses)), float(np.mean(g_losses))))
        if log is not None:
            log(epoch, model.loss_trace[-1][1], model.loss_trace[-1][2])
    return model


def sample(model: TcganModel, timestamp_vectors, rng: np.random.Generator) -> list[IrregularSeries]:
    """Generate one series per raw timestamp vector (inference-mode batch norm)."""
    vectors = [np.asarray(v, dtype=np.float64) for v in timestamp_vectors]
    length = model.config.series_len
    for i, v in enumerate(vectors):
        if v.shape != (length,):
            raise SeriesError(f"timestamp vector {i} has length {v.shape[0] if v.ndim else 0}, expected {length}")
    if not vectors:
        return []
    raw = np.stack(vectors)
    lo, hi = model.t_range
    norm = (raw - lo) / (hi - lo)
    z = rng.standard_normal((len(raw), model.config.latent_dim))
    with T.no_grad():
        values = generator_forward(z, norm, model, training=False).data
    return [IrregularSeries(t, v) for t, v in zip(raw, values)]


# ---------------------------------------------------------------------------
# persistence


def save_model(model: TcganModel, path) -> None:
    meta = {"kind": "tcgan", "config": asdict(model.config), "t_range": list(model.t_range)}
    save_checkpoint(path, model.arrays(), meta)


def load_model(path) -> TcganModel:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "tcgan":
        raise CheckpointError(f"{path}: not a T-CGAN checkpoint")
    model = init_model(TcganConfig(**meta["config"]), np.random.default_rng(0))
    model.t_range = tuple(meta["t_range"])
    model.t_stats = (arrays["cond.t_mean"], arrays["cond.t_std"])
    for name, p in {**model.gen, **model.disc}.items():
        if arrays[name].shape != p.shape:
            raise CheckpointError(f"{path}: {name} has shape {arrays[name].shape}, expected {p.shape}")
        p.data = arrays[name]
    for i, s in enumerate(model.gen_bn, start=1):
        s.mean = arrays[f"gen.bn{i}.running_mean"]
        s.var = arrays[f"gen.bn{i}.running_var"]
    return model


def write_loss_trace(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "d_loss", "g_loss"])
        for epoch, d, g in trace:
            w.writerow([epoch, f"{d:.17g}", f"{g:.17g}"])
