"""Supervised and adversarial training loops, plus full-series inference.

Both loops are fully deterministic given (data, configs, seed): model init
is seeded through torch, batch order through a dedicated numpy generator,
and torch runs single-threaded. The GAN generator loss degenerates exactly
to the supervised loss at lambda_adv = 0, which is tested down to the
gradient level.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, SeriesTooShortError, ShapeError, TrainingDivergedError
from .model import (
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    ModelParams,
    build_discriminator,
    build_generator,
    state_to_numpy,
)
from .series import IntervalSeries, SrPair

log = logging.getLogger(__name__)

TRAIN_MODES = ("cnn", "gan")
DISC_COLLAPSE_THRESHOLD = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by the supervised and adversarial loops."""

    mode: str = "cnn"
    epochs: int = 30
    batch_size: int = 64
    lr_generator: float = 1e-3
    lr_discriminator: float = 1e-4
    lambda_adv: float = 1e-3
    window_hours: int = 24
    stride_hours: int = 12
    seed: int = 0
    patience: int = 8
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.mode not in TRAIN_MODES:
            raise ConfigError(f"mode must be one of {TRAIN_MODES}, got {self.mode!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ConfigError("epochs, batch_size and patience must be >= 1")
        if self.lr_generator <= 0 or self.lr_discriminator <= 0:
            raise ConfigError("learning rates must be positive")
        if self.lambda_adv < 0:
            raise ConfigError("lambda_adv must be >= 0")
        if self.window_hours < 1 or self.stride_hours < 1:
            raise ConfigError("window_hours and stride_hours must be >= 1")


@dataclass
class WindowedData:
    """Training and validation windows as dense arrays (kWh)."""

    train_low: np.ndarray
    train_high: np.ndarray
    val_low: np.ndarray
    val_high: np.ndarray
    factor: int

    def __post_init__(self):
        if self.train_low.ndim != 2 or self.train_high.ndim != 2:
            raise ShapeError("window arrays must be 2-D (n_windows, length)")
        if self.train_high.shape[1] != self.factor * self.train_low.shape[1]:
            raise ShapeError("high window length must be factor x low window length")
        if len(self.train_low) < 1:
            raise ShapeError("no training windows")
        if len(self.val_low) < 1:
            raise ShapeError("no validation windows")


def windows_to_arrays(windows: list[SrPair]):
    """Stack SrPair windows into (low, high) arrays."""
    if not windows:
        raise ShapeError("no windows to stack")
    low = np.stack([w.low.values for w in windows])
    high = np.stack([w.high.values for w in windows])
    return low, high


def make_windowed_data(train_windows: list[SrPair], val_windows: list[SrPair]) -> WindowedData:
    train_low, train_high = windows_to_arrays(train_windows)
    val_low, val_high = windows_to_arrays(val_windows)
    return WindowedData(train_low, train_high, val_low, val_high, train_windows[0].factor)


def content_loss(gen: Generator, low: torch.Tensor, high: torch.Tensor) -> torch.Tensor:
    """MSE between reconstructed and true high-resolution energy, in kWh^2."""
    _, fake = gen(low)
    return torch.mean((fake - high) ** 2)


def generator_gradients(gen: Generator, low: torch.Tensor, high: torch.Tensor,
                        disc=None, lambda_adv: float = 0.0) -> dict:
    """Per-parameter gradients of one generator step, without updating.

    With lambda_adv = 0 this is exactly the supervised (CNN) step; with
    lambda_adv > 0 the non-saturating adversarial term is added.
    """
    gen.zero_grad(set_to_none=True)
    loss = content_loss(gen, low, high)
    if lambda_adv > 0:
        if disc is None:
            raise ConfigError("adversarial loss needs a discriminator")
        _, fake = gen(low)
        logits = disc(fake)
        loss = loss + lambda_adv * nn.functional.binary_cross_entropy_with_logits(
            logits, torch.ones_like(logits)
        )
    loss.backward()
    return {name: p.grad.detach().numpy().copy() for name, p in gen.named_parameters()}


def _prepare(data: WindowedData, gen_config: GeneratorConfig, seed: int):
    torch.set_num_threads(1)
    if data.train_low.shape[1] != gen_config.window_samples:
        raise ShapeError(
            f"windows of {data.train_low.shape[1]} low samples do not match the "
            f"generator's window_samples={gen_config.window_samples}"
        )
    if data.factor != gen_config.factor:
        raise ShapeError(f"data factor {data.factor} != generator factor {gen_config.factor}")
    gen = build_generator(gen_config, seed)
    mean = float(data.train_low.mean())
    std = float(data.train_low.std())
    gen.set_normalization(mean, max(std, 1e-8))
    tensors = tuple(
        torch.from_numpy(np.ascontiguousarray(a))
        for a in (data.train_low, data.train_high, data.val_low, data.val_high)
    )
    return gen, tensors


def _eval_mse(gen: Generator, low: torch.Tensor, high: torch.Tensor) -> float:
    with torch.no_grad():
        return float(content_loss(gen, low, high))


def _check_finite(value: float, what: str, last_good=None):
    if not np.isfinite(value):
        raise TrainingDivergedError(f"{what} became non-finite ({value})", last_good=last_good)


class _EarlyStopper:
    """Tracks the best validation loss and the state snapshot behind it."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_states = None
        self.stale = 0

    def update(self, val: float, snapshot) -> bool:
        """Record an epoch; returns True when training should stop."""
        if val < self.best:
            self.best = val
            self.best_states = snapshot
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def train_cnn(data: WindowedData, gen_config: GeneratorConfig, train_config: TrainConfig,
              data_digest: str = ""):
    """Minimize reconstruction MSE; returns (best ModelParams, epoch log)."""
    gen, (train_low, train_high, val_low, val_high) = _prepare(data, gen_config, train_config.seed)
    opt = torch.optim.Adam(gen.parameters(), lr=train_config.lr_generator)
    order_rng = np.random.default_rng(train_config.seed)
    n = len(data.train_low)

    stopper = _EarlyStopper(train_config.patience)
    records = [{
        "epoch": 0,
        "train_mse": _eval_mse(gen, train_low, train_high),
        "val_mse": _eval_mse(gen, val_low, val_high),
        "wall_time": 0.0,
    }]
    stopper.update(records[0]["val_mse"], state_to_numpy(gen))

    for epoch in range(1, train_config.epochs + 1):
        t0 = time.perf_counter()
        perm = order_rng.permutation(n)
        running = 0.0
        for lo in range(0, n, train_config.batch_size):
            idx = perm[lo:lo + train_config.batch_size]
            opt.zero_grad(set_to_none=True)
            loss = content_loss(gen, train_low[idx], train_high[idx])
            _check_finite(float(loss), "training loss")
            loss.backward()
            opt.step()
            running += float(loss) * len(idx)
        val_mse = _eval_mse(gen, val_low, val_high)
        _check_finite(val_mse, "validation loss")
        records.append({
            "epoch": epoch,
            "train_mse": running / n,
            "val_mse": val_mse,
            "wall_time": time.perf_counter() - t0,
        })
        if stopper.update(val_mse, state_to_numpy(gen)):
            log.info("early stop at epoch %d (best val %.6g)", epoch, stopper.best)
            break

    params = ModelParams(
        generator_config=gen_config,
        generator_state=stopper.best_states,
        mode="cnn",
        seed=train_config.seed,
        data_digest=data_digest,
    )
    return params, records


def train_gan(data: WindowedData, gen_config: GeneratorConfig,
              disc_config: DiscriminatorConfig, train_config: TrainConfig,
              data_digest: str = ""):
    """Alternating adversarial training; returns (best ModelParams, epoch log).

    Discriminator: binary cross-entropy, real vs generated. Generator:
    content MSE plus lambda_adv times the non-saturating adversarial loss.
    Early stopping and the returned checkpoint follow validation content
    MSE, so the generator that ships is the best reconstructor seen.
    """
    gen, (train_low, train_high, val_low, val_high) = _prepare(data, gen_config, train_config.seed)
    disc = build_discriminator(disc_config, train_config.seed + 1)
    opt_g = torch.optim.Adam(gen.parameters(), lr=train_config.lr_generator)
    opt_d = torch.optim.Adam(disc.parameters(), lr=train_config.lr_discriminator)
    bce = nn.functional.binary_cross_entropy_with_logits
    order_rng = np.random.default_rng(train_config.seed)
    n = len(data.train_low)

    def snapshot():
        return {"gen": state_to_numpy(gen), "disc": state_to_numpy(disc)}

    def to_params(states) -> ModelParams:
        return ModelParams(
            generator_config=gen_config,
            generator_state=states["gen"],
            discriminator_config=disc_config,
            discriminator_state=states["disc"],
            mode="gan",
            seed=train_config.seed,
            data_digest=data_digest,
        )

    stopper = _EarlyStopper(train_config.patience)
    records = [{
        "epoch": 0,
        "train_mse": _eval_mse(gen, train_low, train_high),
        "adv_loss": 0.0,
        "disc_loss": 0.0,
        "val_mse": _eval_mse(gen, val_low, val_high),
        "wall_time": 0.0,
    }]
    stopper.update(records[0]["val_mse"], snapshot())
    last_good = snapshot()

    for epoch in range(1, train_config.epochs + 1):
        t0 = time.perf_counter()
        perm = order_rng.permutation(n)
        content_sum = 0.0
        adv_sum = 0.0
        disc_sum = 0.0
        disc_max = 0.0
        n_batches = 0
        for lo in range(0, n, train_config.batch_size):
            idx = perm[lo:lo + train_config.batch_size]
            low_b, high_b = train_low[idx], train_high[idx]

            with torch.no_grad():
                _, fake_detached = gen(low_b)
            opt_d.zero_grad(set_to_none=True)
            real_logits = disc(high_b)
            fake_logits = disc(fake_detached)
            d_loss = bce(real_logits, torch.ones_like(real_logits)) + \
                bce(fake_logits, torch.zeros_like(fake_logits))
            _check_finite(float(d_loss), "discriminator loss", to_params(last_good))
            d_loss.backward()
            opt_d.step()

            opt_g.zero_grad(set_to_none=True)
            content = content_loss(gen, low_b, high_b)
            if train_config.lambda_adv > 0:
                _, fake = gen(low_b)
                logits = disc(fake)
                adv = bce(logits, torch.ones_like(logits))
                g_loss = content + train_config.lambda_adv * adv
            else:
                adv = torch.tensor(0.0)
                g_loss = content
            _check_finite(float(g_loss), "generator loss", to_params(last_good))
            g_loss.backward()
            opt_g.step()

            content_sum += float(content) * len(idx)
            adv_sum += float(adv) * len(idx)
            d = float(d_loss)
            disc_sum += d * len(idx)
            disc_max = max(disc_max, d)
            n_batches += 1

        val_mse = _eval_mse(gen, val_low, val_high)
        _check_finite(val_mse, "validation loss", to_params(last_good))
        record = {
            "epoch": epoch,
            "train_mse": content_sum / n,
            "adv_loss": adv_sum / n,
            "disc_loss": disc_sum / n,
            "val_mse": val_mse,
            "wall_time": time.perf_counter() - t0,
        }
        if disc_max < DISC_COLLAPSE_THRESHOLD:
            record["warnings"] = ["discriminator_collapse"]
            log.warning("discriminator loss below %.0e for all of epoch %d",
                        DISC_COLLAPSE_THRESHOLD, epoch)
        records.append(record)
        last_good = snapshot()
        if stopper.update(val_mse, last_good):
            log.info("early stop at epoch %d (best val %.6g)", epoch, stopper.best)
            break

    return to_params(stopper.best_states), records


def save_training_log(records, path) -> None:
    """Append-only JSON-lines: one record per epoch."""
    with Path(path).open("w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")


def reconstruct_series(params, low: IntervalSeries) -> IntervalSeries:
    """Run the generator across a full low-resolution series.

    The model window slides with stride equal to the window length;
    allocations are per low interval, so non-overlapping windows
    concatenate seamlessly. A trailing remainder is served by one extra
    window aligned to the series end, contributing only the intervals the
    full windows did not cover.
    """
    gen = params.make_generator() if isinstance(params, ModelParams) else params
    gen.eval()
    t = gen.config.window_samples
    s = gen.config.factor
    n = len(low)
    if n < t:
        raise SeriesTooShortError(
            f"series of {n} intervals is shorter than the model window ({t}); "
            "use baseline_upsample instead"
        )
    if low.interval_seconds % s != 0:
        raise ShapeError(f"interval {low.interval_seconds}s does not divide into {s}")

    offsets = list(range(0, n - t + 1, t))
    covered = offsets[-1] + t
    starts = list(offsets)
    if covered < n:
        starts.append(n - t)
    batch = np.stack([low.values[o:o + t] for o in starts])
    with torch.no_grad():
        _, high = gen(torch.from_numpy(batch))
    high = high.numpy()

    out = np.empty(n * s, dtype=np.float64)
    for row, o in enumerate(offsets):
        out[o * s:(o + t) * s] = high[row]
    if covered < n:
        tail_start = n - t
        out[covered * s:] = high[-1][(covered - tail_start) * s:]
    return low.with_values(out, interval_seconds=low.interval_seconds // s)
