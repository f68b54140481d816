"""Conservation-constrained 1D convolutional generator and discriminator.

The generator never emits raw energy values: it predicts, per low-resolution
interval, a vector of S allocation factors that is projected onto the
hyperplane sum(alpha) = 1 before scaling the (un-normalized) low values.
Conservation is therefore architectural: it holds for every parameter
setting, trained or not. Negative factors stay legal, which a softmax head
would forbid and solar-exporting households require.

Everything runs in float64 so constraint residuals and gradient checks sit
far below their tolerances on CPU.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import DataError, NumericError, ShapeError

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class GeneratorConfig:
    """Architecture of the allocation-factor generator."""

    factor: int = 4
    hidden_channels: int = 64
    n_residual_blocks: int = 4
    kernel_size: int = 9
    block_kernel_size: int = 3
    window_samples: int = 24

    def __post_init__(self):
        if self.factor < 2:
            raise ShapeError(f"factor must be >= 2, got {self.factor}")
        if self.kernel_size % 2 == 0 or self.block_kernel_size % 2 == 0:
            raise ShapeError("kernel sizes must be odd for same-length padding")
        if self.hidden_channels < 1 or self.n_residual_blocks < 0 or self.window_samples < 1:
            raise ShapeError("invalid generator dimensions")


@dataclass(frozen=True)
class DiscriminatorConfig:
    """Architecture of the realism discriminator."""

    channels: tuple = (32, 64, 128)
    kernel_size: int = 3

    def __post_init__(self):
        if not self.channels:
            raise ShapeError("discriminator needs at least one conv layer")
        if self.kernel_size % 2 == 0:
            raise ShapeError("kernel size must be odd")


def project_allocations(raw) -> np.ndarray:
    """Project each row of a (K, S) matrix onto the hyperplane sum = 1.

    alpha = z - mean(z) + 1/S, the exact orthogonal (least-squares)
    projection; idempotent and linear, so differentiable everywhere.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise NumericError("allocation projection requires finite input")
    s = raw.shape[1]
    return raw - raw.mean(axis=1, keepdims=True) + 1.0 / s


def _project_rows(raw: torch.Tensor) -> torch.Tensor:
    # torch mirror of project_allocations, applied over the last axis
    return raw - raw.mean(dim=-1, keepdim=True) + 1.0 / raw.shape[-1]


class _ResidualBlock(nn.Module):
    def __init__(self, channels: int, kernel_size: int):
        super().__init__()
        pad = kernel_size // 2
        self.conv1 = nn.Conv1d(channels, channels, kernel_size, padding=pad)
        self.conv2 = nn.Conv1d(channels, channels, kernel_size, padding=pad)
        self.act = nn.ELU()

    def forward(self, x):
        return x + self.conv2(self.act(self.conv1(x)))


class Generator(nn.Module):
    """Maps a length-T low-resolution window to allocation factors and energy.

    forward() takes raw kWh values of shape (batch, T); normalization by the
    stored training statistics happens inside, and the reconstruction always
    scales the un-normalized input, so the output conserves energy exactly
    regardless of the statistics.
    """

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        pad = config.kernel_size // 2
        h = config.hidden_channels
        self.head = nn.Conv1d(1, h, config.kernel_size, padding=pad)
        self.blocks = nn.ModuleList(
            _ResidualBlock(h, config.block_kernel_size) for _ in range(config.n_residual_blocks)
        )
        self.mid = nn.Conv1d(h, h, config.block_kernel_size, padding=config.block_kernel_size // 2)
        self.tail = nn.Conv1d(h, config.factor, config.kernel_size, padding=pad)
        self.act = nn.ELU()
        self.register_buffer("norm_mean", torch.tensor(0.0, dtype=torch.float64))
        self.register_buffer("norm_std", torch.tensor(1.0, dtype=torch.float64))
        self.double()

    def set_normalization(self, mean: float, std: float) -> None:
        if std <= 0 or not np.isfinite([mean, std]).all():
            raise NumericError(f"invalid normalization statistics mean={mean} std={std}")
        self.norm_mean.fill_(float(mean))
        self.norm_std.fill_(float(std))

    def raw_allocations(self, low_kwh: torch.Tensor) -> torch.Tensor:
        """Un-projected (batch, T, S) allocation logits."""
        if low_kwh.ndim != 2 or low_kwh.shape[1] != self.config.window_samples:
            raise ShapeError(
                f"expected input of shape (batch, {self.config.window_samples}), "
                f"got {tuple(low_kwh.shape)}"
            )
        if not torch.isfinite(low_kwh).all():
            raise NumericError("generator input contains non-finite values")
        x = (low_kwh - self.norm_mean) / self.norm_std
        y = self.act(self.head(x.unsqueeze(1)))
        skip = y
        for block in self.blocks:
            y = block(y)
        y = self.mid(y) + skip
        return self.tail(y).permute(0, 2, 1)

    def forward(self, low_kwh: torch.Tensor):
        """Returns (allocations (batch, T, S), reconstruction (batch, S*T))."""
        alloc = _project_rows(self.raw_allocations(low_kwh))
        high = alloc * low_kwh.unsqueeze(-1)
        return alloc, high.reshape(low_kwh.shape[0], -1)


class Discriminator(nn.Module):
    """Strided conv stack emitting one realism logit per high-res window."""

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        pad = config.kernel_size // 2
        layers = []
        prev = 1
        for ch in config.channels:
            layers.append(nn.Conv1d(prev, ch, config.kernel_size, stride=2, padding=pad))
            layers.append(nn.LeakyReLU(0.2))
            prev = ch
        self.features = nn.Sequential(*layers)
        self.classify = nn.Linear(prev, 1)
        self.config = config
        self.double()

    def forward(self, high_kwh: torch.Tensor) -> torch.Tensor:
        if high_kwh.ndim != 2:
            raise ShapeError(f"expected (batch, length) input, got {tuple(high_kwh.shape)}")
        y = self.features(high_kwh.unsqueeze(1))
        # global average pooling makes the logit see the whole window
        y = y.mean(dim=2)
        return self.classify(y).squeeze(1)


def build_generator(config: GeneratorConfig, seed: int) -> Generator:
    """Seeded construction; identical (config, seed) gives identical weights."""
    torch.manual_seed(seed)
    return Generator(config)


def build_discriminator(config: DiscriminatorConfig, seed: int) -> Discriminator:
    torch.manual_seed(seed)
    return Discriminator(config)


@dataclass
class ModelParams:
    """A trained (or initialized) model: configs, weights, provenance."""

    generator_config: GeneratorConfig
    generator_state: dict
    discriminator_config: DiscriminatorConfig | None = None
    discriminator_state: dict | None = None
    mode: str = "cnn"
    seed: int = 0
    data_digest: str = ""

    def make_generator(self) -> Generator:
        gen = Generator(self.generator_config)
        gen.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in self.generator_state.items()})
        return gen

    def make_discriminator(self) -> Discriminator:
        if self.discriminator_config is None or self.discriminator_state is None:
            raise DataError("checkpoint holds no discriminator")
        disc = Discriminator(self.discriminator_config)
        disc.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in self.discriminator_state.items()})
        return disc


def state_to_numpy(module: nn.Module) -> dict:
    return {k: v.detach().cpu().numpy().copy() for k, v in module.state_dict().items()}


def save_checkpoint(params: ModelParams, path) -> None:
    """Write a versioned, byte-deterministic .npz checkpoint."""
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "mode": params.mode,
        "seed": params.seed,
        "data_digest": params.data_digest,
        "generator_config": asdict(params.generator_config),
        "discriminator_config": (
            None if params.discriminator_config is None else asdict(params.discriminator_config)
        ),
        "generator_keys": list(params.generator_state),
        "discriminator_keys": (
            None if params.discriminator_state is None else list(params.discriminator_state)
        ),
    }
    arrays = {"meta": np.array(json.dumps(meta))}
    for k, v in params.generator_state.items():
        arrays[f"gen::{k}"] = v
    if params.discriminator_state is not None:
        for k, v in params.discriminator_state.items():
            arrays[f"disc::{k}"] = v
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> ModelParams:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such checkpoint: {path}")
    with np.load(path, allow_pickle=False) as data:
        if "meta" not in data:
            raise DataError(f"{path} is not a model checkpoint")
        meta = json.loads(str(data["meta"]))
        version = meta.get("format_version")
        if version != CHECKPOINT_VERSION:
            raise DataError(
                f"checkpoint format version {version} does not match supported "
                f"version {CHECKPOINT_VERSION}"
            )
        gen_config = GeneratorConfig(**{
            k: tuple(v) if isinstance(v, list) else v
            for k, v in meta["generator_config"].items()
        })
        gen_state = {k: data[f"gen::{k}"] for k in meta["generator_keys"]}
        disc_config = None
        disc_state = None
        if meta["discriminator_config"] is not None:
            cfg = dict(meta["discriminator_config"])
            cfg["channels"] = tuple(cfg["channels"])
            disc_config = DiscriminatorConfig(**cfg)
            disc_state = {k: data[f"disc::{k}"] for k in meta["discriminator_keys"]}
    return ModelParams(
        generator_config=gen_config,
        generator_state=gen_state,
        discriminator_config=disc_config,
        discriminator_state=disc_state,
        mode=meta["mode"],
        seed=meta["seed"],
        data_digest=meta["data_digest"],
    )
