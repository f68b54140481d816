"""Super-resolution of smart-meter interval energy data.

Upsamples hourly interval data to 15-minute data with models whose outputs
conserve energy by construction, and evaluates reconstructions with MSE and
the windowed peak error.
"""

from .errors import LoadsrError
from .metrics import EvalReport, MetricConfig, evaluate, mse, wpe
from .model import DiscriminatorConfig, GeneratorConfig, ModelParams, project_allocations
from .series import (
    IntervalSeries,
    SrPair,
    baseline_upsample,
    check_energy_constraint,
    downsample,
    reconstruct_from_allocations,
)
from .synth import SynthProfile, generate_household, make_synthetic_corpus, naive_wpe_oracle
from .training import TrainConfig, reconstruct_series, train_cnn, train_gan

__version__ = "0.1.0"

__all__ = [
    "LoadsrError",
    "IntervalSeries",
    "SrPair",
    "downsample",
    "baseline_upsample",
    "check_energy_constraint",
    "reconstruct_from_allocations",
    "MetricConfig",
    "EvalReport",
    "mse",
    "wpe",
    "evaluate",
    "SynthProfile",
    "generate_household",
    "make_synthetic_corpus",
    "naive_wpe_oracle",
    "GeneratorConfig",
    "DiscriminatorConfig",
    "ModelParams",
    "project_allocations",
    "TrainConfig",
    "train_cnn",
    "train_gan",
    "reconstruct_series",
    "__version__",
]
