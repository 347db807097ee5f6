"""Adversarial unmix-and-remix: unsupervised single-channel source separation.

The heavy lifting lives in the C++ extension `unmix._core`; this package
re-exports the public surface.
"""

from ._core import (  # noqa: F401
    ConfigError,
    DataError,
    DimensionError,
    DivergenceError,
    FormatError,
    StepReport,
    TrainConfig,
    Trainer,
    dataset_hash,
    load_dataset,
    psnr,
    set_num_threads,
    ssim,
    synth_toy,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DimensionError",
    "DivergenceError",
    "FormatError",
    "StepReport",
    "TrainConfig",
    "Trainer",
    "dataset_hash",
    "load_dataset",
    "psnr",
    "set_num_threads",
    "ssim",
    "synth_toy",
]
