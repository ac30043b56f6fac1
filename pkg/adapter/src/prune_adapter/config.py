"""Adapter configuration."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class AdapterConfig:
    model: str = "tiny"            # tiny | small | path to a state dict
    dataset: str = "synthetic"     # synthetic | cifar10
    proxy_size: int = 1024
    heldout_size: int = 8000
    device: str = "cpu"
    seed: int = 42
    fine_tune: bool = False
    epochs: int = 3
    batch_size: int = 16
    calibration_batches: int = 4
    data_root: str = "./data"

    def __post_init__(self) -> None:
        if self.proxy_size < 1 or self.heldout_size < 1:
            raise ValueError("split sizes must be positive")
        if self.epochs < 0 or self.batch_size < 1 or self.calibration_batches < 1:
            raise ValueError("bad training parameters")
