"""
This file defines the configuration of a worker and of its local data.
"""

# pylint: disable=missing-class-docstring

from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, Field

from .enums import DataKind


class DataSpec(BaseModel):
    """
    Local data of a client. CSV files hold one sample per row, the target in `target_column`; the synthetic generator
    draws standard normal features and targets from `true_weights` (linear, or logistic labels).
    """
    kind: DataKind = DataKind.SYNTHETIC
    path: Optional[Path] = None
    target_column: int = -1
    skip_header: bool = True
    n_samples: int = Field(default=100, ge=1)
    n_features: int = Field(default=2, ge=1)
    true_weights: Optional[list[float]] = None
    noise: float = Field(default=0.0, ge=0)
    task: str = "linear"
    seed: int = 0
    test_fraction: float = Field(default=0.0, ge=0, lt=1)
    standardize: bool = False


class WorkerConfig(BaseModel):
    server_url: str
    key: str
    device_name: str = Field(min_length=1)
    hardware_config: Optional[dict[str, Any]] = None
    output_dir: Path = Path("./output")
    poll_interval_seconds: float = Field(default=1.0, gt=0)
    # dotted path of the module registering the task functions
    function_registry_ref: str = "feddart.worker.functions"
    data: Optional[DataSpec] = None
    seed: int = 0
    port: int = 0
    request_timeout_seconds: float = Field(default=10.0, gt=0)
