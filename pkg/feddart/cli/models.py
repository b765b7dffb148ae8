"""
This file defines the experiment file binding the server file, the device file and the FACT settings into one
runnable unit.
"""

# pylint: disable=missing-class-docstring

from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from .._compat import Self
from ..config import ConfigErrorCodes
from ..errors import ConfigError
from ..fact.enums import AggregationAlgorithm, ClusteringAlgorithm, ModelType
from ..worker.models import DataSpec


class ModelSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True, protected_namespaces=())

    model_type: ModelType = ModelType.LINEAR
    structure: dict[str, Any] = Field(default_factory=dict, alias="model_config")
    hyperparameters: dict[str, Any] = {}


class ExperimentConfig(BaseModel):
    """
    Only the transport fields (`test_mode` and the addresses of the server file) differ between a test mode run and a
    distributed run of the same experiment.
    """
    server_file: Path
    device_file: Optional[Path] = None
    model: ModelSpec = ModelSpec()
    aggregation: AggregationAlgorithm = AggregationAlgorithm.FEDAVG
    clustering: ClusteringAlgorithm = ClusteringAlgorithm.STATIC
    k: int = Field(default=1, ge=1)
    fl_rounds: int = Field(default=1, ge=1)
    clustering_rounds: int = Field(default=1, ge=1)
    data: dict[str, DataSpec] = {}
    task_parameters: dict[str, Any] = {}
    seed: int = 0
    test_mode: bool = False
    max_wait_seconds: float = Field(default=60.0, gt=0)
    output_dir: Path = Path("./output")

    def resolved(self, base_dir: Path) -> Self:
        """Copy where the relative paths are taken relative to `base_dir`"""

        def _resolve(path: Optional[Path]) -> Optional[Path]:
            return path if path is None or path.is_absolute() else base_dir / path

        data = {name: spec.model_copy(update={"path": _resolve(spec.path)}) for name, spec in self.data.items()}
        return self.model_copy(update={"server_file": _resolve(self.server_file),
                                       "device_file": _resolve(self.device_file),
                                       "output_dir": _resolve(self.output_dir), "data": data})

    def check_files(self) -> None:
        """
        Verify that the referenced files exist

        :raises ConfigError: COULD_NOT_FIND_CONFIGURATION
        """
        files = [self.server_file, self.device_file] + [spec.path for spec in self.data.values()]
        missing = [str(f) for f in files if f is not None and not f.is_file()]

        if missing:
            raise ConfigError(ConfigErrorCodes.COULD_NOT_FIND_CONFIGURATION, f"missing files: {', '.join(missing)}")
        if self.test_mode and self.device_file is None:
            raise ConfigError(ConfigErrorCodes.COULD_NOT_FIND_CONFIGURATION, "the test mode needs a device file")
