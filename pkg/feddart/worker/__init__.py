"""
The DART-Client: a daemon executing the task functions of its registry on local data.
"""

from .core import Worker
from .data import CsvDataImporter, DataImporter, SyntheticDataImporter, build_importer
from .enums import DataKind, WorkerErrorCodes, WorkerState
from .models import DataSpec, WorkerConfig
from .registry import DEFAULT_REGISTRY, FunctionRegistry, TaskContext, feddart, load_registry
