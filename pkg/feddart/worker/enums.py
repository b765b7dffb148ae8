"""
This module contains the enumerations used by the client worker.
"""

from enum import Enum, auto

from .._compat import StrEnum


class WorkerErrorCodes(Enum):
    """Error codes enumeration. Used by the worker lifecycle and the task functions."""
    OK = auto()
    CANCELLED = auto()
    REFUSED = auto()
    UNKNOWN_FUNCTION = auto()
    NOT_INITIALIZED = auto()
    BAD_DATA = auto()
    REGISTRY_NOT_FOUND = auto()


class WorkerState(Enum):
    """Worker state enumeration"""
    STOPPED = 0
    RUNNING = 1
    STOPPING = 2


class DataKind(StrEnum):
    CSV = "csv"
    SYNTHETIC = "synthetic"
