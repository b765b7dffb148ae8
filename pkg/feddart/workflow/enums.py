"""
This module contains the enumerations of the workflow side.
"""

from enum import Enum, auto

from .._compat import StrEnum


class WorkflowErrorCodes(Enum):
    """Error codes enumeration. Used by the workflow manager and its backend."""
    ALREADY_CONNECTED = auto()
    NOT_CONNECTED = auto()
    CONNECT_FAILED = auto()
    INIT_TIMEOUT = auto()
    TASK_REJECTED = auto()
    TASK_UNKNOWN = auto()


class RejectionReason(StrEnum):
    """Why the selector refused a task"""
    BAD_REQUEST = "BAD_REQUEST"
    UNKNOWN_DEVICE = "UNKNOWN_DEVICE"
    NOT_INITIALIZED = "NOT_INITIALIZED"
    CONSTRAINT_UNMET = "CONSTRAINT_UNMET"
    DUPLICATE_NAME = "DUPLICATE_NAME"
