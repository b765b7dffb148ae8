"""
This module contains the enumerations of the core types.
"""

from .._compat import StrEnum


class TaskKind(StrEnum):
    """An INIT task runs on every device before any DEFAULT task may run there"""
    INIT = "INIT"
    DEFAULT = "DEFAULT"


class TaskState(StrEnum):
    """Enumeration for the task's state"""
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    PARTIAL = "PARTIAL"
    COMPLETED = "COMPLETED"
    FAILED = "FAILED"
    STOPPED = "STOPPED"

    @property
    def is_terminal(self) -> bool:
        return self in (TaskState.COMPLETED, TaskState.FAILED, TaskState.STOPPED)
