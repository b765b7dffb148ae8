"""
Domain types shared by every other package. Nothing in here performs any I/O.
"""

from .clock import ManualClock, SystemClock
from .core import classify_status, derive_seed, now_ms, result_list_of, validate_task_spec
from .enums import TaskKind, TaskState
from .models import (Assignment, DeviceRecord, DeviceSummary, Handle, ParameterVector, TaskResult, TaskSpec,
                     TaskStatus)
