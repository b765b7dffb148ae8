"""
This module contains the pure functions shared by the core types.
"""

from __future__ import annotations

import time
import zlib
from typing import TYPE_CHECKING, Any, Iterable, Mapping, Optional

from .enums import TaskKind, TaskState

if TYPE_CHECKING:
    from .models import TaskSpec


def result_list_of(result_dict: Mapping[str, Any]) -> list[Any]:
    """
    List form of a task result

    :param result_dict: Result of a task function
    :return: The values ordered by their key in lexicographic order
    """
    return [result_dict[key] for key in sorted(result_dict)]


def classify_status(finished: Iterable[str], pending: Iterable[str], stopped: bool = False, failed: bool = False,
                    queued: bool = False) -> TaskState:
    """
    Compute the state of a task from its device sets and flags

    :param finished: Devices which delivered a result
    :param pending: Devices still expected to deliver one
    :param stopped: The task was stopped by the user
    :param failed: The task expired without any result
    :param queued: The task waits for server capacity
    :return: The task state
    """
    if stopped:
        return TaskState.STOPPED
    if failed:
        return TaskState.FAILED
    if queued:
        return TaskState.QUEUED

    any_finished = any(True for _ in finished)
    any_pending = any(True for _ in pending)

    if any_finished and not any_pending:
        return TaskState.COMPLETED
    if any_finished:
        return TaskState.PARTIAL
    return TaskState.RUNNING


def validate_task_spec(spec: TaskSpec) -> Optional[str]:
    """
    Check the structural invariants of a task specification

    :param spec: Task specification
    :return: The reason the spec is invalid, None if it is valid
    """
    if not spec.task_name:
        return "task_name must not be empty"
    if not spec.execute_function:
        return "execute_function must not be empty"
    if spec.max_wait_seconds <= 0:
        return "max_wait_seconds must be positive"
    if spec.task_kind == TaskKind.DEFAULT and not spec.per_device_params:
        return "a default task must name at least one device"
    return None


def now_ms() -> int:
    return int(time.time() * 1000)


def derive_seed(seed: int, device_name: str, round_index: int) -> int:
    """Stable across processes, unlike `hash`"""
    return zlib.crc32(f"{seed}:{device_name}:{round_index}".encode("utf-8"))
