"""
This module contains the core data models. They are immutable value types, their JSON encoding (snake_case field names)
is the wire and file format used everywhere in Fed-DART.
"""

# pylint: disable=missing-class-docstring

from typing import Annotated, Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .._compat import Self
from .core import result_list_of
from .enums import TaskKind, TaskState

FiniteFloat = Annotated[float, Field(allow_inf_nan=False)]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


class ParameterVector(_Frozen):
    """Flat vector of model parameters, the unit exchanged between the server and the clients"""
    values: list[FiniteFloat]
    sample_count: int = Field(default=0, ge=0)
    shape: Optional[list[int]] = None

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @classmethod
    def from_array(cls, values: np.ndarray, sample_count: int = 0, shape: Optional[list[int]] = None) -> Self:
        return cls(values=[float(v) for v in np.ravel(values)], sample_count=sample_count, shape=shape)


class TaskSpec(_Frozen):
    """
    A named unit of distributed work. `per_device_params` maps every participating device to the arguments of
    `execute_function`; INIT tasks are broadcast, devices not listed receive `default_params`.
    """
    task_name: str
    execute_function: str
    per_device_params: dict[str, dict[str, Any]] = {}
    task_kind: TaskKind = TaskKind.DEFAULT
    max_wait_seconds: float = 60.0
    default_params: dict[str, Any] = {}
    hardware_requirements: Optional[dict[str, Any]] = None
    # accepted for compatibility with client scripts addressed by path, functions come from the worker's registry
    file_path: Optional[str] = None

    @property
    def device_names(self) -> list[str]:
        return list(self.per_device_params)

    def params_for(self, device_name: str) -> dict[str, Any]:
        return self.per_device_params.get(device_name, self.default_params)


class TaskResult(_Frozen):
    """One device's outcome for a task; `result_list` always mirrors `result_dict` in lexicographic key order"""
    device_name: str
    duration_seconds: float = Field(default=0.0, ge=0)
    result_dict: dict[str, Any] = {}
    result_list: list[Any] = []
    error: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _derive_result_list(cls, data: Any) -> Any:
        if isinstance(data, dict):
            data = {**data, "result_list": result_list_of(data.get("result_dict") or {})}
        return data

    @property
    def failed(self) -> bool:
        return self.error is not None

    @classmethod
    def failure(cls, device_name: str, duration_seconds: float, error: str) -> Self:
        return cls(device_name=device_name, duration_seconds=duration_seconds, error=error)


class DeviceRecord(_Frozen):
    """Virtual representation of a physical client as known by the server"""
    name: str
    ip_address: str = ""
    port: int = 0
    hardware_config: Optional[dict[str, Any]] = None
    open_tasks: dict[str, dict[str, Any]] = {}
    finished_tasks: dict[str, TaskResult] = {}
    initialized: bool = False
    last_seen: int = 0
    poll_interval_seconds: float = 1.0


class DeviceSummary(_Frozen):
    """What `list_devices` reports about a device, the task caches are reduced to their names"""
    name: str
    ip_address: str = ""
    port: int = 0
    hardware_config: Optional[dict[str, Any]] = None
    initialized: bool = False
    connected: bool = True
    last_seen: int = 0
    open_tasks: list[str] = []
    finished_tasks: list[str] = []


class TaskStatus(_Frozen):
    task_name: str
    task_kind: TaskKind = TaskKind.DEFAULT
    state: TaskState
    finished_devices: frozenset[str] = frozenset()
    pending_devices: frozenset[str] = frozenset()
    missing_devices: frozenset[str] = frozenset()


class Handle(_Frozen):
    """Non-blocking identifier of an accepted task, issued_at is in milliseconds since the epoch"""
    task_name: str
    issued_at: int


class Assignment(_Frozen):
    """The slice of a task delivered to a single device"""
    task_name: str
    execute_function: str
    task_kind: TaskKind
    params: dict[str, Any] = {}
    max_wait_seconds: float
    file_path: Optional[str] = None
