"""
This file defines the request bodies and the response envelope of the REST API.
"""

# pylint: disable=missing-class-docstring

from typing import Any, Optional

from pydantic import BaseModel, Field

from ..core.models import TaskResult, TaskSpec
from .enums import ErrorCode


class AddTask(BaseModel):
    job_name: str
    spec: TaskSpec


class RegisterDevice(BaseModel):
    name: str = Field(min_length=1)
    hardware_config: Optional[dict[str, Any]] = None
    port: int = 0
    poll_interval_seconds: float = Field(default=1.0, gt=0)


class PollAssignment(BaseModel):
    device_name: str
    wait_seconds: float = Field(default=0.0, ge=0)


class SubmitResult(BaseModel):
    device_name: str
    task_name: str
    result: TaskResult


class ApiError(BaseModel):
    code: ErrorCode
    message: str = ""


class ApiResponse(BaseModel):
    ok: bool
    error: Optional[ApiError] = None
    data: Any = None

    @classmethod
    def success(cls, data: Any = None) -> "ApiResponse":
        return cls(ok=True, data=data)

    @classmethod
    def failure(cls, code: ErrorCode, message: str = "") -> "ApiResponse":
        return cls(ok=False, error=ApiError(code=code, message=message))
