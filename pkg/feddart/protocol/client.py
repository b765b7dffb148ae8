"""
This module contains the transports speaking the REST API: the abstract interfaces used by the workflow side and by
the workers, and their HTTP implementations built on `requests`.
"""

from abc import ABC, abstractmethod
from typing import Any, Optional

import requests

from ..core.models import Assignment, DeviceSummary, TaskResult, TaskSpec, TaskStatus
from ..errors import ServerError, TransportError
from .enums import KEY_HEADER, ErrorCode, TransportErrorCodes


class DartClient(ABC):
    """
    Workflow side of the protocol. The HTTP implementation talks to a running server, the test mode implementation
    simulates one in-process.
    """

    @abstractmethod
    def add_tasks(self, job_name: str, spec: TaskSpec) -> bool:
        """
        Hand a task over to the server

        :param job_name: Unique name of the task
        :param spec: Task specification
        :return: True when the task was accepted
        """

    @abstractmethod
    def get_job_results(self, job_name: str, amount: int) -> list[TaskResult]:
        """
        Download the results currently available, never waits for unfinished devices

        :param job_name: Name of the task
        :param amount: Maximal number of results returned
        :return: The available results
        """

    @abstractmethod
    def get_task_status(self, job_name: str) -> TaskStatus:
        """Status of the task at call time"""

    @abstractmethod
    def stop_task(self, job_name: str) -> bool:
        """Stop a task, True if it was still running"""

    @abstractmethod
    def list_devices(self) -> list[DeviceSummary]:
        """Devices registered on the server"""

    def close(self) -> None:
        """Release the resources held by the client"""


class WorkerTransport(ABC):
    """Worker side of the protocol"""

    @abstractmethod
    def register_device(self, name: str, hardware_config: Optional[dict[str, Any]] = None, port: int = 0,
                        poll_interval_seconds: float = 1.0) -> bool:
        """Register the device, registering twice under the same name is harmless"""

    @abstractmethod
    def poll_assignment(self, device_name: str, wait_seconds: float) -> Optional[Assignment]:
        """Wait at most `wait_seconds` for the next assignment of the device"""

    @abstractmethod
    def submit_result(self, device_name: str, task_name: str, result: TaskResult) -> bool:
        """Deliver the result of an assignment"""


class ApiSession:
    """
    Thin wrapper around a `requests` session which adds the shared key to every request and decodes the response
    envelope. A failed envelope is raised as a `ServerError` carrying the protocol error code.
    """

    def __init__(self, server_url: str, key: str, timeout: float = 10.0, session: Any = None) -> None:
        self.server_url = server_url.rstrip("/")
        self._key = key
        self._timeout = timeout
        self._session = session if session is not None else requests.Session()

    def request(self, method: str, path: str, *, json: Any = None, params: Optional[dict[str, Any]] = None,
                timeout: Optional[float] = None) -> Any:
        try:
            response = self._session.request(method, f"{self.server_url}{path}", json=json, params=params,
                                             headers={KEY_HEADER: self._key},
                                             timeout=timeout if timeout is not None else self._timeout)
        except requests.RequestException as exc:
            raise TransportError(TransportErrorCodes.UNREACHABLE, f"{method} {path}: {exc}") from exc

        try:
            body = response.json()
        except ValueError as exc:
            raise TransportError(TransportErrorCodes.MALFORMED_RESPONSE,
                                 f"{method} {path} answered {response.status_code} without an envelope") from exc

        if not isinstance(body, dict) or "ok" not in body:
            raise TransportError(TransportErrorCodes.MALFORMED_RESPONSE, f"{method} {path}: {body!r}")

        if not body["ok"]:
            error = body.get("error") or {}
            try:
                code = ErrorCode(error.get("code"))
            except ValueError:
                code = ErrorCode.BAD_REQUEST
            raise ServerError(code, error.get("message", ""))

        return body.get("data")

    def close(self) -> None:
        self._session.close()


class HttpDartClient(DartClient):
    """Workflow side transport talking to a DART-Server over HTTP"""

    def __init__(self, server_url: str, key: str, timeout: float = 10.0, session: Any = None) -> None:
        self.api = ApiSession(server_url, key, timeout, session)

    def add_tasks(self, job_name: str, spec: TaskSpec) -> bool:
        data = self.api.request("POST", "/api/tasks", json={"job_name": job_name, "spec": spec.model_dump(mode="json")})
        return bool(data["accepted"])

    def get_job_results(self, job_name: str, amount: int) -> list[TaskResult]:
        data = self.api.request("GET", f"/api/tasks/{job_name}/results", params={"amount": amount})
        return [TaskResult.model_validate(r) for r in data]

    def get_task_status(self, job_name: str) -> TaskStatus:
        return TaskStatus.model_validate(self.api.request("GET", f"/api/tasks/{job_name}/status"))

    def stop_task(self, job_name: str) -> bool:
        return bool(self.api.request("DELETE", f"/api/tasks/{job_name}")["stopped"])

    def list_devices(self) -> list[DeviceSummary]:
        return [DeviceSummary.model_validate(d) for d in self.api.request("GET", "/api/devices")]

    def close(self) -> None:
        self.api.close()


class WorkerClient(WorkerTransport):
    """Worker side transport talking to a DART-Server over HTTP"""

    def __init__(self, server_url: str, key: str, timeout: float = 10.0, session: Any = None) -> None:
        self.api = ApiSession(server_url, key, timeout, session)
        self._timeout = timeout

    def register_device(self, name: str, hardware_config: Optional[dict[str, Any]] = None, port: int = 0,
                        poll_interval_seconds: float = 1.0) -> bool:
        data = self.api.request("POST", "/api/devices/register",
                                json={"name": name, "hardware_config": hardware_config, "port": port,
                                      "poll_interval_seconds": poll_interval_seconds})
        return bool(data["registered"])

    def poll_assignment(self, device_name: str, wait_seconds: float) -> Optional[Assignment]:
        # the long poll must not be cut by the request timeout
        data = self.api.request("POST", "/api/worker/poll",
                                json={"device_name": device_name, "wait_seconds": wait_seconds},
                                timeout=self._timeout + wait_seconds)
        assignment = data.get("assignment")
        return Assignment.model_validate(assignment) if assignment is not None else None

    def submit_result(self, device_name: str, task_name: str, result: TaskResult) -> bool:
        data = self.api.request("POST", "/api/worker/result",
                                json={"device_name": device_name, "task_name": task_name,
                                      "result": result.model_dump(mode="json")})
        return bool(data["recorded"])
