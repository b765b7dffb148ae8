"""
This module contains the DeviceSingle, the workflow side representation of a physical client.
"""

from typing import Any, Optional

from ..core.models import DeviceSummary, TaskResult


class DeviceSingle:
    """
    Mirror of a device registered on the server. It caches the parameters of its open tasks and the results of its
    finished tasks, the results stay available once the ephemeral structures of a task are gone.
    """

    def __init__(self, summary: DeviceSummary) -> None:
        self.name = summary.name
        self.ip_address = summary.ip_address
        self.port = summary.port
        self.hardware_config = summary.hardware_config
        self.initialized = summary.initialized
        self.connected = summary.connected

        self.open_tasks: dict[str, dict[str, Any]] = {}
        self.finished_tasks: dict[str, TaskResult] = {}

    def __repr__(self) -> str:
        return self.name

    def update(self, summary: DeviceSummary) -> None:
        self.ip_address = summary.ip_address
        self.port = summary.port
        self.hardware_config = summary.hardware_config
        self.initialized = summary.initialized
        self.connected = summary.connected

    def satisfies(self, requirements: Optional[dict[str, Any]]) -> bool:
        """Every required key is present in the hardware configuration with an equal value"""
        if not requirements:
            return True
        config = self.hardware_config or {}
        return all(key in config and config[key] == value for key, value in requirements.items())

    def start_task(self, task_name: str, params: dict[str, Any]) -> None:
        self.open_tasks[task_name] = params

    def cache_result(self, task_name: str, result: TaskResult) -> None:
        self.open_tasks.pop(task_name, None)
        self.finished_tasks[task_name] = result

    def get_task_result(self, task_name: str) -> Optional[TaskResult]:
        return self.finished_tasks.get(task_name)
