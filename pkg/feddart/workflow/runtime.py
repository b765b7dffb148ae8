"""
This module contains the DartRuntime, translating the requests of the workflow side into calls of a `DartClient` and
logging the communication with the server.
"""

from ..core.models import DeviceSummary, TaskResult, TaskSpec, TaskStatus
from ..logger import LoggingManager
from ..protocol.client import DartClient


class DartRuntime:
    """Helper between the selector and the transport, every message goes through the LogServer"""

    def __init__(self, client: DartClient) -> None:
        self.client = client
        self.logger = LoggingManager.get_logger("dart-runtime", app="DART Runtime")

    def update_registered_devices(self) -> list[DeviceSummary]:
        devices = self.client.list_devices()
        self.logger.debug(f"{len(devices)} registered devices")
        return devices

    def add_task(self, spec: TaskSpec) -> bool:
        self.logger.debug(f"add_tasks {spec.task_name} -> {spec.device_names or 'all devices'}")
        return self.client.add_tasks(spec.task_name, spec)

    def get_task_status(self, task_name: str) -> TaskStatus:
        status = self.client.get_task_status(task_name)
        self.logger.debug(f"status of {task_name}: {status.state}")
        return status

    def get_task_results(self, task_name: str, amount: int) -> list[TaskResult]:
        results = self.client.get_job_results(task_name, amount)
        self.logger.debug(f"get_job_results {task_name}: {len(results)} results")
        return results

    def stop_task(self, task_name: str) -> bool:
        self.logger.debug(f"stop {task_name}")
        return self.client.stop_task(task_name)

    def close(self) -> None:
        self.client.close()
