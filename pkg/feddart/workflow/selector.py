"""
This module contains the Selector, the central element of the workflow side. It mirrors the registered devices,
accepts or rejects tasks, hands accepted tasks to the server through their aggregator and keeps the results of the
finished tasks once the aggregator is gone.
"""

from collections import deque
from typing import Optional

from ..core.enums import TaskKind
from ..core.models import DeviceSummary, TaskResult, TaskSpec, TaskStatus
from ..errors import ServerError, TaskRejectedError, WorkflowError
from ..logger import LoggingManager
from ..protocol.enums import ALL_RESULTS, ErrorCode
from .aggregator import DEFAULT_FANOUT, DEFAULT_HOLDER_CAPACITY, Aggregator
from .device import DeviceSingle
from .enums import RejectionReason, WorkflowErrorCodes
from .runtime import DartRuntime
from .task import Task


class Selector:
    """
    Single writer of the workflow side state. Aggregators only exist between the acceptance of their task and its
    end, status and results of ended tasks come from the device caches.
    """

    def __init__(self, runtime: DartRuntime, holder_capacity: int = DEFAULT_HOLDER_CAPACITY,
                 fanout: int = DEFAULT_FANOUT) -> None:
        self.logger = LoggingManager.get_logger("selector", app="Selector")
        self.runtime = runtime
        self.holder_capacity = holder_capacity
        self.fanout = fanout

        self.devices: dict[str, DeviceSingle] = {}
        self.task_queue: deque[Task] = deque()
        self.aggregators: dict[str, Aggregator] = {}

        self.init_task: Optional[TaskSpec] = None
        self._known_tasks: set[str] = set()
        self._ended: dict[str, TaskStatus] = {}
        self._task_devices: dict[str, list[str]] = {}

    def update_registered_devices(self) -> list[DeviceSummary]:
        """Refresh the device mirrors from the server, mirrors are never written back"""
        summaries = self.runtime.update_registered_devices()
        for summary in summaries:
            if summary.name in self.devices:
                self.devices[summary.name].update(summary)
            else:
                self.devices[summary.name] = DeviceSingle(summary)
                self.logger.info(f"new device {summary.name}")
        return summaries

    def schedule_init_task(self, spec: TaskSpec) -> None:
        """Send the init task, the server delivers it to every present and future device"""
        if spec.task_kind != TaskKind.INIT:
            raise ValueError("not an init task")

        try:
            self.runtime.add_task(spec)
        except ServerError as exc:
            raise TaskRejectedError(WorkflowErrorCodes.TASK_REJECTED, RejectionReason.BAD_REQUEST, exc.message) from exc

        self.init_task = spec
        self._known_tasks.add(spec.task_name)
        self.logger.info(f"init task {spec.task_name} scheduled")

    def request_task_acceptance(self, spec: TaskSpec) -> Optional[tuple[RejectionReason, str]]:
        """
        Check a task against the device mirrors and queue it when it is acceptable

        :param spec: Task specification
        :return: The rejection reason and its detail, None when the task was accepted
        """
        self.update_registered_devices()
        task = Task(spec)

        rejection = task.check_constraints(self.devices, self._known_tasks, init_required=self.init_task is not None)
        if rejection is not None:
            self.logger.warning(f"task {spec.task_name} rejected: {rejection[0]} ({rejection[1]})")
            return rejection

        self._known_tasks.add(spec.task_name)
        self.task_queue.append(task)
        return None

    def instantiate_aggregator(self, task: Task) -> Aggregator:
        devices = [self.devices[name] for name in task.spec.per_device_params]
        aggregator = Aggregator.build(task, devices, self.runtime, self.holder_capacity, self.fanout)
        self.aggregators[task.name] = aggregator
        self._task_devices[task.name] = aggregator.device_names
        self.logger.debug(f"{aggregator} instantiated")
        return aggregator

    def schedule(self) -> None:
        """Hand every queued task to the server"""
        while self.task_queue:
            task = self.task_queue.popleft()
            aggregator = self.instantiate_aggregator(task)

            try:
                aggregator.send_task()
            except ServerError as exc:
                del self.aggregators[task.name]
                self._known_tasks.discard(task.name)
                raise TaskRejectedError(WorkflowErrorCodes.TASK_REJECTED, RejectionReason.BAD_REQUEST,
                                        f"server refused the task: {exc.message}") from exc

            self.logger.info(f"task {task.name} sent to {len(task.spec.per_device_params)} devices")

    def _aggregator(self, task_name: str) -> Optional[Aggregator]:
        if task_name not in self._known_tasks:
            raise WorkflowError(WorkflowErrorCodes.TASK_UNKNOWN, f"task {task_name} does not exist")
        return self.aggregators.get(task_name)

    def _retire(self, task_name: str, status: TaskStatus) -> None:
        aggregator = self.aggregators.get(task_name)
        if aggregator is None:
            return
        aggregator.request_aggregation()
        self._ended[task_name] = status
        del self.aggregators[task_name]
        self.logger.debug(f"task {task_name} ended as {status.state}")

    def _is_init_task(self, task_name: str) -> bool:
        return self.init_task is not None and task_name == self.init_task.task_name

    def get_task_status(self, task_name: str) -> TaskStatus:
        if self._is_init_task(task_name):
            return self.runtime.get_task_status(task_name)

        aggregator = self._aggregator(task_name)
        if aggregator is None:
            return self._ended[task_name]

        status = aggregator.is_task_finished()
        if status.state.is_terminal:
            self._retire(task_name, status)
        return status

    def get_task_results(self, task_name: str) -> list[TaskResult]:
        # the init task has no aggregator, the server keeps its results
        if self._is_init_task(task_name):
            return self.runtime.get_task_results(task_name, ALL_RESULTS)

        aggregator = self._aggregator(task_name)
        if aggregator is not None:
            return aggregator.request_aggregation()

        results = (self.devices[name].get_task_result(task_name) for name in self._task_devices[task_name])
        return [r for r in results if r is not None]

    def stop_task(self, task_name: str) -> bool:
        aggregator = self._aggregator(task_name)
        if aggregator is None:
            return False

        try:
            stopped = self.runtime.stop_task(task_name)
        except ServerError as exc:
            if exc.code == ErrorCode.TASK_UNKNOWN:
                raise WorkflowError(WorkflowErrorCodes.TASK_UNKNOWN, exc.message) from exc
            raise

        self._retire(task_name, aggregator.is_task_finished())
        return stopped
