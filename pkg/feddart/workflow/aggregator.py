"""
This module contains the ephemeral structure managing an accepted task: an Aggregator tree whose leaves group the
devices of the task into DeviceHolders. Requests to the server are issued once per tree and split per holder.
"""

import math
from typing import Optional

from ..core.core import classify_status
from ..core.enums import TaskState
from ..core.models import TaskResult, TaskStatus
from .device import DeviceSingle
from .runtime import DartRuntime
from .task import Task, creation_counter

DEFAULT_HOLDER_CAPACITY = 32
DEFAULT_FANOUT = 8


def _restricted(status: TaskStatus, finished: frozenset[str], pending: frozenset[str],
                missing: frozenset[str]) -> TaskStatus:
    state = classify_status(finished, pending, stopped=status.state == TaskState.STOPPED,
                            failed=status.state == TaskState.FAILED, queued=status.state == TaskState.QUEUED)
    return status.model_copy(update={"finished_devices": finished, "pending_devices": pending,
                                     "missing_devices": missing, "state": state})


class DeviceHolder:
    """Group of at most `capacity` devices of a task"""

    def __init__(self, devices: list[DeviceSingle], capacity: int) -> None:
        if not 1 <= len(devices) <= capacity:
            raise ValueError(f"a holder takes 1 to {capacity} devices, got {len(devices)}")

        self.created_seq = next(creation_counter)
        self.devices = devices
        self.capacity = capacity

    @property
    def device_names(self) -> list[str]:
        return [d.name for d in self.devices]

    def broadcast_task(self, task: Task) -> None:
        for device in self.devices:
            device.start_task(task.name, task.spec.params_for(device.name))

    def devices_finished(self, status: TaskStatus) -> TaskStatus:
        """The server status restricted to the devices of the holder"""
        names = frozenset(self.device_names)
        finished = status.finished_devices & names
        pending = status.pending_devices & names
        missing = status.missing_devices & names
        return _restricted(status, finished, pending, missing)

    def get_finished_tasks(self, task_name: str, results: dict[str, TaskResult]) -> list[TaskResult]:
        """Pick the results of the holder's devices and cache them on the devices"""
        picked = []
        for device in self.devices:
            result = results.get(device.name)
            if result is not None:
                device.cache_result(task_name, result)
                picked.append(result)
        return picked


class Aggregator:
    """
    Manager of one task. Its devices live in DeviceHolders; when they need more than `fanout` holders the
    aggregator spawns child aggregators instead, each spanning up to capacity * fanout^k devices.
    """

    def __init__(self, task: Task, runtime: DartRuntime) -> None:
        self.created_seq = next(creation_counter)
        self.task = task
        self.runtime = runtime
        self.device_holders: list[DeviceHolder] = []
        self.child_aggregators: list["Aggregator"] = []

    def __repr__(self) -> str:
        return f"Aggregator({self.task.name}, depth={self.depth}, holders={len(self.all_holders())})"

    @classmethod
    def build(cls, task: Task, devices: list[DeviceSingle], runtime: DartRuntime,
              capacity: int = DEFAULT_HOLDER_CAPACITY, fanout: int = DEFAULT_FANOUT) -> "Aggregator":
        """
        Create the aggregator tree of a task top-down

        :param task: Accepted task
        :param devices: Device mirrors of the task, in task order
        :param runtime: Runtime reaching the server
        :param capacity: Maximal devices per holder
        :param fanout: Maximal holders or children per aggregator
        :return: The root aggregator
        """
        if capacity < 1 or fanout < 2:
            raise ValueError("capacity must be positive and fanout at least 2")

        aggregator = cls(task, runtime)

        if math.ceil(len(devices) / capacity) <= fanout:
            aggregator.device_holders = [DeviceHolder(devices[i:i + capacity], capacity)
                                         for i in range(0, len(devices), capacity)]
            return aggregator

        span = capacity * fanout
        while math.ceil(len(devices) / span) > fanout:
            span *= fanout

        aggregator.child_aggregators = [cls.build(task, devices[i:i + span], runtime, capacity, fanout)
                                        for i in range(0, len(devices), span)]
        return aggregator

    @property
    def depth(self) -> int:
        return 1 + max((c.depth for c in self.child_aggregators), default=0)

    def all_holders(self) -> list[DeviceHolder]:
        holders = list(self.device_holders)
        for child in self.child_aggregators:
            holders.extend(child.all_holders())
        return holders

    @property
    def device_names(self) -> list[str]:
        return [name for holder in self.all_holders() for name in holder.device_names]

    def send_task(self) -> bool:
        """Hand the task to the server and open it on every device"""
        accepted = self.runtime.add_task(self.task.spec)
        for holder in self.all_holders():
            holder.broadcast_task(self.task)
        return accepted

    def is_task_finished(self, status: Optional[TaskStatus] = None) -> TaskStatus:
        """
        Status of the task as the meet of the holder statuses

        :param status: Server status already fetched, fetched once otherwise
        :return: The task status over the devices of the tree
        """
        status = status or self.runtime.get_task_status(self.task.name)
        parts = [holder.devices_finished(status) for holder in self.all_holders()]

        finished = frozenset().union(*(p.finished_devices for p in parts))
        pending = frozenset().union(*(p.pending_devices for p in parts))
        missing = frozenset().union(*(p.missing_devices for p in parts))

        return _restricted(status, finished, pending, missing)

    def request_aggregation(self) -> list[TaskResult]:
        """Results currently available, gathered holder by holder"""
        results = self.runtime.get_task_results(self.task.name, len(self.device_names))
        by_device = {r.device_name: r for r in results}
        return [r for holder in self.all_holders() for r in holder.get_finished_tasks(self.task.name, by_device)]
