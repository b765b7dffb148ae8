"""
This module contains the state machine of the DART-Server. `ServerState` is deliberately single threaded and clock free:
every operation receives the current server time, and the command owner (see `owner.py`) serializes all calls. The same
class replays the journal after a crash and serves as the sequential reference model in the tests.
"""

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from ..core.core import classify_status, validate_task_spec
from ..core.enums import TaskKind, TaskState
from ..core.models import Assignment, DeviceRecord, DeviceSummary, Handle, TaskResult, TaskSpec, TaskStatus
from ..errors import FedDartError, ServerError
from ..logger import LoggingManager
from ..protocol.enums import ErrorCode
from .models import Command


@dataclass
class _TaskEntry:
    spec: TaskSpec
    accepted_at: int
    started_at: Optional[int] = None
    queued: bool = True
    stopped: bool = False
    failed: bool = False
    delivered: set[str] = field(default_factory=set)
    results: dict[str, TaskResult] = field(default_factory=dict)
    missing: set[str] = field(default_factory=set)
    # results arriving after a stop, kept for audit only
    ignored: list[TaskResult] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.spec.task_name

    @property
    def is_init(self) -> bool:
        return self.spec.task_kind == TaskKind.INIT


class ServerState:
    """
    Device registry, FIFO task queue with a capacity gate, per-device dispatch and result store.

    A device never receives a DEFAULT assignment while an init task exists and the device has not reported a
    successful result for it.
    """

    def __init__(self, capacity: int = 4, heartbeat_factor: float = 3.0) -> None:
        if capacity < 1:
            raise ValueError("capacity must be positive")

        self.capacity = capacity
        self.heartbeat_factor = heartbeat_factor
        self.logger = LoggingManager.get_logger("server-state", app="DART Server")

        self._devices: dict[str, DeviceRecord] = {}
        self._tasks: dict[str, _TaskEntry] = {}
        self._queue: deque[str] = deque()
        self._running: list[str] = []
        self._init_task: Optional[str] = None

    @property
    def init_task(self) -> Optional[TaskSpec]:
        return self._tasks[self._init_task].spec if self._init_task is not None else None

    @property
    def running_tasks(self) -> list[str]:
        return list(self._running)

    @property
    def queued_tasks(self) -> list[str]:
        return list(self._queue)

    def device(self, name: str) -> DeviceRecord:
        return self._require_device(name)

    # ---------------------------------------------------------------------------------------------------------------
    # command dispatching

    def apply(self, command: Command) -> Any:
        """
        Execute a serialized command

        :param command: Command, its arguments are in their JSON form
        :return: The result of the operation
        """
        args, now = command.args, command.at

        match command.op:
            case "register_device":
                return self.register_device(now=now, **args)
            case "enqueue":
                return self.enqueue(TaskSpec.model_validate(args["spec"]), now)
            case "dispatch":
                return self.dispatch(args["device_name"], now)
            case "record_result":
                return self.record_result(args["device_name"], args["task_name"],
                                          TaskResult.model_validate(args["result"]), now)
            case "expire":
                return self.expire(args["task_name"], now)
            case "expire_overdue":
                return self.expire_overdue(now)
            case "stop_task":
                return self.stop_task(args["task_name"], now)
            case "get_task_status":
                return self.get_task_status(args["task_name"])
            case "get_job_results":
                return self.get_job_results(args["task_name"], args["amount"])
            case "list_devices":
                return self.list_devices(now)
            case _:
                raise ServerError(ErrorCode.BAD_REQUEST, f"unknown operation {command.op}")

    @classmethod
    def restore(cls, journal_path: str | Path, capacity: int = 4, heartbeat_factor: float = 3.0) -> "ServerState":
        """
        Rebuild a server state by replaying a journal

        :param journal_path: JSON-lines file of the executed mutating commands
        :param capacity: Capacity of the restored server
        :param heartbeat_factor: Heartbeat factor of the restored server
        :return: The restored state
        """
        state = cls(capacity, heartbeat_factor)
        path = Path(journal_path)

        if not path.exists():
            return state

        with open(path, "r", encoding="utf-8") as file:
            for line in file:
                if not line.strip():
                    continue
                try:
                    state.apply(Command.model_validate_json(line))
                except FedDartError:
                    # the error was already returned when the command first ran
                    pass
        return state

    # ---------------------------------------------------------------------------------------------------------------
    # devices

    def register_device(self, name: str, now: int, hardware_config: Optional[dict[str, Any]] = None,
                        ip_address: str = "", port: int = 0, poll_interval_seconds: float = 1.0) -> bool:
        """
        Register a device, idempotent by name. A device coming back before answering its init task gets the init
        task delivered again.
        """
        if not name:
            raise ServerError(ErrorCode.BAD_REQUEST, "device name must not be empty")

        existing = self._devices.get(name)

        if existing is None:
            self._devices[name] = DeviceRecord(name=name, ip_address=ip_address, port=port,
                                               hardware_config=hardware_config, last_seen=now,
                                               poll_interval_seconds=poll_interval_seconds)
            self.logger.info(f"device {name} registered")
            return True

        update: dict[str, Any] = {"ip_address": ip_address, "port": port, "hardware_config": hardware_config,
                                  "last_seen": now, "poll_interval_seconds": poll_interval_seconds}

        if self._init_task is not None and not existing.initialized:
            init = self._tasks[self._init_task]
            if name in init.delivered and name not in init.results:
                init.delivered.discard(name)
                update["open_tasks"] = {k: v for k, v in existing.open_tasks.items() if k != init.name}

        self._devices[name] = existing.model_copy(update=update)
        self.logger.debug(f"device {name} registered again")
        return True

    def list_devices(self, now: int) -> list[DeviceSummary]:
        return [self._summary(d, now) for d in self._devices.values()]

    def _summary(self, device: DeviceRecord, now: int) -> DeviceSummary:
        window = self.heartbeat_factor * device.poll_interval_seconds * 1000
        return DeviceSummary(name=device.name, ip_address=device.ip_address, port=device.port,
                             hardware_config=device.hardware_config, initialized=device.initialized,
                             connected=now - device.last_seen <= window, last_seen=device.last_seen,
                             open_tasks=list(device.open_tasks), finished_tasks=list(device.finished_tasks))

    def _require_device(self, name: str) -> DeviceRecord:
        device = self._devices.get(name)
        if device is None:
            raise ServerError(ErrorCode.DEVICE_UNKNOWN, f"device {name} is not registered")
        return device

    def _update_device(self, name: str, **update: Any) -> None:
        self._devices[name] = self._devices[name].model_copy(update=update)

    # ---------------------------------------------------------------------------------------------------------------
    # tasks

    def enqueue(self, spec: TaskSpec, now: int) -> Handle:
        """
        Accept a task. DEFAULT tasks wait in the queue until the server has capacity, an INIT task replaces the
        previous one and every device has to run it before any further task.
        """
        if (reason := validate_task_spec(spec)) is not None:
            raise ServerError(ErrorCode.TASK_REJECTED, reason)

        if spec.task_name in self._tasks:
            raise ServerError(ErrorCode.TASK_REJECTED, f"task name {spec.task_name} already used")

        entry = _TaskEntry(spec=spec, accepted_at=now)

        if entry.is_init:
            if self._init_task is not None:
                self._tasks[self._init_task].stopped = True
            for name, device in self._devices.items():
                if device.initialized:
                    self._update_device(name, initialized=False)

            entry.queued = False
            entry.started_at = now
            self._tasks[spec.task_name] = entry
            self._init_task = spec.task_name
            self.logger.info(f"init task {spec.task_name} accepted")
            return Handle(task_name=spec.task_name, issued_at=now)

        unknown = [d for d in spec.per_device_params if d not in self._devices]
        if unknown:
            raise ServerError(ErrorCode.TASK_REJECTED, f"unknown devices: {', '.join(sorted(unknown))}")

        self._tasks[spec.task_name] = entry
        self._queue.append(spec.task_name)
        self._promote(now)

        self.logger.debug(f"task {spec.task_name} accepted ({self._status(entry).state})")
        return Handle(task_name=spec.task_name, issued_at=now)

    def dispatch(self, device_name: str, now: int) -> Optional[Assignment]:
        """
        Next assignment of a device: its init task first, then the oldest running task naming it and not yet
        delivered to it
        """
        device = self._require_device(device_name)
        self._update_device(device_name, last_seen=now)

        if self._init_task is not None and not device.initialized:
            init = self._tasks[self._init_task]
            if device_name in init.delivered:
                return None
            return self._deliver(init, device_name)

        for task_name in self._running:
            entry = self._tasks[task_name]
            if (device_name in entry.spec.per_device_params and device_name not in entry.delivered
                    and device_name not in entry.missing):
                return self._deliver(entry, device_name)

        return None

    def _deliver(self, entry: _TaskEntry, device_name: str) -> Assignment:
        params = entry.spec.params_for(device_name)
        entry.delivered.add(device_name)

        device = self._devices[device_name]
        self._update_device(device_name, open_tasks={**device.open_tasks, entry.name: params})

        self.logger.debug(f"task {entry.name} delivered to {device_name}")
        return Assignment(task_name=entry.name, execute_function=entry.spec.execute_function,
                          task_kind=entry.spec.task_kind, params=params,
                          max_wait_seconds=entry.spec.max_wait_seconds, file_path=entry.spec.file_path)

    def record_result(self, device_name: str, task_name: str, result: TaskResult, now: int) -> TaskStatus:
        """Store the result of a delivered assignment, exactly once per task and device"""
        device = self._require_device(device_name)
        entry = self._require_task(task_name)

        if task_name in device.finished_tasks or device_name in entry.results:
            raise ServerError(ErrorCode.BAD_REQUEST, f"{device_name} already submitted a result for {task_name}")
        if task_name not in device.open_tasks:
            raise ServerError(ErrorCode.TASK_UNKNOWN, f"task {task_name} is not open on {device_name}")
        if result.device_name != device_name:
            raise ServerError(ErrorCode.BAD_REQUEST, "result device name does not match the submitting device")

        open_tasks = {k: v for k, v in device.open_tasks.items() if k != task_name}
        finished_tasks = {**device.finished_tasks, task_name: result}
        self._update_device(device_name, open_tasks=open_tasks, finished_tasks=finished_tasks, last_seen=now)

        if entry.stopped:
            entry.ignored.append(result)
            self.logger.debug(f"late result of {device_name} for stopped task {task_name} ignored")
            return self._status(entry)

        entry.results[device_name] = result

        if entry.is_init and not result.failed:
            self._update_device(device_name, initialized=True)
            self.logger.info(f"device {device_name} initialized")
        elif result.failed:
            self.logger.warning(f"task {task_name} failed on {device_name}: {result.error}")

        self._settle(entry, now)
        return self._status(entry)

    def expire(self, task_name: str, now: int) -> TaskStatus:
        """
        Freeze a running task whose waiting time elapsed: the devices still pending are recorded as missing and
        their assignments cancelled, the results already there stay available
        """
        entry = self._require_task(task_name)
        status = self._status(entry)

        if entry.is_init or status.state not in (TaskState.RUNNING, TaskState.PARTIAL):
            return status
        if now - entry.started_at < entry.spec.max_wait_seconds * 1000:
            return status

        entry.missing = set(status.pending_devices)
        for name in entry.missing:
            device = self._devices[name]
            if task_name in device.open_tasks:
                self._update_device(name, open_tasks={k: v for k, v in device.open_tasks.items() if k != task_name})

        if not entry.results:
            entry.failed = True

        self.logger.warning(f"task {task_name} expired, missing devices: {sorted(entry.missing)}")
        self._settle(entry, now)
        return self._status(entry)

    def expire_overdue(self, now: int) -> list[str]:
        """Expire every running task whose waiting time elapsed, return their names"""
        expired = []
        for task_name in list(self._running):
            before = self._status(self._tasks[task_name]).state
            if self.expire(task_name, now).state != before:
                expired.append(task_name)
        return expired

    def stop_task(self, task_name: str, now: int) -> bool:
        """
        Stop a queued or running task. Undelivered assignments are cancelled, results of delivered ones are still
        accepted but ignored
        """
        entry = self._require_task(task_name)

        if entry.is_init or self._status(entry).state.is_terminal:
            return False

        if entry.queued:
            self._queue.remove(task_name)
            entry.queued = False

        entry.stopped = True
        self.logger.warning(f"task {task_name} stopped")
        self._settle(entry, now)
        return True

    def get_task_status(self, task_name: str) -> TaskStatus:
        return self._status(self._require_task(task_name))

    def get_job_results(self, task_name: str, amount: int) -> list[TaskResult]:
        entry = self._require_task(task_name)
        if amount < 0:
            raise ServerError(ErrorCode.BAD_REQUEST, "amount must not be negative")
        return list(entry.results.values())[:amount]

    def _require_task(self, task_name: str) -> _TaskEntry:
        entry = self._tasks.get(task_name)
        if entry is None:
            raise ServerError(ErrorCode.TASK_UNKNOWN, f"task {task_name} does not exist")
        return entry

    def _status(self, entry: _TaskEntry) -> TaskStatus:
        finished = frozenset(entry.results)

        if entry.is_init:
            pending = frozenset(name for name in self._devices if name not in finished)
        else:
            pending = frozenset(entry.spec.per_device_params) - finished - entry.missing

        state = classify_status(finished, pending, stopped=entry.stopped, failed=entry.failed, queued=entry.queued)
        return TaskStatus(task_name=entry.name, task_kind=entry.spec.task_kind, state=state,
                          finished_devices=finished, pending_devices=pending,
                          missing_devices=frozenset(entry.missing))

    def _settle(self, entry: _TaskEntry, now: int) -> None:
        """Release the capacity held by a task which reached a terminal state"""
        if entry.is_init:
            return

        if entry.name in self._running and self._status(entry).state.is_terminal:
            self._running.remove(entry.name)
            if not entry.stopped:
                self.logger.success(f"task {entry.name} finished")
            self._promote(now)

    def _promote(self, now: int) -> None:
        while self._queue and len(self._running) < self.capacity:
            task_name = self._queue.popleft()
            entry = self._tasks[task_name]
            entry.queued = False
            entry.started_at = now
            self._running.append(task_name)
            self.logger.debug(f"task {task_name} running")
