"""
This module contains the single owner of the server state. Request handlers never touch `ServerState` directly: they
submit commands to the owner thread and wait for the outcome, which serializes every mutation into one stream. The
stream is written to the journal and, when asked for, kept in memory as a history of commands and outcomes.
"""

import queue
import threading
import time
from concurrent.futures import Future
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Optional, Protocol

from ..core.clock import SystemClock
from ..core.models import Assignment, DeviceSummary, Handle, TaskResult, TaskSpec, TaskStatus
from ..errors import FedDartError
from ..logger import LoggingManager
from .enums import OwnerState, ServerErrorCodes
from .models import Command
from .state import ServerState


class Clock(Protocol):
    def now_ms(self) -> int: ...


@dataclass
class _Pending:
    op: str
    args: dict[str, Any]
    future: Future
    invoked_ns: int


@dataclass(frozen=True)
class HistoryEntry:
    """One executed command, the timestamps are `time.perf_counter_ns` values"""
    index: int
    command: Command
    outcome: Any
    error: Optional[FedDartError]
    invoked_ns: int
    completed_ns: int


class StateOwner:
    """
    Thread serializing the commands applied to a `ServerState`. Overdue tasks are expired on every tick.
    """

    def __init__(self, state: ServerState, clock: Optional[Clock] = None, journal_path: Optional[str | Path] = None,
                 record_history: bool = False, tick_seconds: float = 0.05) -> None:
        self.logger = LoggingManager.get_logger("state-owner", app="DART Server")
        self.state = state
        self.clock = clock or SystemClock()
        self._journal_path = Path(journal_path) if journal_path is not None else None
        self._journal: Optional[IO[str]] = None
        self._record_history = record_history
        self._tick = tick_seconds

        self._inbox: queue.Queue[Optional[_Pending]] = queue.Queue()
        self._thread: Optional[threading.Thread] = None
        self._owner_state = OwnerState.STOPPED

        self._history: list[HistoryEntry] = []
        self._generation = 0
        self._changed = threading.Condition()

    @property
    def owner_state(self) -> OwnerState:
        return self._owner_state

    @property
    def history(self) -> list[HistoryEntry]:
        return list(self._history)

    def start(self) -> ServerErrorCodes:
        """
        Start the owner thread

        :return: Server error code
        """
        if self._owner_state == OwnerState.RUNNING:
            return ServerErrorCodes.CANCELLED

        if self._journal_path is not None:
            try:
                self._journal_path.parent.mkdir(parents=True, exist_ok=True)
                # pylint: disable=consider-using-with
                self._journal = open(self._journal_path, "a", encoding="utf-8")
            except OSError as exc:
                self._owner_state = OwnerState.ERROR
                self.logger.error(f"journal {self._journal_path} not writable: {exc}")
                return ServerErrorCodes.JOURNAL_UNREADABLE

        self._thread = threading.Thread(name="state-owner", target=self._run, daemon=True)
        self._owner_state = OwnerState.RUNNING
        self._thread.start()
        self.logger.debug("state owner started")
        return ServerErrorCodes.OK

    def stop(self) -> ServerErrorCodes:
        """
        Stop the owner thread once the commands already submitted ran

        :return: Server error code
        """
        if self._owner_state != OwnerState.RUNNING:
            return ServerErrorCodes.CANCELLED

        self._inbox.put(None)
        self._thread.join()
        self._thread = None

        if self._journal is not None:
            self._journal.close()
            self._journal = None

        self._owner_state = OwnerState.STOPPED
        with self._changed:
            self._changed.notify_all()
        self.logger.debug("state owner stopped")
        return ServerErrorCodes.OK

    def submit(self, op: str, **args: Any) -> Any:
        """
        Execute a command on the owner thread and wait for its outcome

        :param op: Name of the `ServerState` operation
        :param args: Arguments in their JSON form
        :return: The result of the operation, its error is raised
        """
        if self._owner_state != OwnerState.RUNNING:
            raise RuntimeError("the state owner is not running")

        future: Future = Future()
        self._inbox.put(_Pending(op, args, future, time.perf_counter_ns()))
        return future.result()

    # typed helpers used by the request handlers and the in-process client

    def register_device(self, name: str, hardware_config: Optional[dict[str, Any]] = None, ip_address: str = "",
                        port: int = 0, poll_interval_seconds: float = 1.0) -> bool:
        return self.submit("register_device", name=name, hardware_config=hardware_config, ip_address=ip_address,
                           port=port, poll_interval_seconds=poll_interval_seconds)

    def enqueue(self, spec: TaskSpec) -> Handle:
        return self.submit("enqueue", spec=spec.model_dump(mode="json"))

    def dispatch(self, device_name: str) -> Optional[Assignment]:
        return self.submit("dispatch", device_name=device_name)

    def record_result(self, device_name: str, task_name: str, result: TaskResult) -> TaskStatus:
        return self.submit("record_result", device_name=device_name, task_name=task_name,
                           result=result.model_dump(mode="json"))

    def stop_task(self, task_name: str) -> bool:
        return self.submit("stop_task", task_name=task_name)

    def get_task_status(self, task_name: str) -> TaskStatus:
        return self.submit("get_task_status", task_name=task_name)

    def get_job_results(self, task_name: str, amount: int) -> list[TaskResult]:
        return self.submit("get_job_results", task_name=task_name, amount=amount)

    def list_devices(self) -> list[DeviceSummary]:
        return self.submit("list_devices")

    def expire_overdue(self) -> list[str]:
        return self.submit("expire_overdue")

    def poll(self, device_name: str, wait_seconds: float) -> Optional[Assignment]:
        """
        Long-poll the next assignment of a device, waiting at most `wait_seconds` for the state to change

        :param device_name: Polling device
        :param wait_seconds: Maximal waiting time
        :return: The assignment, None if nothing came up in time
        """
        deadline = time.monotonic() + wait_seconds

        while self._owner_state == OwnerState.RUNNING:
            generation = self._generation
            assignment = self.dispatch(device_name)
            remaining = deadline - time.monotonic()

            if assignment is not None or remaining <= 0:
                return assignment

            with self._changed:
                self._changed.wait_for(
                    lambda: self._generation != generation or self._owner_state != OwnerState.RUNNING,
                    timeout=remaining)
        return None

    # -----------------------------------------------------------------------------------------------------------------

    def _run(self) -> None:
        last_tick = time.monotonic()

        while True:
            try:
                pending = self._inbox.get(timeout=self._tick)
            except queue.Empty:
                pending = False

            if pending is None:
                break

            if pending:
                self._execute(pending)

            if time.monotonic() - last_tick >= self._tick:
                last_tick = time.monotonic()
                self._execute(_Pending("expire_overdue", {}, Future(), time.perf_counter_ns()))

    def _execute(self, pending: _Pending) -> None:
        command = Command(op=pending.op, args=pending.args, at=self.clock.now_ms())
        outcome, error = None, None

        try:
            outcome = self.state.apply(command)
        except FedDartError as exc:
            error = exc
        except Exception as exc:  # pylint: disable=broad-exception-caught
            self.logger.exception(f"command {command.op} crashed")
            pending.future.set_exception(exc)
            return

        if error is None and self._changes_state(command, outcome):
            self._write_journal(command)
            with self._changed:
                self._generation += 1
                self._changed.notify_all()

        if self._record_history and (command.op != "expire_overdue" or outcome):
            self._history.append(HistoryEntry(index=len(self._history), command=command, outcome=outcome,
                                              error=error, invoked_ns=pending.invoked_ns,
                                              completed_ns=time.perf_counter_ns()))

        if error is not None:
            pending.future.set_exception(error)
        else:
            pending.future.set_result(outcome)

    @staticmethod
    def _changes_state(command: Command, outcome: Any) -> bool:
        match command.op:
            case "dispatch" | "expire_overdue":
                return bool(outcome)
            case _:
                return command.mutating

    def _write_journal(self, command: Command) -> None:
        if self._journal is None:
            return
        self._journal.write(command.model_dump_json() + "\n")
        self._journal.flush()

