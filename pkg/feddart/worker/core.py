"""
This module contains the DART-Client: a worker registering a device on the server, polling its assignments, executing
them one at a time with the registered task functions and submitting the results.
"""

import signal
import threading
import time
from typing import Any, Callable, Optional

from ..core.models import Assignment, TaskResult
from ..errors import ServerError, TransportError, WorkerError
from ..logger import LoggingManager
from ..protocol.client import WorkerClient, WorkerTransport
from ..protocol.enums import ErrorCode
from .data import build_importer
from .enums import WorkerErrorCodes, WorkerState
from .models import WorkerConfig
from .registry import FunctionRegistry, TaskContext, TaskFunction, load_registry

SUBMIT_ATTEMPTS = 3
INITIAL_BACKOFF_SECONDS = 0.5
MAX_BACKOFF_SECONDS = 30.0


class Worker:
    """
    A worker holds at most one assignment at a time. Transport failures are retried, a failing task function
    produces a failed result and never stops the loop.
    """

    def __init__(self, config: WorkerConfig, transport: Optional[WorkerTransport] = None,
                 registry: Optional[FunctionRegistry] = None) -> None:
        self.config = config
        self.logger = LoggingManager.get_logger(f"worker-{config.device_name}", app=f"Client {config.device_name}")
        self.transport = transport or WorkerClient(config.server_url, config.key, config.request_timeout_seconds)
        self.registry = registry if registry is not None else load_registry(config.function_registry_ref)

        self.context = TaskContext(device_name=config.device_name, output_dir=config.output_dir, seed=config.seed,
                                   logger=self.logger,
                                   importer=build_importer(config.data) if config.data is not None else None)

        self._state = WorkerState.STOPPED
        self._stop_event = threading.Event()

    @property
    def device_name(self) -> str:
        return self.config.device_name

    @property
    def state(self) -> WorkerState:
        return self._state

    def execute(self, fn: TaskFunction, params: dict[str, Any]) -> TaskResult:
        """
        Run a task function and time it

        :param fn: Task function
        :param params: Parameters of the assignment
        :return: The result, a failed one when the function raised
        """
        start = time.perf_counter()
        try:
            output = fn(self.context, **params)
            if not isinstance(output, dict):
                raise TypeError(f"task function returned {type(output).__name__}, expected a dict")
        except Exception as exc:  # pylint: disable=broad-exception-caught
            duration = time.perf_counter() - start
            self.context.logger.error(f"task function {getattr(fn, '__name__', fn)} raised {exc!r}")
            return TaskResult.failure(self.device_name, duration, f"{type(exc).__name__}: {exc}")

        return TaskResult(device_name=self.device_name, duration_seconds=time.perf_counter() - start,
                          result_dict=output)

    def handle(self, assignment: Assignment) -> TaskResult:
        """
        Execute an assignment while logging it to `<output_dir>/<task_name>.log`

        :param assignment: Assignment delivered by the server
        :return: The result to submit
        """
        log_path = self.config.output_dir / f"{assignment.task_name}.log"

        with LoggingManager.task_log(log_path, assignment.task_name, self.device_name, base=self.logger) as log:
            self.context.logger = log
            log.info(f"executing {assignment.execute_function} for {assignment.task_name}")

            try:
                fn = self.registry.get(assignment.execute_function)
            except WorkerError as exc:
                log.error(exc.message)
                result = TaskResult.failure(self.device_name, 0.0, exc.message)
            else:
                result = self.execute(fn, assignment.params)

            if result.failed:
                log.warning(f"{assignment.task_name} failed after {result.duration_seconds:.3f}s")
            else:
                log.success(f"{assignment.task_name} done in {result.duration_seconds:.3f}s")

        self.context.logger = self.logger
        return result

    def submit(self, assignment: Assignment, result: TaskResult) -> bool:
        """
        Deliver a result, transport failures are retried with backoff and the result is dropped afterwards

        :return: True when the server recorded the result
        """
        for attempt in range(SUBMIT_ATTEMPTS):
            try:
                return self.transport.submit_result(self.device_name, assignment.task_name, result)
            except TransportError as exc:
                self.logger.warning(f"submit of {assignment.task_name} failed ({exc.message}), attempt {attempt + 1}")
                self._stop_event.wait(INITIAL_BACKOFF_SECONDS * 2 ** attempt)
            except ServerError as exc:
                self.logger.warning(f"server refused the result of {assignment.task_name}: {exc}")
                return False

        self.logger.error(f"result of {assignment.task_name} dropped")
        return False

    def register(self) -> bool:
        return self.transport.register_device(self.device_name, self.config.hardware_config, self.config.port,
                                              self.config.poll_interval_seconds)

    def run_once(self, wait_seconds: float = 0.0) -> Optional[TaskResult]:
        """
        Poll a single assignment, execute and submit it

        :param wait_seconds: Long-poll duration
        :return: The result, None if there was nothing to do
        """
        assignment = self.transport.poll_assignment(self.device_name, wait_seconds)
        if assignment is None:
            return None

        result = self.handle(assignment)
        self.submit(assignment, result)
        return result

    def shutdown(self) -> None:
        """Ask the loop to exit once the current assignment is done"""
        if self._state == WorkerState.RUNNING:
            self._state = WorkerState.STOPPING
        self._stop_event.set()

    def _with_backoff(self, action: Callable[[], Any], what: str) -> bool:
        delay = INITIAL_BACKOFF_SECONDS
        while not self._stop_event.is_set():
            try:
                action()
                return True
            except TransportError as exc:
                self.logger.warning(f"{what} failed ({exc.message}), retrying in {delay:.1f}s")
                self._stop_event.wait(delay)
                delay = min(delay * 2, MAX_BACKOFF_SECONDS)
        return False

    def _install_signal_handlers(self) -> None:
        if threading.current_thread() is not threading.main_thread():
            return
        for sig in (signal.SIGINT, signal.SIGTERM):
            signal.signal(sig, lambda *_: self.shutdown())

    def run_loop(self) -> WorkerErrorCodes:
        """
        Register, then poll, execute and submit until `shutdown` is called or a signal arrives

        :return: Worker error code
        """
        if self._state != WorkerState.STOPPED:
            return WorkerErrorCodes.CANCELLED

        self._install_signal_handlers()
        self._stop_event.clear()
        self._state = WorkerState.RUNNING
        self.logger.info(f"connecting to {self.config.server_url}")

        code = WorkerErrorCodes.OK
        try:
            if self._with_backoff(self.register, "registration"):
                self.logger.success("registered")
            self._poll_until_stopped()
        except ServerError as exc:
            self.logger.error(f"the server refused this worker: {exc}")
            code = WorkerErrorCodes.REFUSED

        self._state = WorkerState.STOPPED
        self.logger.warning("stopped")
        return code

    def _poll_until_stopped(self) -> None:
        delay = INITIAL_BACKOFF_SECONDS
        while not self._stop_event.is_set():
            try:
                self.run_once(self.config.poll_interval_seconds)
                delay = INITIAL_BACKOFF_SECONDS
            except ServerError as exc:
                if exc.code != ErrorCode.DEVICE_UNKNOWN:
                    raise
                self.logger.warning("the server forgot this device, registering again")
                self._with_backoff(self.register, "registration")
            except TransportError as exc:
                self.logger.warning(f"poll failed ({exc.message}), retrying in {delay:.1f}s")
                self._stop_event.wait(delay)
                delay = min(delay * 2, MAX_BACKOFF_SECONDS)
