"""
This module contains the WorkflowManager, the user facing API of Fed-DART. A workflow creates its init task, connects
to a DART-Server (or simulates one in test mode) and then starts tasks whose handles are polled for status and results.
None of the task calls waits for the clients.
"""

import itertools
import threading
import time
from pathlib import Path
from typing import Any, Optional

from pydantic import ValidationError
from termcolor import colored

from .._compat import Self
from ..config import load_device_file, load_server_file
from ..core.core import now_ms
from ..core.enums import TaskKind
from ..core.models import Handle, TaskResult, TaskSpec, TaskStatus
from ..errors import ServerError, TaskRejectedError, TransportError, WorkflowError
from ..logger import LoggingManager
from ..protocol.client import DartClient, HttpDartClient
from ..worker.registry import FunctionRegistry
from .aggregator import DEFAULT_FANOUT, DEFAULT_HOLDER_CAPACITY
from .client import LocalDartClient
from .enums import RejectionReason, WorkflowErrorCodes
from .runtime import DartRuntime
from .selector import Selector

INIT_TASK_NAME = "init"
DEFAULT_INIT_TIMEOUT_SECONDS = 120.0


def _print_test_mode_banner() -> None:
    print("")
    print(colored("┏━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━┓", "yellow"))
    print(colored("┃                                                                              ┃", "yellow"))
    print(colored("┃                              !!! WARNING !!!                                 ┃", "yellow"))
    print(colored("┃                                                                              ┃", "yellow"))
    print(colored("┃       You are running this program in TEST MODE.                             ┃", "yellow"))
    print(colored("┃                                                                              ┃", "yellow"))
    print(colored("┃       The DART-Server is simulated and the clients of the device file        ┃", "yellow"))
    print(colored("┃       execute their tasks one after the other on this machine.               ┃", "yellow"))
    print(colored("┃                                                                              ┃", "yellow"))
    print(colored("┗━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━┛", "yellow"))
    print("")


class WorkflowManager:
    """
    Entry point of a Fed-DART workflow. One caller drives it, status and result queries may come from several threads.
    """

    def __init__(self, test_mode: bool = False, init_timeout_seconds: float = DEFAULT_INIT_TIMEOUT_SECONDS,
                 output_dir: str | Path = "./output", seed: int = 0, client: Optional[DartClient] = None,
                 registry: Optional[FunctionRegistry] = None, poll_seconds: float = 0.1,
                 holder_capacity: int = DEFAULT_HOLDER_CAPACITY, fanout: int = DEFAULT_FANOUT) -> None:
        self.logger = LoggingManager.get_logger("workflow-manager", app="Workflow Manager")
        self.test_mode = test_mode
        self.init_timeout_seconds = init_timeout_seconds
        self.output_dir = Path(output_dir)
        self.seed = seed
        self.poll_seconds = poll_seconds

        self._client = client
        self._registry = registry
        self._holder_capacity = holder_capacity
        self._fanout = fanout

        self.runtime: Optional[DartRuntime] = None
        self.selector: Optional[Selector] = None
        self._init_task: Optional[TaskSpec] = None
        self._task_counter = itertools.count()
        self._mu = threading.RLock()

    def __enter__(self) -> Self:
        return self

    def __exit__(self, *_exc) -> None:
        self.close()

    @property
    def connected(self) -> bool:
        return self.selector is not None

    @property
    def client(self) -> Optional[DartClient]:
        return self.runtime.client if self.runtime is not None else None

    def create_init_task(self, parameter_dict: dict[str, Any], execute_function: str = "init",
                         per_device_params: Optional[dict[str, dict[str, Any]]] = None) -> None:
        """
        Store the init task, it runs on every device before any other task. Calling it again replaces the stored
        task.

        :param parameter_dict: Parameters given to every device
        :param execute_function: Task function building the local model
        :param per_device_params: Parameters replacing `parameter_dict` for some devices
        """
        if self.connected:
            raise WorkflowError(WorkflowErrorCodes.ALREADY_CONNECTED, "the init task must be created before connecting")

        self._init_task = TaskSpec(task_name=INIT_TASK_NAME, execute_function=execute_function,
                                   task_kind=TaskKind.INIT, default_params=parameter_dict,
                                   per_device_params=per_device_params or {})
        self.logger.debug(f"init task {execute_function} stored")

    def _build_client(self, server_file: str | Path, device_file: Optional[str | Path]) -> DartClient:
        if self._client is not None:
            return self._client

        config = load_server_file(server_file)

        if self.test_mode:
            if device_file is None:
                raise WorkflowError(WorkflowErrorCodes.CONNECT_FAILED, "the test mode needs a device file")
            return LocalDartClient(load_device_file(device_file), registry=self._registry, seed=self.seed,
                                   output_dir=self.output_dir, capacity=config.capacity)

        return HttpDartClient(config.server, config.client_key)

    def start_fed_dart(self, server_file: str | Path, device_file: Optional[str | Path] = None) -> None:
        """
        Connect to the DART-Server, schedule the init task and wait until the initialization phase is finished

        :param server_file: Server file holding the address and the key of the server
        :param device_file: Devices expected to take part, every registered device when missing
        :raises WorkflowError: ALREADY_CONNECTED, CONNECT_FAILED or INIT_TIMEOUT
        """
        if self.connected:
            raise WorkflowError(WorkflowErrorCodes.ALREADY_CONNECTED, "start_fed_dart was already called")

        if self.test_mode:
            _print_test_mode_banner()

        runtime = DartRuntime(self._build_client(server_file, device_file))
        selector = Selector(runtime, self._holder_capacity, self._fanout)

        try:
            summaries = selector.update_registered_devices()
        except (TransportError, ServerError) as exc:
            runtime.close()
            raise WorkflowError(WorkflowErrorCodes.CONNECT_FAILED, exc.message) from exc

        self.runtime, self.selector = runtime, selector
        self.logger.info(f"connected, {len(summaries)} devices registered")

        if self._init_task is None:
            return

        roster = load_device_file(device_file).names if device_file is not None else [s.name for s in summaries]
        with self._mu:
            selector.schedule_init_task(self._init_task)
        self._wait_for_initialization(roster)

    def _wait_for_initialization(self, roster: list[str]) -> None:
        deadline = time.monotonic() + self.init_timeout_seconds

        while True:
            with self._mu:
                devices = {s.name: s for s in self.selector.update_registered_devices()}
            waiting = [name for name in roster if name not in devices or not devices[name].initialized]

            if not waiting:
                self.logger.success(f"initialization phase finished on {len(roster)} devices")
                return

            if time.monotonic() >= deadline:
                raise WorkflowError(WorkflowErrorCodes.INIT_TIMEOUT, f"not initialized: {', '.join(waiting)}")
            time.sleep(self.poll_seconds)

    def _require_connected(self) -> Selector:
        if self.selector is None:
            raise WorkflowError(WorkflowErrorCodes.NOT_CONNECTED, "call start_fed_dart first")
        return self.selector

    def get_all_device_names(self) -> list[str]:
        """Names of the connected devices, sorted"""
        selector = self._require_connected()
        with self._mu:
            return sorted(s.name for s in selector.update_registered_devices() if s.connected)

    def start_task(self, parameter_dict: dict[str, dict[str, Any]], execute_function: str,
                   max_wait_seconds: float = 60.0, task_name: Optional[str] = None,
                   hardware_requirements: Optional[dict[str, Any]] = None) -> Handle:
        """
        Start a task on the devices named by `parameter_dict`, the handle is returned without waiting for them

        :param parameter_dict: Parameters of the task function per device name
        :param execute_function: Task function run by the devices
        :param max_wait_seconds: Time after which the missing devices are given up
        :param task_name: Unique task name, generated when missing
        :param hardware_requirements: Entries the hardware configuration of every device must contain
        :return: The handle of the task
        :raises TaskRejectedError: The task was not valid
        """
        selector = self._require_connected()
        name = task_name or f"task-{next(self._task_counter)}"

        try:
            spec = TaskSpec(task_name=name, execute_function=execute_function, per_device_params=parameter_dict,
                            max_wait_seconds=max_wait_seconds, hardware_requirements=hardware_requirements)
        except ValidationError as exc:
            raise TaskRejectedError(WorkflowErrorCodes.TASK_REJECTED, RejectionReason.BAD_REQUEST, str(exc)) from exc

        with self._mu:
            rejection = selector.request_task_acceptance(spec)
            if rejection is not None:
                raise TaskRejectedError(WorkflowErrorCodes.TASK_REJECTED, *rejection)
            selector.schedule()

        return Handle(task_name=name, issued_at=now_ms())

    @staticmethod
    def _name(handle: Handle | str) -> str:
        return handle.task_name if isinstance(handle, Handle) else handle

    def get_task_status(self, handle: Handle | str) -> TaskStatus:
        selector = self._require_connected()
        with self._mu:
            return selector.get_task_status(self._name(handle))

    def get_task_result(self, handle: Handle | str) -> list[TaskResult]:
        """Results available now, possibly none"""
        selector = self._require_connected()
        with self._mu:
            return selector.get_task_results(self._name(handle))

    def stop_task(self, handle: Handle | str) -> bool:
        selector = self._require_connected()
        with self._mu:
            return selector.stop_task(self._name(handle))

    def close(self) -> None:
        if self.runtime is not None:
            self.runtime.close()
        self.runtime, self.selector = None, None
