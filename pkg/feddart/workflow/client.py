"""
This module contains the test mode transport: a DART-Server simulated in-process. The simulated server is the real
server state machine behind its command owner, the devices of the device file are in-process workers executing their
tasks one after the other on a single background thread.
"""

from concurrent.futures import Future, ThreadPoolExecutor
from pathlib import Path
from threading import Lock
from typing import Any, Optional

from ..config import DeviceFile
from ..core.models import Assignment, DeviceSummary, TaskResult, TaskSpec, TaskStatus
from ..logger import LoggingManager
from ..protocol.client import DartClient, WorkerTransport
from ..server.owner import Clock, StateOwner
from ..server.state import ServerState
from ..worker.core import Worker
from ..worker.models import WorkerConfig
from ..worker.registry import FunctionRegistry

LOCAL_ADDRESS = "127.0.0.1"


class LocalWorkerTransport(WorkerTransport):
    """Worker side of the protocol, calling the state owner directly"""

    def __init__(self, owner: StateOwner) -> None:
        self.owner = owner

    def register_device(self, name: str, hardware_config: Optional[dict[str, Any]] = None, port: int = 0,
                        poll_interval_seconds: float = 1.0) -> bool:
        return self.owner.register_device(name, hardware_config, LOCAL_ADDRESS, port, poll_interval_seconds)

    def poll_assignment(self, device_name: str, wait_seconds: float) -> Optional[Assignment]:
        return self.owner.poll(device_name, wait_seconds)

    def submit_result(self, device_name: str, task_name: str, result: TaskResult) -> bool:
        self.owner.record_result(device_name, task_name, result)
        return True


class LocalDartClient(DartClient):
    """
    Test mode implementation of the workflow side transport. Every accepted task triggers a drain of the simulated
    devices on the background thread: the devices are visited in the order of the device file, each one executing at
    most one assignment per pass, until a whole pass finds nothing to do. The caller is never blocked by a task.
    """

    def __init__(self, device_file: DeviceFile, registry: Optional[FunctionRegistry] = None, seed: int = 0,
                 output_dir: str | Path = "./output", capacity: int = 4, clock: Optional[Clock] = None) -> None:
        self.logger = LoggingManager.get_logger("local-server", app="Test Mode")
        self._registry = registry
        self._seed = seed
        self._output_dir = Path(output_dir)

        self.owner = StateOwner(ServerState(capacity=capacity), clock=clock)
        self.owner.start()
        self.transport = LocalWorkerTransport(self.owner)

        self._executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix="test-mode")
        self._workers: dict[str, Worker] = {}
        self._mu = Lock()
        self._drain: Optional[Future] = None
        self._drain_queued = False

        for name, entry in device_file.root.items():
            self.add_device(name, entry.hardware_config, entry.port)

    @property
    def device_names(self) -> list[str]:
        with self._mu:
            return list(self._workers)

    def add_device(self, name: str, hardware_config: Optional[dict[str, Any]] = None, port: int = 0) -> Worker:
        """
        Simulate a device joining the run, it receives the init task with the next drain

        :param name: Device name
        :param hardware_config: Hardware description of the device
        :param port: Port announced at registration
        :return: The simulated worker
        """
        config = WorkerConfig(server_url="local", key="", device_name=name, hardware_config=hardware_config,
                              output_dir=self._output_dir / name, seed=self._seed, port=port)
        worker = Worker(config, transport=self.transport, registry=self._registry)
        worker.register()

        with self._mu:
            self._workers[name] = worker
        self.logger.debug(f"simulated device {name} registered")
        self._schedule_drain()
        return worker

    def detach_device(self, name: str) -> None:
        """Simulate a device leaving: it stops polling and its open tasks run into their timeout"""
        with self._mu:
            self._workers.pop(name, None)
        self.logger.warning(f"simulated device {name} detached")

    def _schedule_drain(self) -> Optional[Future]:
        with self._mu:
            if self._drain_queued:
                return self._drain
            try:
                self._drain = self._executor.submit(self._run_drain)
            except RuntimeError:
                # executor already shut down
                return None
            self._drain_queued = True
            return self._drain

    def _run_drain(self) -> None:
        with self._mu:
            self._drain_queued = False

        busy = True
        while busy:
            busy = False
            for worker in list(self._workers.values()):
                if worker.device_name not in self._workers:
                    continue
                if worker.run_once(0.0) is not None:
                    busy = True

    def wait_idle(self) -> None:
        """Block until the drains submitted so far are done"""
        future = self._schedule_drain()
        if future is not None:
            future.result()

    def add_tasks(self, job_name: str, spec: TaskSpec) -> bool:
        self.owner.enqueue(spec)
        self._schedule_drain()
        return True

    def get_job_results(self, job_name: str, amount: int) -> list[TaskResult]:
        return self.owner.get_job_results(job_name, amount)

    def get_task_status(self, job_name: str) -> TaskStatus:
        status = self.owner.get_task_status(job_name)
        if not status.state.is_terminal:
            # a task promoted by an expiry needs a drain as well
            self._schedule_drain()
        return status

    def stop_task(self, job_name: str) -> bool:
        return self.owner.stop_task(job_name)

    def list_devices(self) -> list[DeviceSummary]:
        # simulated devices only poll while draining, their heartbeat is their presence
        attached = set(self.device_names)
        return [d.model_copy(update={"connected": d.name in attached}) for d in self.owner.list_devices()]

    def close(self) -> None:
        self._executor.shutdown(wait=True, cancel_futures=True)
        self.owner.stop()
        self.logger.debug("simulated server stopped")
