import socket
import threading
import time
from contextlib import contextmanager

import pytest

from feddart.core.enums import TaskState
from feddart.fact.enums import AggregationAlgorithm
from feddart.fact.models import Hyperparameters, LinearModel, ModelConfig
from feddart.fact.server import Server
from feddart.fact.stopping import FixedRoundFLStoppingCriterion
from feddart.protocol.client import HttpDartClient, WorkerClient
from feddart.server.base import DartServer
from feddart.server.models import ServerConfig
from feddart.worker.core import Worker
from feddart.worker.models import DataSpec, WorkerConfig
from feddart.workflow.manager import WorkflowManager

from conftest import KEY, device_entries, write_json

pytestmark = pytest.mark.slow

NAMES = ["client1", "client2", "client3"]


def free_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def client_data(name: str) -> dict:
    return {"kind": "synthetic", "n_samples": 40, "n_features": 2, "true_weights": [0.5, -1.5, 0.2], "noise": 0.1,
            "seed": NAMES.index(name)}


@contextmanager
def running_server(**settings):
    port = free_port()
    server = DartServer(ServerConfig(server=f"http://127.0.0.1:{port}", client_key=KEY, bind_host="127.0.0.1",
                                     **settings))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()

    deadline = time.monotonic() + 10
    while not server.server.started:
        assert time.monotonic() < deadline, "server did not start"
        time.sleep(0.02)

    try:
        yield server
    finally:
        server.server.should_exit = True
        thread.join(timeout=10)


@pytest.fixture
def dart_server():
    with running_server(max_poll_wait_seconds=1.0) as server:
        yield server


@pytest.fixture
def server_file(tmp_path, dart_server):
    return write_json(tmp_path / "server.json", {"server": dart_server.config.server, "client_key": KEY})


@pytest.fixture
def workers(tmp_path, dart_server):
    running: dict[str, tuple[Worker, threading.Thread]] = {}
    for name in NAMES:
        worker = Worker(WorkerConfig(server_url=dart_server.config.server, key=KEY, device_name=name,
                                     output_dir=tmp_path / name, poll_interval_seconds=0.5,
                                     data=DataSpec.model_validate(client_data(name))))
        thread = threading.Thread(target=worker.run_loop, daemon=True)
        thread.start()
        running[name] = (worker, thread)

    yield running

    for worker, thread in running.values():
        worker.shutdown()
        thread.join(timeout=10)


def model() -> LinearModel:
    return LinearModel(ModelConfig(n_features=2), Hyperparameters(learning_rate=0.3, batch_size=8, local_epochs=2),
                       AggregationAlgorithm.WEIGHTED_FEDAVG)


def train(server_file, device_file, output_dir, test_mode: bool) -> list[float]:
    server = Server(server_file, device_file, test_mode=test_mode, output_dir=output_dir,
                    client_data={name: client_data(name) for name in NAMES}, poll_interval_seconds=0.02, seed=5)
    try:
        server.initialization(model(), FixedRoundFLStoppingCriterion(3))
        return server.training().clusters[0].model.parameters.values
    finally:
        server.shutdown()


def test_distributed_run_matches_the_test_mode(tmp_path, server_file, workers):
    device_file = write_json(tmp_path / "devices.json", device_entries(*NAMES))

    distributed = train(server_file, device_file, tmp_path / "distributed", test_mode=False)
    local = train(server_file, device_file, tmp_path / "local", test_mode=True)

    assert distributed == local


def test_round_completes_without_a_stopped_worker(tmp_path, server_file, workers):
    device_file = write_json(tmp_path / "devices.json", device_entries(*NAMES))

    with WorkflowManager(output_dir=tmp_path / "out", poll_seconds=0.05, init_timeout_seconds=30) as manager:
        manager.create_init_task({"model_type": "linear"})
        manager.start_fed_dart(server_file, device_file)

        worker, thread = workers["client2"]
        worker.shutdown()
        thread.join(timeout=10)

        params = {"global_model_parameters": {"values": [0.0, 0.0, 0.0]}}
        handle = manager.start_task({name: params for name in NAMES}, "learn", max_wait_seconds=2.0)

        deadline = time.monotonic() + 20
        while not (status := manager.get_task_status(handle)).state.is_terminal:
            assert time.monotonic() < deadline, f"task still {status.state}"
            time.sleep(0.05)

        assert status.state == TaskState.COMPLETED
        assert status.missing_devices == {"client2"}
        assert sorted(r.device_name for r in manager.get_task_result(handle)) == ["client1", "client3"]
        assert "client2" not in manager.get_all_device_names()


def test_status_requests_are_served_while_polls_are_parked():
    names = [f"device{i}" for i in range(45)]

    with running_server(max_poll_wait_seconds=5.0) as server:
        url = server.config.server
        registration = WorkerClient(url, KEY)
        for name in names:
            registration.register_device(name, poll_interval_seconds=10.0)

        done = threading.Event()

        def park(name: str) -> None:
            client = WorkerClient(url, KEY)
            while not done.is_set():
                client.poll_assignment(name, 5.0)

        pollers = [threading.Thread(target=park, args=(name,), daemon=True) for name in names]
        for poller in pollers:
            poller.start()

        client = HttpDartClient(url, KEY)
        try:
            time.sleep(1.0)
            for _ in range(5):
                started = time.monotonic()
                devices = client.list_devices()
                elapsed = time.monotonic() - started

                assert len(devices) == len(names)
                assert elapsed < 0.5, f"list_devices took {elapsed:.3f} s"
        finally:
            done.set()
            for poller in pollers:
                poller.join(timeout=10)
            client.close()
