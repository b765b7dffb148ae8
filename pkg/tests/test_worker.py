import json
import threading
import time
from typing import Any, Optional

import numpy as np
import pytest

from feddart.core.enums import TaskKind
from feddart.core.models import Assignment, TaskResult
from feddart.errors import ServerError, TransportError, WorkerError
from feddart.protocol.client import WorkerTransport
from feddart.protocol.enums import ErrorCode, TransportErrorCodes
from feddart.worker.core import Worker
from feddart.worker.data import CsvDataImporter, SyntheticDataImporter, build_importer
from feddart.worker.enums import DataKind, WorkerErrorCodes, WorkerState
from feddart.worker.models import DataSpec, WorkerConfig
from feddart.worker.registry import FunctionRegistry, feddart, load_registry


class ScriptedTransport(WorkerTransport):
    """Plays back assignments and failures"""

    def __init__(self, assignments: Optional[list[Any]] = None, submit_failures: int = 0,
                 register_failures: int = 0) -> None:
        self.assignments = list(assignments or [])
        self.submit_failures = submit_failures
        self.register_failures = register_failures
        self.registrations = 0
        self.submitted: list[tuple[str, TaskResult]] = []

    def register_device(self, name, hardware_config=None, port=0, poll_interval_seconds=1.0) -> bool:
        if self.register_failures:
            self.register_failures -= 1
            raise TransportError(TransportErrorCodes.UNREACHABLE, "connection refused")
        self.registrations += 1
        return True

    def poll_assignment(self, device_name, wait_seconds) -> Optional[Assignment]:
        if not self.assignments:
            time.sleep(min(wait_seconds, 0.01))
            return None
        item = self.assignments.pop(0)
        if isinstance(item, Exception):
            raise item
        return item

    def submit_result(self, device_name, task_name, result) -> bool:
        if self.submit_failures:
            self.submit_failures -= 1
            raise TransportError(TransportErrorCodes.UNREACHABLE, "connection reset")
        self.submitted.append((task_name, result))
        return True


def assignment(task_name: str, function: str, **params: Any) -> Assignment:
    return Assignment(task_name=task_name, execute_function=function, task_kind=TaskKind.DEFAULT, params=params,
                      max_wait_seconds=60.0)


@pytest.fixture
def no_backoff(monkeypatch):
    monkeypatch.setattr("feddart.worker.core.INITIAL_BACKOFF_SECONDS", 0.0)


@pytest.fixture
def config(tmp_path) -> WorkerConfig:
    return WorkerConfig(server_url="http://127.0.0.1:7777", key="k", device_name="client1", output_dir=tmp_path / "out",
                        poll_interval_seconds=0.01,
                        data=DataSpec(n_samples=20, n_features=2, true_weights=[1.0, -2.0, 0.5], noise=0.1, seed=3))


def make_worker(config: WorkerConfig, transport: Optional[WorkerTransport] = None,
                registry: Optional[FunctionRegistry] = None) -> Worker:
    return Worker(config, transport or ScriptedTransport(), registry)


def test_execute_times_the_function(config):
    worker = make_worker(config)
    result = worker.execute(lambda ctx, x: {"double": 2 * x, "device": ctx.device_name}, {"x": 21})

    assert not result.failed
    assert result.result_dict == {"double": 42, "device": "client1"}
    assert result.duration_seconds >= 0


def test_execute_turns_exceptions_into_failed_results(config):
    worker = make_worker(config)

    def boom(ctx):
        raise ValueError("boom")

    result = worker.execute(boom, {})
    assert result.failed
    assert result.error == "ValueError: boom"

    assert worker.execute(lambda ctx: [1, 2], {}).error.startswith("TypeError")


def test_unknown_function_fails_the_task_and_is_logged(config):
    worker = make_worker(config, registry=FunctionRegistry())

    result = worker.handle(assignment("t1", "missing"))

    assert result.failed
    assert "no task function named missing" in result.error
    assert "no task function named missing" in (config.output_dir / "t1.log").read_text(encoding="utf-8")


def test_builtin_functions(config):
    worker = make_worker(config)

    init = worker.handle(assignment("init", "init", model_type="linear"))
    assert init.result_dict == {"initialized": True, "n_parameters": 3, "n_samples": 20}

    learn = worker.handle(assignment("t1", "learn", global_model_parameters={"values": [0.0, 0.0, 0.0]},
                                     task_parameters={"round": 0, "seed": 1, "epochs": 100, "learning_rate": 0.2}))
    assert not learn.failed
    assert learn.result_dict["sample_count"] == 20
    np.testing.assert_allclose(learn.result_dict["parameters"]["values"], [1.0, -2.0, 0.5], atol=0.2)

    saved = json.loads((config.output_dir / "params_round_0.json").read_text(encoding="utf-8"))
    assert saved["values"] == learn.result_dict["parameters"]["values"]

    evaluation = worker.handle(assignment("eval", "evaluate"))
    assert evaluation.result_dict["loss"] == pytest.approx(learn.result_dict["loss"])
    assert evaluation.result_dict["train_n_samples"] == 20


def test_learn_without_epochs_returns_the_global_parameters(config):
    worker = make_worker(config)
    worker.handle(assignment("init", "init", model_type="linear"))

    result = worker.handle(assignment("t1", "learn", global_model_parameters={"values": [0.5, -0.5, 2.0]},
                                      task_parameters={"local_epochs": 0}))

    assert result.result_dict["parameters"]["values"] == [0.5, -0.5, 2.0]
    assert result.result_dict["sample_count"] == 20


def test_learn_is_reproducible(config, tmp_path):
    results = []
    for i in range(2):
        worker = make_worker(config.model_copy(update={"output_dir": tmp_path / f"w{i}"}))
        worker.handle(assignment("init", "init", model_type="linear"))
        results.append(worker.handle(assignment("t1", "learn", global_model_parameters={"values": [0.0] * 3},
                                                task_parameters={"round": 2, "seed": 7, "batch_size": 4})))

    assert results[0].result_dict == results[1].result_dict


def test_init_data_replaces_the_configured_data(config):
    worker = make_worker(config)

    result = worker.handle(assignment("init", "init", model_type="logistic",
                                      data={"n_samples": 8, "n_features": 4, "task": "logistic"}))

    assert result.result_dict == {"initialized": True, "n_parameters": 5, "n_samples": 8}


def test_learn_before_init_fails(config):
    result = make_worker(config).handle(assignment("t1", "learn", global_model_parameters={"values": [0.0] * 3}))

    assert result.failed
    assert "init never ran" in result.error


def test_submit_retries_transport_failures(config, no_backoff):
    transport = ScriptedTransport(submit_failures=2)
    worker = make_worker(config, transport)

    assert worker.submit(assignment("t1", "learn"), TaskResult(device_name="client1"))
    assert len(transport.submitted) == 1

    transport.submit_failures = 3
    assert not worker.submit(assignment("t2", "learn"), TaskResult(device_name="client1"))


def test_submit_gives_up_on_refusal(config):
    class Refusing(ScriptedTransport):
        def submit_result(self, device_name, task_name, result):
            raise ServerError(ErrorCode.TASK_UNKNOWN, "expired")

    assert not make_worker(config, Refusing()).submit(assignment("t1", "learn"), TaskResult(device_name="client1"))


def test_run_once(config):
    registry = FunctionRegistry()
    registry.register(lambda ctx, x: {"x": x}, name="echo")
    transport = ScriptedTransport([assignment("t1", "echo", x=3)])
    worker = make_worker(config, transport, registry)

    assert worker.run_once().result_dict == {"x": 3}
    assert transport.submitted[0][0] == "t1"
    assert worker.run_once() is None


def _wait_for(predicate, timeout: float = 5.0) -> None:
    deadline = time.monotonic() + timeout
    while not predicate():
        assert time.monotonic() < deadline, "condition not reached in time"
        time.sleep(0.01)


def test_run_loop_survives_failures_until_shutdown(config, no_backoff):
    registry = FunctionRegistry()
    registry.register(lambda ctx: {"ok": True}, name="work")
    transport = ScriptedTransport(
        [TransportError(TransportErrorCodes.UNREACHABLE, "down"),
         ServerError(ErrorCode.DEVICE_UNKNOWN, "forgotten"),
         assignment("t1", "work")],
        register_failures=1)
    worker = make_worker(config, transport, registry)

    codes = []
    thread = threading.Thread(target=lambda: codes.append(worker.run_loop()))
    thread.start()
    try:
        _wait_for(lambda: transport.submitted)
        assert worker.state == WorkerState.RUNNING
        assert worker.run_loop() == WorkerErrorCodes.CANCELLED
    finally:
        worker.shutdown()
        thread.join(timeout=5)

    assert codes == [WorkerErrorCodes.OK]
    assert worker.state == WorkerState.STOPPED
    assert transport.registrations == 2


def run_in_thread(worker: Worker) -> WorkerErrorCodes:
    codes = []
    thread = threading.Thread(target=lambda: codes.append(worker.run_loop()))
    thread.start()
    thread.join(timeout=5)
    assert not thread.is_alive(), "the worker kept running"
    return codes[0]


def test_run_loop_stops_when_the_server_refuses(config, no_backoff):
    class Unauthorized(ScriptedTransport):
        def register_device(self, name, hardware_config=None, port=0, poll_interval_seconds=1.0) -> bool:
            raise ServerError(ErrorCode.UNAUTHORIZED, "missing or invalid client key")

    worker = make_worker(config, Unauthorized())
    assert run_in_thread(worker) == WorkerErrorCodes.REFUSED
    assert worker.state == WorkerState.STOPPED

    transport = ScriptedTransport([TransportError(TransportErrorCodes.UNREACHABLE, "down"),
                                   ServerError(ErrorCode.UNAUTHORIZED, "key changed")])
    worker = make_worker(config, transport)
    assert run_in_thread(worker) == WorkerErrorCodes.REFUSED
    assert worker.state == WorkerState.STOPPED
    assert transport.registrations == 1


def test_feddart_decorator():
    registry = FunctionRegistry()

    @feddart(registry=registry)
    def train(ctx):
        return {}

    @feddart(name="score", registry=registry)
    def evaluate(ctx):
        return {}

    assert registry.names == ["score", "train"]
    assert registry.get("train") is train
    registry.register(train)

    with pytest.raises(ValueError):
        registry.register(evaluate, name="train")
    with pytest.raises(WorkerError) as exc:
        registry.get("nothing")
    assert exc.value.code == WorkerErrorCodes.UNKNOWN_FUNCTION


def test_load_registry():
    registry = load_registry("feddart.worker.functions")
    assert {"init", "learn", "evaluate"} <= set(registry.names)

    with pytest.raises(WorkerError) as exc:
        load_registry("feddart.no_such_module")
    assert exc.value.code == WorkerErrorCodes.REGISTRY_NOT_FOUND


def test_synthetic_data_is_reproducible():
    spec = DataSpec(n_samples=30, n_features=3, true_weights=[1.0, 2.0, 3.0], noise=0.5, seed=11)
    first, second = SyntheticDataImporter(spec).prepare(), SyntheticDataImporter(spec).prepare()

    np.testing.assert_array_equal(first.x_train, second.x_train)
    np.testing.assert_array_equal(first.y_train, second.y_train)
    assert first.n_features == 3


def test_synthetic_true_weights_length_is_checked():
    with pytest.raises(WorkerError) as exc:
        SyntheticDataImporter(DataSpec(n_features=2, true_weights=[1.0])).prepare()
    assert exc.value.code == WorkerErrorCodes.BAD_DATA


def test_logistic_labels_are_binary():
    importer = build_importer(DataSpec(n_samples=50, n_features=2, task="logistic", true_weights=[3.0, -3.0]))
    assert set(np.unique(importer.prepare().y_train)) <= {0.0, 1.0}


def test_csv_importer(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,b,y\n1,2,10\n3,4,20\n5,6,30\n7,8,40\n", encoding="utf-8")

    importer = build_importer(DataSpec(kind=DataKind.CSV, path=path, test_fraction=0.25))
    assert isinstance(importer, CsvDataImporter)
    importer.prepare()

    np.testing.assert_array_equal(importer.x_train, [[1, 2], [3, 4], [5, 6]])
    np.testing.assert_array_equal(importer.y_test, [40])

    standardized = build_importer(DataSpec(kind=DataKind.CSV, path=path, target_column=0, standardize=True)).prepare()
    np.testing.assert_allclose(standardized.x_train.mean(axis=0), [0.0, 0.0], atol=1e-12)

    with pytest.raises(WorkerError):
        build_importer(DataSpec(kind=DataKind.CSV, path=tmp_path / "absent.csv")).prepare()
