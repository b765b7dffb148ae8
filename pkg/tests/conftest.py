import json
from pathlib import Path
from typing import Any

import pytest

from feddart.core.clock import ManualClock
from feddart.core.enums import TaskKind
from feddart.core.models import TaskResult, TaskSpec
from feddart.logger import LoggingManager, LogLevel

KEY = "secret-key"


@pytest.fixture(scope="session", autouse=True)
def quiet_logs():
    LoggingManager(False, LogLevel.ERROR)


def write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def device_entries(*names: str) -> dict[str, dict[str, Any]]:
    return {name: {"ipAdress": "127.0.0.1", "port": 2883 + i, "hardware_config": None}
            for i, name in enumerate(names)}


def default_task(name: str, *devices: str, max_wait: float = 60.0, **params: Any) -> TaskSpec:
    return TaskSpec(task_name=name, execute_function="learn", max_wait_seconds=max_wait,
                    per_device_params={d: dict(params) for d in devices})


def init_task(name: str = "init") -> TaskSpec:
    return TaskSpec(task_name=name, execute_function="init", task_kind=TaskKind.INIT,
                    default_params={"model_type": "linear"})


def ok_result(device: str, **values: Any) -> TaskResult:
    return TaskResult(device_name=device, duration_seconds=0.01, result_dict=values or {"done": True})


@pytest.fixture
def clock() -> ManualClock:
    return ManualClock(start_ms=1_000_000)


@pytest.fixture
def server_file(tmp_path: Path) -> Path:
    return write_json(tmp_path / "server.json", {"server": "https://127.0.0.1:7777", "client_key": KEY})


@pytest.fixture
def device_file(tmp_path: Path) -> Path:
    return write_json(tmp_path / "devices.json", device_entries("client1", "client2"))
