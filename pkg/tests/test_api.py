import pytest
from fastapi.testclient import TestClient

from feddart.core.enums import TaskKind, TaskState
from feddart.errors import ServerError
from feddart.protocol.client import HttpDartClient, WorkerClient
from feddart.protocol.enums import KEY_HEADER, ErrorCode
from feddart.server.base import DartServer
from feddart.server.models import ServerConfig

from conftest import KEY, default_task, init_task, ok_result

BASE_URL = "http://testserver"


@pytest.fixture
def server(clock):
    server = DartServer(ServerConfig(server="http://127.0.0.1:7777", client_key=KEY, max_body_bytes=4096), clock=clock)
    server.start()
    yield server
    server.owner.stop()


@pytest.fixture
def http(server):
    return TestClient(server.api)


@pytest.fixture
def client(http):
    return HttpDartClient(BASE_URL, KEY, session=http)


@pytest.fixture
def worker(http):
    return WorkerClient(BASE_URL, KEY, session=http)


def test_task_round_trip(client, worker):
    assert worker.register_device("client1", {"gpu": False}, port=2883)
    assert worker.register_device("client2")
    assert client.add_tasks("t1", default_task("t1", "client1", "client2", lr=0.5))

    assignment = worker.poll_assignment("client1", 0.0)
    assert assignment.task_name == "t1"
    assert assignment.params == {"lr": 0.5}
    assert worker.poll_assignment("client1", 0.0) is None

    assert worker.submit_result("client1", "t1", ok_result("client1", loss=0.25))

    status = client.get_task_status("t1")
    assert status.state == TaskState.PARTIAL
    assert status.pending_devices == {"client2"}

    [result] = client.get_job_results("t1", 5)
    assert result.result_dict == {"loss": 0.25}
    assert result.result_list == [0.25]

    devices = {d.name: d for d in client.list_devices()}
    assert devices["client1"].hardware_config == {"gpu": False}
    assert devices["client1"].finished_tasks == ["t1"]
    assert devices["client2"].open_tasks == []

    assert client.stop_task("t1")
    assert client.get_task_status("t1").state == TaskState.STOPPED
    assert not client.stop_task("t1")


def test_init_assignment_over_http(client, worker):
    worker.register_device("client1")
    client.add_tasks("init", init_task())

    assignment = worker.poll_assignment("client1", 0.0)

    assert assignment.task_kind == TaskKind.INIT
    assert assignment.params == {"model_type": "linear"}


def test_wrong_key_is_unauthorized(http):
    intruder = HttpDartClient(BASE_URL, "not-the-key", session=http)
    with pytest.raises(ServerError) as exc:
        intruder.list_devices()
    assert exc.value.code == ErrorCode.UNAUTHORIZED

    response = http.get("/api/devices")
    assert response.status_code == 401
    assert response.json() == {"ok": False, "error": {"code": "UNAUTHORIZED",
                                                      "message": "missing or invalid client key"}, "data": None}


def test_unknown_names_are_not_found(client, worker, http):
    with pytest.raises(ServerError) as exc:
        client.get_task_status("ghost")
    assert exc.value.code == ErrorCode.TASK_UNKNOWN

    with pytest.raises(ServerError) as exc:
        worker.poll_assignment("ghost", 0.0)
    assert exc.value.code == ErrorCode.DEVICE_UNKNOWN

    assert http.get("/api/tasks/ghost/status", headers={KEY_HEADER: KEY}).status_code == 404


def test_rejected_task_conflicts(client, worker, http):
    worker.register_device("client1")
    client.add_tasks("t1", default_task("t1", "client1"))

    with pytest.raises(ServerError) as exc:
        client.add_tasks("t1", default_task("t1", "client1"))
    assert exc.value.code == ErrorCode.TASK_REJECTED

    response = http.post("/api/tasks", headers={KEY_HEADER: KEY},
                         json={"job_name": "t2", "spec": default_task("t2", "nobody").model_dump(mode="json")})
    assert response.status_code == 409
    assert response.json()["error"]["code"] == "TASK_REJECTED"


def test_malformed_requests(http, client):
    response = http.post("/api/tasks", headers={KEY_HEADER: KEY}, json={"job_name": "t1"})
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "BAD_REQUEST"

    response = http.post("/api/tasks", headers={KEY_HEADER: KEY},
                         json={"job_name": "other", "spec": default_task("t1", "client1").model_dump(mode="json")})
    assert response.status_code == 400

    with pytest.raises(ServerError) as exc:
        client.get_job_results("t1", -1)
    assert exc.value.code in (ErrorCode.BAD_REQUEST, ErrorCode.TASK_UNKNOWN)


def test_oversized_body_is_refused(client, worker):
    worker.register_device("client1")
    big = default_task("big", "client1", blob="x" * 10_000)

    with pytest.raises(ServerError) as exc:
        client.add_tasks("big", big)
    assert exc.value.code == ErrorCode.PAYLOAD_TOO_LARGE

    with pytest.raises(ServerError) as exc:
        client.get_task_status("big")
    assert exc.value.code == ErrorCode.TASK_UNKNOWN


def test_result_of_an_unassigned_task(client, worker):
    worker.register_device("client1")
    client.add_tasks("t1", default_task("t1", "client1"))

    with pytest.raises(ServerError) as exc:
        worker.submit_result("client1", "t1", ok_result("client1"))
    assert exc.value.code == ErrorCode.TASK_UNKNOWN


def test_server_restores_its_journal(tmp_path, clock):
    config = ServerConfig(server="http://127.0.0.1:7777", client_key=KEY, journal_path=tmp_path / "journal.jsonl")

    first = DartServer(config, clock=clock)
    first.start()
    worker = WorkerClient(BASE_URL, KEY, session=TestClient(first.api))
    worker.register_device("client1")
    HttpDartClient(BASE_URL, KEY, session=TestClient(first.api)).add_tasks("t1", default_task("t1", "client1"))
    first.owner.stop()

    second = DartServer(config, clock=clock)
    second.start()
    try:
        client = HttpDartClient(BASE_URL, KEY, session=TestClient(second.api))
        assert client.get_task_status("t1").state == TaskState.RUNNING
        assert [d.name for d in client.list_devices()] == ["client1"]
    finally:
        second.owner.stop()
