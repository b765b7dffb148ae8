import itertools

import pytest

from feddart.core.enums import TaskState
from feddart.core.models import DeviceSummary, TaskResult, TaskSpec, TaskStatus
from feddart.errors import ServerError, TaskRejectedError, WorkflowError
from feddart.protocol.client import DartClient
from feddart.protocol.enums import ErrorCode
from feddart.server.state import ServerState
from feddart.workflow.aggregator import Aggregator, DeviceHolder
from feddart.workflow.device import DeviceSingle
from feddart.workflow.enums import RejectionReason, WorkflowErrorCodes
from feddart.workflow.runtime import DartRuntime
from feddart.workflow.selector import Selector
from feddart.workflow.task import Task

from conftest import default_task, init_task, ok_result

T0 = 1_000_000


class StateClient(DartClient):
    """Workflow transport calling a server state directly"""

    def __init__(self, state: ServerState) -> None:
        self.state = state
        self.refuse = False

    def add_tasks(self, job_name: str, spec: TaskSpec) -> bool:
        if self.refuse:
            raise ServerError(ErrorCode.TASK_REJECTED, "server full")
        self.state.enqueue(spec, T0)
        return True

    def get_job_results(self, job_name: str, amount: int) -> list[TaskResult]:
        return self.state.get_job_results(job_name, amount)

    def get_task_status(self, job_name: str) -> TaskStatus:
        return self.state.get_task_status(job_name)

    def stop_task(self, job_name: str) -> bool:
        return self.state.stop_task(job_name, T0)

    def list_devices(self) -> list[DeviceSummary]:
        return self.state.list_devices(T0)


def mirrors(n: int) -> list[DeviceSingle]:
    return [DeviceSingle(DeviceSummary(name=f"client{i:03d}")) for i in range(n)]


def work(state: ServerState, device: str, **values) -> None:
    assignment = state.dispatch(device, T0)
    state.record_result(device, assignment.task_name, ok_result(device, **values), T0)


@pytest.fixture
def state() -> ServerState:
    state = ServerState()
    state.register_device("client1", T0, hardware_config={"gpu": True})
    state.register_device("client2", T0)
    return state


@pytest.fixture
def selector(state) -> Selector:
    return Selector(DartRuntime(StateClient(state)))


def accept(selector: Selector, spec: TaskSpec) -> None:
    assert selector.request_task_acceptance(spec) is None
    selector.schedule()


def test_packing_of_a_hundred_devices():
    devices = mirrors(100)
    root = Aggregator.build(Task(default_task("t", "client000")), devices, runtime=None, capacity=8, fanout=8)

    assert len(root.all_holders()) == 13
    assert len(root.child_aggregators) == 2
    assert root.depth == 2
    assert [len(c.all_holders()) for c in root.child_aggregators] == [8, 5]
    assert root.device_names == [d.name for d in devices]


def test_small_tasks_need_a_single_level():
    root = Aggregator.build(Task(default_task("t", "client000")), mirrors(5), runtime=None, capacity=2, fanout=4)

    assert root.depth == 1
    assert [h.device_names for h in root.all_holders()] == [["client000", "client001"], ["client002", "client003"],
                                                           ["client004"]]


@pytest.mark.parametrize("n,capacity,fanout", list(itertools.product([1, 7, 33, 250], [1, 3, 8], [2, 5])))
def test_holders_partition_the_devices(n, capacity, fanout):
    devices = mirrors(n)
    root = Aggregator.build(Task(default_task("t", "client000")), devices, runtime=None, capacity=capacity,
                            fanout=fanout)

    names = [name for holder in root.all_holders() for name in holder.device_names]
    assert sorted(names) == sorted(d.name for d in devices)
    assert len(names) == len(set(names))
    assert all(1 <= len(h.devices) <= capacity for h in root.all_holders())

    def check(aggregator: Aggregator) -> None:
        assert not (aggregator.device_holders and aggregator.child_aggregators)
        assert len(aggregator.device_holders) <= fanout
        assert len(aggregator.child_aggregators) <= fanout
        for child in aggregator.child_aggregators:
            check(child)

    check(root)


def test_bad_tree_parameters():
    with pytest.raises(ValueError):
        Aggregator.build(Task(default_task("t", "client000")), mirrors(3), runtime=None, capacity=0)
    with pytest.raises(ValueError):
        Aggregator.build(Task(default_task("t", "client000")), mirrors(3), runtime=None, fanout=1)
    with pytest.raises(ValueError):
        DeviceHolder(mirrors(3), capacity=2)


def test_creation_order():
    task = Task(default_task("t", "client000"))
    root = Aggregator.build(task, mirrors(40), runtime=None, capacity=4, fanout=2)
    holders = root.all_holders()

    assert task.created_seq < root.created_seq
    assert all(root.created_seq < child.created_seq for child in root.child_aggregators)
    assert root.created_seq < min(h.created_seq for h in holders)
    assert [h.created_seq for h in holders] == sorted(h.created_seq for h in holders)


def test_holder_restricts_the_status():
    holder = DeviceHolder(mirrors(2), capacity=4)
    status = TaskStatus(task_name="t", state=TaskState.PARTIAL, finished_devices=frozenset({"client000", "x"}),
                        pending_devices=frozenset({"client001", "y"}))

    restricted = holder.devices_finished(status)

    assert restricted.finished_devices == {"client000"}
    assert restricted.pending_devices == {"client001"}
    assert restricted.state == TaskState.PARTIAL


def test_device_requirements():
    device = DeviceSingle(DeviceSummary(name="d", hardware_config={"gpu": True, "ram": 16}))

    assert device.satisfies(None)
    assert device.satisfies({"gpu": True})
    assert not device.satisfies({"gpu": False})
    assert not device.satisfies({"tpu": True})
    assert not DeviceSingle(DeviceSummary(name="e")).satisfies({"gpu": True})


def test_rejections(selector, state):
    accept(selector, default_task("t1", "client1"))

    cases = {
        RejectionReason.UNKNOWN_DEVICE: default_task("t2", "client1", "client9"),
        RejectionReason.DUPLICATE_NAME: default_task("t1", "client2"),
        RejectionReason.BAD_REQUEST: TaskSpec(task_name="t3", execute_function="learn"),
        RejectionReason.CONSTRAINT_UNMET: default_task("t4", "client2").model_copy(
            update={"hardware_requirements": {"gpu": True}}),
    }
    for reason, spec in cases.items():
        rejection = selector.request_task_acceptance(spec)
        assert rejection is not None and rejection[0] == reason

    accept(selector, default_task("t5", "client1").model_copy(update={"hardware_requirements": {"gpu": True}}))


def test_tasks_wait_for_the_init_task(selector, state):
    selector.schedule_init_task(init_task())
    work(state, "client1")

    rejection = selector.request_task_acceptance(default_task("t1", "client1", "client2"))
    assert rejection[0] == RejectionReason.NOT_INITIALIZED

    accept(selector, default_task("t2", "client1"))
    assert selector.get_task_status("init").finished_devices == {"client1"}

    with pytest.raises(ValueError):
        selector.schedule_init_task(default_task("t3", "client1"))


def test_task_lifecycle_and_ephemeral_cache(selector, state):
    accept(selector, default_task("t1", "client1", "client2"))
    assert "t1" in selector.aggregators
    assert selector.devices["client1"].open_tasks == {"t1": {}}

    work(state, "client1", loss=0.5)
    status = selector.get_task_status("t1")
    assert status.state == TaskState.PARTIAL
    assert [r.device_name for r in selector.get_task_results("t1")] == ["client1"]

    work(state, "client2", loss=0.7)
    assert selector.get_task_status("t1").state == TaskState.COMPLETED
    assert "t1" not in selector.aggregators

    # served from the device caches once the aggregator is gone
    assert selector.get_task_status("t1").state == TaskState.COMPLETED
    assert [r.result_dict for r in selector.get_task_results("t1")] == [{"loss": 0.5}, {"loss": 0.7}]
    assert selector.devices["client2"].open_tasks == {}


def test_stop_task(selector, state):
    accept(selector, default_task("t1", "client1"))

    assert selector.stop_task("t1")
    assert selector.get_task_status("t1").state == TaskState.STOPPED
    assert not selector.stop_task("t1")
    assert selector.get_task_results("t1") == []


def test_unknown_tasks(selector):
    for call in (selector.get_task_status, selector.get_task_results, selector.stop_task):
        with pytest.raises(WorkflowError) as exc:
            call("ghost")
        assert exc.value.code == WorkflowErrorCodes.TASK_UNKNOWN


def test_server_refusal_releases_the_name(selector):
    selector.runtime.client.refuse = True
    assert selector.request_task_acceptance(default_task("t1", "client1")) is None

    with pytest.raises(TaskRejectedError) as exc:
        selector.schedule()
    assert exc.value.reason == RejectionReason.BAD_REQUEST
    assert "t1" not in selector.aggregators

    selector.runtime.client.refuse = False
    accept(selector, default_task("t1", "client1"))


def test_device_mirrors_follow_the_server(selector, state):
    selector.update_registered_devices()
    assert not selector.devices["client1"].initialized

    state.register_device("client3", T0, hardware_config={"ram": 8})
    selector.update_registered_devices()

    assert sorted(selector.devices) == ["client1", "client2", "client3"]
    assert selector.devices["client3"].hardware_config == {"ram": 8}
