"""
This module contains the Task, the ephemeral wrapper of an accepted task specification.
"""

import itertools
from typing import Optional

from ..core.core import validate_task_spec
from ..core.enums import TaskKind
from ..core.models import TaskSpec
from .device import DeviceSingle
from .enums import RejectionReason

# construction order of the ephemeral objects
creation_counter = itertools.count()

Rejection = tuple[RejectionReason, str]


class Task:
    """A task as handled by the selector and its aggregator"""

    def __init__(self, spec: TaskSpec) -> None:
        self.created_seq = next(creation_counter)
        self.spec = spec

    def __repr__(self) -> str:
        return f"Task({self.name})"

    @property
    def name(self) -> str:
        return self.spec.task_name

    @property
    def parameter_dict(self):
        return self.spec.per_device_params

    @property
    def execute_function(self) -> str:
        return self.spec.execute_function

    def check_constraints(self, devices: dict[str, DeviceSingle], known_tasks: set[str],
                          init_required: bool = False) -> Optional[Rejection]:
        """
        Verify that the task can run on the devices it names

        :param devices: Device mirrors, freshly updated
        :param known_tasks: Names of the tasks already accepted
        :param init_required: An init task exists, devices must have run it
        :return: The rejection reason and its detail, None when the task is acceptable
        """
        if (reason := validate_task_spec(self.spec)) is not None:
            return RejectionReason.BAD_REQUEST, reason

        if self.name in known_tasks:
            return RejectionReason.DUPLICATE_NAME, f"task {self.name} already exists"

        if self.spec.task_kind == TaskKind.INIT:
            return None

        for device_name in self.spec.per_device_params:
            device = devices.get(device_name)

            if device is None:
                return RejectionReason.UNKNOWN_DEVICE, f"device {device_name} is not registered"
            if init_required and not device.initialized:
                return RejectionReason.NOT_INITIALIZED, f"device {device_name} did not run the init task"
            if not device.satisfies(self.spec.hardware_requirements):
                return RejectionReason.CONSTRAINT_UNMET, \
                    f"device {device_name} does not fulfill {self.spec.hardware_requirements}"

        return None
