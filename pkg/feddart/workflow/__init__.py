"""
Workflow side of Fed-DART: the WorkflowManager and the backend accepting, dispatching and following its tasks.
"""

from .aggregator import Aggregator, DeviceHolder
from .client import LocalDartClient, LocalWorkerTransport
from .device import DeviceSingle
from .enums import RejectionReason, WorkflowErrorCodes
from .manager import INIT_TASK_NAME, WorkflowManager
from .runtime import DartRuntime
from .selector import Selector
from .task import Task
