"""
This module contains the exceptions raised throughout Fed-DART. Every exception carries an error code taken from the
`enums` module of the package raising it.
"""

from enum import Enum


class FedDartError(Exception):
    """Base exception, holds an error code and an optional human-readable message"""

    def __init__(self, code: Enum, message: str = "") -> None:
        super().__init__(f"{code.name}: {message}" if message else code.name)
        self.code = code
        self.message = message


class ServerError(FedDartError):
    """Error of the wire protocol, the code is a `protocol.enums.ErrorCode`"""


class TransportError(FedDartError):
    """The server could not be reached or answered with something that is not a protocol envelope"""


class WorkflowError(FedDartError):
    """Error raised by the workflow manager and its backend"""


class WorkerError(FedDartError):
    """Error raised on the client side while executing tasks"""


class FactError(FedDartError):
    """Error raised by the aggregation and clustering toolkit"""


class ConfigError(FedDartError):
    """A configuration file is missing or invalid"""


class TaskRejectedError(WorkflowError):
    """The selector refused a task, `reason` tells why"""

    def __init__(self, code: Enum, reason: Enum, message: str = "") -> None:
        super().__init__(code, f"{reason.value}: {message}" if message else str(reason.value))
        self.reason = reason
