"""
This module contains the enumerations of the wire protocol.
"""

from enum import Enum, auto

from .._compat import StrEnum

KEY_HEADER = "X-Feddart-Key"
MAX_BODY_BYTES = 64 * 1024 * 1024
# `amount` of a results request asking for every result
ALL_RESULTS = 2 ** 31 - 1


class ErrorCode(StrEnum):
    """Closed set of error codes a protocol envelope may carry"""
    UNAUTHORIZED = "UNAUTHORIZED"
    DEVICE_UNKNOWN = "DEVICE_UNKNOWN"
    TASK_UNKNOWN = "TASK_UNKNOWN"
    TASK_REJECTED = "TASK_REJECTED"
    BAD_REQUEST = "BAD_REQUEST"
    PAYLOAD_TOO_LARGE = "PAYLOAD_TOO_LARGE"

    @property
    def http_status(self) -> int:
        return _HTTP_STATUS[self]


_HTTP_STATUS = {
    ErrorCode.UNAUTHORIZED: 401,
    ErrorCode.DEVICE_UNKNOWN: 404,
    ErrorCode.TASK_UNKNOWN: 404,
    ErrorCode.TASK_REJECTED: 409,
    ErrorCode.BAD_REQUEST: 400,
    ErrorCode.PAYLOAD_TOO_LARGE: 413,
}


class TransportErrorCodes(Enum):
    """Failures below the protocol level"""
    UNREACHABLE = auto()
    MALFORMED_RESPONSE = auto()
