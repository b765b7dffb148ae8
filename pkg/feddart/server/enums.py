"""
This module contains the enumerations used by the DART-Server.
"""

from enum import Enum, auto


class ServerErrorCodes(Enum):
    """Error codes returned by the lifecycle methods of the server"""
    OK = auto()
    CANCELLED = auto()
    JOURNAL_UNREADABLE = auto()


class OwnerState(Enum):
    """Lifecycle state of the command owner"""
    STOPPED = 0
    RUNNING = 1
    ERROR = 2
