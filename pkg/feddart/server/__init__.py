"""
The coordination service: device registry, task queue, per-device dispatch, result store and init-task gating.
"""

from .base import DartServer
from .enums import OwnerState, ServerErrorCodes
from .models import Command, ServerConfig
from .owner import HistoryEntry, StateOwner
from .state import ServerState
