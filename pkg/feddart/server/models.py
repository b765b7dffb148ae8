"""
This module contains the models of the server configuration and of the command log.
"""

# pylint: disable=missing-class-docstring

from pathlib import Path
from typing import Any, Optional
from urllib.parse import urlparse

from pydantic import BaseModel, Field

from ..protocol.enums import MAX_BODY_BYTES

# commands changing the server state, the others are queries
MUTATING_OPS = frozenset({"register_device", "enqueue", "dispatch", "record_result", "expire", "expire_overdue",
                          "stop_task"})


class ServerConfig(BaseModel):
    """Server file: only `server` and `client_key` are required"""
    server: str
    client_key: str
    capacity: int = Field(default=4, ge=1)
    max_body_bytes: int = Field(default=MAX_BODY_BYTES, ge=1)
    bind_host: str = "0.0.0.0"
    journal_path: Optional[Path] = None
    log_file: Optional[Path] = None
    heartbeat_factor: float = Field(default=3.0, gt=0)
    max_poll_wait_seconds: float = Field(default=30.0, gt=0)
    max_parked_polls: int = Field(default=1024, ge=1)
    ssl_certfile: Optional[Path] = None
    ssl_keyfile: Optional[Path] = None

    @property
    def port(self) -> int:
        url = urlparse(self.server)
        if url.port is not None:
            return url.port
        return 443 if url.scheme == "https" else 80


class Command(BaseModel):
    """One serialized operation on the server state, `at` is the server time in milliseconds"""
    op: str
    args: dict[str, Any] = {}
    at: int

    @property
    def mutating(self) -> bool:
        return self.op in MUTATING_OPS
