"""
The REST contract between the workflow side and the server, and between the server and the client workers.
"""

from .client import ApiSession, DartClient, HttpDartClient, WorkerClient, WorkerTransport
from .enums import KEY_HEADER, MAX_BODY_BYTES, ErrorCode, TransportErrorCodes
from .models import AddTask, ApiError, ApiResponse, PollAssignment, RegisterDevice, SubmitResult
