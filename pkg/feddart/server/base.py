"""
This module contains the DART-Server: the REST layer between the workflow side and the workers, exposing the state
owned by the `StateOwner` through the routes of the wire protocol.
"""

import secrets
from contextlib import asynccontextmanager
from typing import Awaitable, Callable, Optional

from anyio import CapacityLimiter, to_thread
from fastapi import APIRouter, FastAPI, Query, Request, Response, Security
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.security import APIKeyHeader
from starlette.exceptions import HTTPException as StarletteHTTPException
from uvicorn import Config, Server

from ..errors import ServerError
from ..logger import LoggingManager
from ..protocol.enums import ALL_RESULTS, KEY_HEADER, ErrorCode
from ..protocol.models import AddTask, ApiResponse, PollAssignment, RegisterDevice, SubmitResult
from .enums import ServerErrorCodes
from .models import ServerConfig
from .owner import Clock, StateOwner
from .state import ServerState


def envelope(data=None, status_code: int = 200) -> JSONResponse:
    return JSONResponse(status_code=status_code, content=ApiResponse.success(data).model_dump(mode="json"))


def error_envelope(code: ErrorCode, message: str = "") -> JSONResponse:
    return JSONResponse(status_code=code.http_status, content=ApiResponse.failure(code, message).model_dump(mode="json"))


class DartServer:
    """
    The DartServer class binds the routes of the wire protocol to a state owner. Every route requires the shared
    client key in the `X-Feddart-Key` header.
    """

    def __init__(self, config: ServerConfig, clock: Optional[Clock] = None, record_history: bool = False) -> None:
        self.logger = LoggingManager.get_logger("dart-server", app="DART Server")
        self.config = config

        if config.journal_path is not None and config.journal_path.exists():
            state = ServerState.restore(config.journal_path, config.capacity, config.heartbeat_factor)
            self.logger.info(f"state restored from {config.journal_path}")
        else:
            state = ServerState(config.capacity, config.heartbeat_factor)

        self.owner = StateOwner(state, clock=clock, journal_path=config.journal_path, record_history=record_history)
        self._poll_limiter: Optional[CapacityLimiter] = None

        @asynccontextmanager
        async def lifespan(_app: FastAPI):
            yield
            self.owner.stop()

        self.api = FastAPI(lifespan=lifespan, title="Fed-DART")
        self.api.middleware("http")(self._body_size_middleware)

        self.api.add_exception_handler(ServerError, self._server_error_handler)  # type: ignore
        self.api.add_exception_handler(RequestValidationError, self._validation_error_handler)  # type: ignore
        self.api.add_exception_handler(StarletteHTTPException, self._http_exception_handler)  # type: ignore

        self.uvicorn_config = Config(self.api, host=config.bind_host, port=config.port, log_level="warning",
                                     ssl_certfile=str(config.ssl_certfile) if config.ssl_certfile else None,
                                     ssl_keyfile=str(config.ssl_keyfile) if config.ssl_keyfile else None)
        self.server = Server(config=self.uvicorn_config)

        # @formatter:off
        self.task_router = APIRouter(prefix="/api/tasks", tags=["Tasks"], dependencies=[Security(self._verify_key)])
        self.device_router = APIRouter(prefix="/api/devices", tags=["Devices"], dependencies=[Security(self._verify_key)])
        self.worker_router = APIRouter(prefix="/api/worker", tags=["Worker"], dependencies=[Security(self._verify_key)])
        # @formatter:on

        self.init_routes()
        self.include_routers()

    def _verify_key(self, key: Optional[str] = Security(APIKeyHeader(name=KEY_HEADER, auto_error=False))) -> None:
        if key is None or not secrets.compare_digest(key.encode("utf-8"), self.config.client_key.encode("utf-8")):
            raise ServerError(ErrorCode.UNAUTHORIZED, "missing or invalid client key")

    def _server_error_handler(self, request: Request, exc: ServerError) -> JSONResponse:
        if exc.code == ErrorCode.UNAUTHORIZED:
            host = request.client.host if request.client else "unknown"
            self.logger.warning(f"Unauthorized access to {request.url.path} from {host}")
        return error_envelope(exc.code, exc.message)

    @staticmethod
    def _validation_error_handler(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return error_envelope(ErrorCode.BAD_REQUEST, str(exc.errors()))

    @staticmethod
    def _http_exception_handler(_request: Request, exc: StarletteHTTPException) -> JSONResponse:
        response = error_envelope(ErrorCode.BAD_REQUEST, str(exc.detail))
        response.status_code = exc.status_code
        return response

    async def _body_size_middleware(self, request: Request,
                                    call_next: Callable[[Request], Awaitable[Response]]) -> Response:
        length = request.headers.get("content-length")
        if length is not None and length.isdigit() and int(length) > self.config.max_body_bytes:
            self.logger.warning(f"request body of {length} bytes refused on {request.url.path}")
            return error_envelope(ErrorCode.PAYLOAD_TOO_LARGE, f"body exceeds {self.config.max_body_bytes} bytes")

        return await call_next(request)

    def init_routes(self) -> None:
        # the route ordering matters ! the sub paths of a task come before the bare task path
        self.task_router.add_api_route("", self.add_task, methods=["POST"])
        self.task_router.add_api_route("/{task_name}/status", self.get_task_status, methods=["GET"])
        self.task_router.add_api_route("/{task_name}/results", self.get_job_results, methods=["GET"])
        self.task_router.add_api_route("/{task_name}", self.stop_task, methods=["DELETE"])

        self.device_router.add_api_route("", self.list_devices, methods=["GET"])
        self.device_router.add_api_route("/register", self.register_device, methods=["POST"])

        self.worker_router.add_api_route("/poll", self.poll_assignment, methods=["POST"])
        self.worker_router.add_api_route("/result", self.submit_result, methods=["POST"])

    def include_routers(self) -> None:
        self.api.include_router(self.task_router)
        self.api.include_router(self.device_router)
        self.api.include_router(self.worker_router)

    def start(self) -> ServerErrorCodes:
        return self.owner.start()

    def run(self) -> None:
        if (err_code := self.owner.start()) != ServerErrorCodes.OK:
            self.logger.critical(f"Failed to start the state owner: {err_code}")
            return

        scheme = "https" if self.config.ssl_certfile else "http"
        self.logger.info(f"started on {scheme}://{self.uvicorn_config.host}:{self.uvicorn_config.port}")
        self.server.run()  # need to run as last

    # ---------------------------------------------------------------------------------------------------------------
    # workflow side

    def add_task(self, body: AddTask):
        if body.job_name != body.spec.task_name:
            raise ServerError(ErrorCode.BAD_REQUEST, "job_name differs from the task name of the spec")

        handle = self.owner.enqueue(body.spec)
        return envelope({"accepted": True, "handle": handle.model_dump(mode="json")})

    def get_task_status(self, task_name: str):
        return envelope(self.owner.get_task_status(task_name).model_dump(mode="json"))

    def get_job_results(self, task_name: str, amount: int = Query(default=ALL_RESULTS)):
        return envelope([r.model_dump(mode="json") for r in self.owner.get_job_results(task_name, amount)])

    def stop_task(self, task_name: str):
        return envelope({"stopped": self.owner.stop_task(task_name)})

    def list_devices(self):
        return envelope([d.model_dump(mode="json") for d in self.owner.list_devices()])

    # ---------------------------------------------------------------------------------------------------------------
    # worker side

    def register_device(self, request: Request, body: RegisterDevice):
        host = request.client.host if request.client else ""
        registered = self.owner.register_device(body.name, body.hardware_config, host, body.port,
                                                body.poll_interval_seconds)
        return envelope({"registered": registered})

    @property
    def poll_limiter(self) -> CapacityLimiter:
        # created lazily, a limiter binds to the running event loop backend
        if self._poll_limiter is None:
            self._poll_limiter = CapacityLimiter(self.config.max_parked_polls)
        return self._poll_limiter

    async def poll_assignment(self, body: PollAssignment):
        wait = min(body.wait_seconds, self.config.max_poll_wait_seconds)
        # parked polls hold threads of their own limiter, never the tokens the other routes run on
        assignment = await to_thread.run_sync(self.owner.poll, body.device_name, wait, limiter=self.poll_limiter)
        return envelope({"assignment": assignment.model_dump(mode="json") if assignment is not None else None})

    def submit_result(self, body: SubmitResult):
        status = self.owner.record_result(body.device_name, body.task_name, body.result)
        return envelope({"recorded": True, "status": status.model_dump(mode="json")})
