"""
This module contains all the logging configuration used throughout the project. It plays the role of the LogServer: the
communication between the DART-Server and the workflow side, as well as every task executed by a worker, is logged
through it.
"""

from __future__ import annotations

import sys
from contextlib import contextmanager
from ._compat import StrEnum
from pathlib import Path
from threading import Lock
from typing import Iterator

import loguru
from loguru import logger

TASK_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {message}"


class LogLevel(StrEnum):
    """Log levels selectable by the user"""
    DEBUG = "debug"
    INFO = "info"
    WARN = "warn"
    ERROR = "error"

    @property
    def loguru_level(self) -> str:
        return "WARNING" if self is LogLevel.WARN else self.name


class SingletonMeta(type):
    """Singleton metaclass"""
    _instances = {}

    def __call__(cls, *args, **kwargs):
        if cls not in cls._instances:
            instance = super().__call__(*args, **kwargs)
            cls._instances[cls] = instance
        return cls._instances[cls]


class LoggingManager(metaclass=SingletonMeta):
    """
    Singleton logging manager class used throughout Fed-DART to have a centralized log formatting.

    The format is: <date> | <level> [| <caller>] | [<app>] <message>
    """
    loggers: dict[str, loguru.Logger] = {}
    mu = Lock()

    def __init__(self, save_logs: bool = False, level: LogLevel = LogLevel.INFO, debug: bool = False,
                 log_file: str | Path = "feddart.log"):
        if debug:
            fmt = "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>[{extra[app]}] {message}</level>"
        else:
            fmt = "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | <level>[{extra[app]}] {message}</level>"

        log_lvl = "DEBUG" if debug else level.loguru_level

        self.fmt, self.level = fmt, log_lvl
        self.files: dict[Path, int] = {}

        logger.remove()
        logger.configure(extra={"app": "General"})
        logger.add(sys.stdout, level=log_lvl, format=fmt)

        if save_logs:
            self.add_file(log_file)

    def add_file(self, log_file: str | Path) -> None:
        """Also write the logs into `log_file`, in the format and level of the console"""
        path = Path(log_file)
        with self.mu:
            if path not in self.files:
                path.parent.mkdir(parents=True, exist_ok=True)
                self.files[path] = logger.add(str(path), format=self.fmt, level=self.level, rotation="10 MB")

    def remove_file(self, log_file: str | Path) -> None:
        with self.mu:
            if (sink_id := self.files.pop(Path(log_file), None)) is not None:
                logger.remove(sink_id)

    @classmethod
    def get_logger(cls, _id: str, **bind_kwargs) -> loguru.Logger:
        with cls.mu:
            if _id not in cls.loggers:
                if 'app' not in bind_kwargs:
                    bind_kwargs['app'] = "General"
                cls.loggers[_id] = logger.bind(**bind_kwargs)
            return cls.loggers[_id]

    @classmethod
    @contextmanager
    def task_log(cls, path: str | Path, task_name: str, device_name: str,
                 base: loguru.Logger | None = None) -> Iterator[loguru.Logger]:
        """
        Duplicate everything logged for a task into its own file for the duration of the context

        :param path: File receiving the task logs
        :param task_name: Name of the task being executed
        :param device_name: Device executing the task, several simulated devices may share a process
        :param base: Logger to bind the task to, the general logger otherwise
        :return: A logger bound to the task
        """
        def _only_this_task(record) -> bool:
            extra = record["extra"]
            return extra.get("task") == task_name and extra.get("device") == device_name

        Path(path).parent.mkdir(parents=True, exist_ok=True)
        sink_id = logger.add(str(path), format=TASK_FORMAT, level="DEBUG", filter=_only_this_task)
        try:
            yield (base or logger).bind(task=task_name, device=device_name)
        finally:
            logger.remove(sink_id)
