"""
This module contains the registry of the task functions a worker can execute. Functions are registered with the
`@feddart` decorator and receive a `TaskContext` followed by the parameters of their assignment as keyword arguments.
"""

import importlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, overload

import loguru

from ..errors import WorkerError
from .data import DataImporter
from .enums import WorkerErrorCodes

TaskFunction = Callable[..., dict[str, Any]]


@dataclass
class TaskContext:
    """What a task function knows about the client executing it, `state` lives as long as the worker"""
    device_name: str
    output_dir: Path
    seed: int
    logger: "loguru.Logger"
    importer: Optional[DataImporter] = None
    state: dict[str, Any] = field(default_factory=dict)


class FunctionRegistry:
    """Name to function mapping, names are unique"""

    def __init__(self) -> None:
        self._functions: dict[str, TaskFunction] = {}

    def __contains__(self, name: str) -> bool:
        return name in self._functions

    def __len__(self) -> int:
        return len(self._functions)

    @property
    def names(self) -> list[str]:
        return sorted(self._functions)

    def register(self, fn: TaskFunction, name: Optional[str] = None) -> TaskFunction:
        name = name or fn.__name__
        if name in self._functions and self._functions[name] is not fn:
            raise ValueError(f"task function {name} already registered")
        self._functions[name] = fn
        return fn

    def get(self, name: str) -> TaskFunction:
        if name not in self._functions:
            raise WorkerError(WorkerErrorCodes.UNKNOWN_FUNCTION, f"no task function named {name}")
        return self._functions[name]


DEFAULT_REGISTRY = FunctionRegistry()


@overload
def feddart(fn: TaskFunction) -> TaskFunction: ...


@overload
def feddart(*, name: Optional[str] = None,
            registry: Optional[FunctionRegistry] = None) -> Callable[[TaskFunction], TaskFunction]: ...


def feddart(fn: Optional[TaskFunction] = None, *, name: Optional[str] = None,
            registry: Optional[FunctionRegistry] = None):
    """
    Register a task function, usable bare or with arguments

    :param fn: Decorated function
    :param name: Name under which the server addresses the function, its own name by default
    :param registry: Registry receiving the function, the default one otherwise
    """
    target = registry if registry is not None else DEFAULT_REGISTRY

    def decorator(func: TaskFunction) -> TaskFunction:
        return target.register(func, name)

    return decorator(fn) if fn is not None else decorator


def load_registry(ref: str) -> FunctionRegistry:
    """
    Import the module registering the task functions. A module exposing its own `REGISTRY` provides it, otherwise
    the default registry is used.

    :param ref: Dotted module path
    :return: The registry
    """
    try:
        module = importlib.import_module(ref)
    except ImportError as exc:
        raise WorkerError(WorkerErrorCodes.REGISTRY_NOT_FOUND, f"cannot import {ref}: {exc}") from exc

    registry = getattr(module, "REGISTRY", DEFAULT_REGISTRY)
    if not isinstance(registry, FunctionRegistry):
        raise WorkerError(WorkerErrorCodes.REGISTRY_NOT_FOUND, f"{ref}.REGISTRY is not a function registry")
    return registry
