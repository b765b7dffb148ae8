"""
This module contains the built-in task functions of the federated learning workflow: `init` builds the local model,
`learn` trains it from the global parameters and `evaluate` measures it on the local test data.
"""

import json
from typing import Any, Optional

import numpy as np

from ..core.core import derive_seed
from ..core.models import ParameterVector
from ..errors import WorkerError
from ..fact.enums import AggregationAlgorithm
from ..fact.models import AbstractModel, build_model
from .data import build_importer
from .enums import WorkerErrorCodes
from .models import DataSpec
from .registry import TaskContext, feddart

MODEL_KEY = "model"


def _model(ctx: TaskContext) -> AbstractModel:
    model = ctx.state.get(MODEL_KEY)
    if model is None:
        raise WorkerError(WorkerErrorCodes.NOT_INITIALIZED, f"no local model on {ctx.device_name}, init never ran")
    return model


def _training_data(ctx: TaskContext) -> tuple[np.ndarray, np.ndarray]:
    if ctx.importer is None:
        raise WorkerError(WorkerErrorCodes.BAD_DATA, f"no local data configured on {ctx.device_name}")
    importer = ctx.importer.prepare()
    return importer.x_train, importer.y_train


@feddart
def init(ctx: TaskContext, model_type: str, model_config: Optional[dict[str, Any]] = None,
         model_hyperparameters: Optional[dict[str, Any]] = None,
         aggregation_algorithm: str = AggregationAlgorithm.FEDAVG.value,
         global_model_parameters: Optional[dict[str, Any]] = None,
         data: Optional[dict[str, Any]] = None) -> dict[str, Any]:
    """
    Build the local model. A `data` spec replaces the importer configured on the worker, the number of features
    defaults to the one of the local data.
    """
    if data is not None:
        ctx.importer = build_importer(DataSpec.model_validate(data))

    config = dict(model_config or {})
    if "n_features" not in config and ctx.importer is not None:
        config["n_features"] = ctx.importer.n_features

    model = build_model(model_type, config, model_hyperparameters, aggregation_algorithm, global_model_parameters)
    ctx.state[MODEL_KEY] = model

    n_samples = len(ctx.importer.prepare().y_train) if ctx.importer is not None else 0
    ctx.logger.info(f"local {model.model_type} model ready, {n_samples} training samples")
    return {"initialized": True, "n_parameters": model.model_config.n_parameters, "n_samples": n_samples}


@feddart
def learn(ctx: TaskContext, global_model_parameters: dict[str, Any],
          task_parameters: Optional[dict[str, Any]] = None) -> dict[str, Any]:
    """
    Replace the local parameters with the global ones and train them on the local data. The task parameters override
    the hyperparameters of the model, `round` and `seed` select the shuffling of the samples.
    """
    model = _model(ctx)
    x, y = _training_data(ctx)
    task_parameters = dict(task_parameters or {})

    if "epochs" in task_parameters:
        task_parameters.setdefault("local_epochs", task_parameters["epochs"])

    round_index = int(task_parameters.get("round", ctx.state.get("round", 0)))
    seed = int(task_parameters.get("seed", ctx.seed))

    global_parameters = ParameterVector.model_validate(global_model_parameters)
    model.parameters = global_parameters
    hyperparameters = model.hyperparameters.merged(task_parameters)

    rng = np.random.default_rng(derive_seed(seed, ctx.device_name, round_index))
    parameters = model.train(x, y, rng, global_parameters, hyperparameters)
    loss = model.loss(x, y) if len(y) else 0.0

    ctx.output_dir.mkdir(parents=True, exist_ok=True)
    with open(ctx.output_dir / f"params_round_{round_index}.json", "w", encoding="utf-8") as file:
        json.dump(parameters.model_dump(), file)

    ctx.state["round"] = round_index + 1
    ctx.logger.debug(f"round {round_index}: local loss {loss:.6g} on {len(y)} samples")
    return {"parameters": parameters.model_dump(), "sample_count": parameters.sample_count, "loss": float(loss)}


@feddart
def evaluate(ctx: TaskContext, global_model_parameters: Optional[dict[str, Any]] = None) -> dict[str, Any]:
    """Metrics of the model on the local test data, on the training data when there is no test split"""
    model = _model(ctx)
    if global_model_parameters is not None:
        model.parameters = ParameterVector.model_validate(global_model_parameters)

    x, y = _training_data(ctx)
    metrics = {f"train_{k}": v for k, v in model.evaluate(x, y).items()}

    if ctx.importer.y_test is not None and len(ctx.importer.y_test):
        metrics.update(model.evaluate(ctx.importer.x_test, ctx.importer.y_test))
    else:
        metrics.update(model.evaluate(x, y))
    return metrics
