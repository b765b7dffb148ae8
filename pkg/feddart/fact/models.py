"""
This module contains the model abstraction of FACT and the two desk-scale models shipped with it. A model owns a flat
parameter vector (the feature weights followed by the bias), trains it by mini-batch gradient descent on local data and
aggregates the vectors returned by the clients with its aggregation algorithm.
"""

# pylint: disable=missing-class-docstring

from abc import ABC, abstractmethod
from typing import Any, ClassVar, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from .._compat import Self
from ..core.models import ParameterVector
from ..errors import FactError
from .aggregation import aggregate_fedavg
from .enums import AggregationAlgorithm, FactErrorCodes, ModelType


class Hyperparameters(BaseModel):
    learning_rate: float = Field(default=0.1, gt=0)
    batch_size: int = Field(default=32, ge=1)
    local_epochs: int = Field(default=1, ge=0)
    # weight of the proximal term, only used by FEDPROX
    mu: float = Field(default=0.01, ge=0)

    def merged(self, overrides: Optional[dict[str, Any]]) -> Self:
        """Hyperparameters where the known keys of `overrides` replace the current values"""
        if not overrides:
            return self
        known = {k: v for k, v in overrides.items() if k in type(self).model_fields}
        return type(self).model_validate({**self.model_dump(), **known})


class ModelConfig(BaseModel):
    n_features: int = Field(ge=1)

    @property
    def n_parameters(self) -> int:
        return self.n_features + 1


class RoundMetrics(BaseModel):
    """What is recorded for every training round of a cluster"""
    clustering_round: int
    training_round: int
    cluster_id: int
    loss: Optional[float] = None
    devices: list[str] = []
    missing_devices: list[str] = []
    failed_devices: list[str] = []
    durations: dict[str, float] = {}
    sample_count: int = 0


class AbstractModel(ABC):
    """
    Model contract used by the clusters. Subclasses only provide the loss, its gradient and the prediction.
    """
    model_type: ClassVar[ModelType]

    def __init__(self, model_config: ModelConfig, hyperparameters: Optional[Hyperparameters] = None,
                 aggregation_algorithm: AggregationAlgorithm = AggregationAlgorithm.FEDAVG,
                 parameters: Optional[ParameterVector] = None) -> None:
        self.model_config = model_config
        self.hyperparameters = hyperparameters or Hyperparameters()
        self.aggregation_algorithm = AggregationAlgorithm(aggregation_algorithm)
        self._parameters = ParameterVector(values=[0.0] * model_config.n_parameters)

        if parameters is not None:
            self.parameters = parameters

    @property
    def parameters(self) -> ParameterVector:
        return self._parameters

    @parameters.setter
    def parameters(self, parameters: ParameterVector) -> None:
        if len(parameters) != self.model_config.n_parameters:
            raise FactError(FactErrorCodes.LENGTH_MISMATCH,
                            f"expected {self.model_config.n_parameters} parameters, got {len(parameters)}")
        self._parameters = parameters

    @abstractmethod
    def loss_and_gradient(self, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        """
        Loss of the parameters on a batch and its gradient

        :param params: Weights followed by the bias
        :param x: Features, one row per sample
        :param y: Targets
        :return: The mean loss and its gradient with respect to `params`
        """

    @abstractmethod
    def predict(self, x: np.ndarray) -> np.ndarray:
        """Prediction of the current parameters"""

    @staticmethod
    def _affine(params: np.ndarray, x: np.ndarray) -> np.ndarray:
        return x @ params[:-1] + params[-1]

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        return self.loss_and_gradient(self._parameters.as_array(), x, y)[0]

    def train(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator,
              global_parameters: Optional[ParameterVector] = None,
              hyperparameters: Optional[Hyperparameters] = None) -> ParameterVector:
        """
        Mini-batch gradient descent starting from the current parameters. Under FEDPROX every gradient step is
        followed by the proximal step of (mu / 2) * ||w - w_global||^2, which is skipped when mu is zero.

        :param x: Local features
        :param y: Local targets
        :param rng: Generator shuffling the samples of every epoch
        :param global_parameters: Anchor of the proximal term, the starting parameters by default
        :param hyperparameters: Hyperparameters of this run, the model's by default
        :return: The trained parameters, carrying the local sample count
        """
        hp = hyperparameters or self.hyperparameters
        w = self._parameters.as_array().copy()
        anchor = global_parameters.as_array() if global_parameters is not None else w.copy()
        prox = self.aggregation_algorithm == AggregationAlgorithm.FEDPROX and hp.mu > 0
        shrink = hp.learning_rate * hp.mu

        n_samples = len(y)

        for _ in range(hp.local_epochs if n_samples else 0):
            order = rng.permutation(n_samples)
            for start in range(0, n_samples, hp.batch_size):
                batch = order[start:start + hp.batch_size]
                loss, grad = self.loss_and_gradient(w, x[batch], y[batch])

                if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                    raise FactError(FactErrorCodes.NONFINITE_LOSS,
                                    f"loss diverged with learning rate {hp.learning_rate}")

                w = w - hp.learning_rate * grad
                if prox:
                    w = (w + shrink * anchor) / (1 + shrink)

        if not np.all(np.isfinite(w)):
            raise FactError(FactErrorCodes.NONFINITE_LOSS, f"parameters diverged with learning rate {hp.learning_rate}")

        self.parameters = ParameterVector.from_array(w, sample_count=n_samples, shape=self._parameters.shape)
        return self._parameters

    def aggregate(self, results: Sequence[ParameterVector]) -> ParameterVector:
        """
        Combine client parameters into the new global parameters with the aggregation algorithm of the model

        :param results: Parameter vectors of the clients
        :return: The new parameters of the model
        """
        weighted = self.aggregation_algorithm != AggregationAlgorithm.FEDAVG
        self.parameters = aggregate_fedavg(results, weighted)
        return self._parameters

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> dict[str, float]:
        return {"loss": float(self.loss(x, y)), "n_samples": float(len(y))}

    def copy(self) -> Self:
        return type(self)(self.model_config, self.hyperparameters, self.aggregation_algorithm, self._parameters)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_type": self.model_type.value,
            "model_config": self.model_config.model_dump(),
            "model_hyperparameters": self.hyperparameters.model_dump(),
            "aggregation_algorithm": self.aggregation_algorithm.value,
            "parameters": self._parameters.model_dump(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AbstractModel":
        return build_model(data["model_type"], data["model_config"], data.get("model_hyperparameters"),
                           data.get("aggregation_algorithm", AggregationAlgorithm.FEDAVG), data.get("parameters"))


class LinearModel(AbstractModel):
    """Least squares regression, the loss is half the mean squared error"""
    model_type = ModelType.LINEAR

    def loss_and_gradient(self, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        residual = self._affine(params, x) - y
        m = len(y)
        loss = 0.5 * float(residual @ residual) / m
        grad = np.append(x.T @ residual / m, residual.mean())
        return loss, grad

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self._affine(self._parameters.as_array(), x)

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> dict[str, float]:
        metrics = super().evaluate(x, y)
        metrics["mse"] = 2 * metrics["loss"]
        return metrics


class LogisticModel(AbstractModel):
    """Binary logistic regression on 0/1 targets, the loss is the mean log loss"""
    model_type = ModelType.LOGISTIC

    @staticmethod
    def _sigmoid(z: np.ndarray) -> np.ndarray:
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    def loss_and_gradient(self, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        z = self._affine(params, x)
        m = len(y)
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        delta = self._sigmoid(z) - y
        grad = np.append(x.T @ delta / m, delta.mean())
        return loss, grad

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self._sigmoid(self._affine(self._parameters.as_array(), x))

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> dict[str, float]:
        metrics = super().evaluate(x, y)
        metrics["accuracy"] = float(np.mean((self.predict(x) >= 0.5) == (y >= 0.5))) if len(y) else 0.0
        return metrics


MODELS: dict[ModelType, type[AbstractModel]] = {
    ModelType.LINEAR: LinearModel,
    ModelType.LOGISTIC: LogisticModel,
}


def build_model(model_type: str | ModelType, model_config: ModelConfig | dict[str, Any],
                hyperparameters: Optional[Hyperparameters | dict[str, Any]] = None,
                aggregation_algorithm: str | AggregationAlgorithm = AggregationAlgorithm.FEDAVG,
                parameters: Optional[ParameterVector | dict[str, Any]] = None) -> AbstractModel:
    """
    Instantiate a model from its serialized description

    :param model_type: Name of the model
    :param model_config: Structure of the model
    :param hyperparameters: Training hyperparameters
    :param aggregation_algorithm: Aggregation algorithm
    :param parameters: Initial parameters, zeros by default
    :return: The model
    """
    try:
        model_cls = MODELS[ModelType(model_type)]
        return model_cls(
            ModelConfig.model_validate(model_config),
            Hyperparameters.model_validate(hyperparameters) if hyperparameters is not None else None,
            AggregationAlgorithm(aggregation_algorithm),
            ParameterVector.model_validate(parameters) if parameters is not None else None,
        )
    except ValueError as exc:
        raise FactError(FactErrorCodes.BAD_CONFIG, str(exc)) from exc


def local_train_fedprox(model: AbstractModel, global_parameters: ParameterVector, x: np.ndarray, y: np.ndarray,
                        mu: float, epochs: int, rng: np.random.Generator) -> ParameterVector:
    """
    Train a copy of `model` from the global parameters on the objective local_loss + (mu / 2) * ||w - w_global||^2

    :param model: Model providing the loss and the hyperparameters
    :param global_parameters: Broadcast global parameters
    :param x: Local features
    :param y: Local targets
    :param mu: Weight of the proximal term, zero gives plain local training
    :param epochs: Number of local epochs
    :param rng: Generator shuffling the samples
    :return: The trained parameters
    """
    if mu < 0:
        raise FactError(FactErrorCodes.BAD_CONFIG, "mu must not be negative")

    local = model.copy()
    local.aggregation_algorithm = AggregationAlgorithm.FEDPROX
    local.parameters = global_parameters
    hyperparameters = model.hyperparameters.merged({"mu": mu, "local_epochs": epochs})
    return local.train(x, y, rng, global_parameters, hyperparameters)
