"""
This module contains the data importers of the clients. An importer loads the local data, preprocesses it and splits
it into a training and a test set; task functions only read the result.
"""

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from ..errors import WorkerError
from .enums import DataKind, WorkerErrorCodes
from .models import DataSpec

Dataset = tuple[np.ndarray, np.ndarray]


class DataImporter(ABC):
    """
    Base class of the data importers. Subclasses implement the three stages, `prepare` runs them once.
    """

    def __init__(self, spec: DataSpec) -> None:
        self.spec = spec
        self.x_train: Optional[np.ndarray] = None
        self.y_train: Optional[np.ndarray] = None
        self.x_test: Optional[np.ndarray] = None
        self.y_test: Optional[np.ndarray] = None

    @abstractmethod
    def load_data(self) -> Dataset:
        """
        Read the raw data

        :return: Features, one row per sample, and targets
        """

    def preprocess_data(self, x: np.ndarray, y: np.ndarray) -> Dataset:
        if not self.spec.standardize or len(y) == 0:
            return x, y
        std = x.std(axis=0)
        return (x - x.mean(axis=0)) / np.where(std > 0, std, 1.0), y

    def split_data_into_train_and_test(self, x: np.ndarray, y: np.ndarray) -> tuple[Dataset, Dataset]:
        """The last `test_fraction` of the samples form the test set"""
        n_test = int(round(len(y) * self.spec.test_fraction))
        n_train = len(y) - n_test
        return (x[:n_train], y[:n_train]), (x[n_train:], y[n_train:])

    def prepare(self) -> "DataImporter":
        if self.x_train is not None:
            return self

        x, y = self.preprocess_data(*self.load_data())
        (self.x_train, self.y_train), (self.x_test, self.y_test) = self.split_data_into_train_and_test(x, y)
        return self

    @property
    def n_features(self) -> int:
        return self.prepare().x_train.shape[1]


class CsvDataImporter(DataImporter):
    """Comma separated file of numbers"""

    def load_data(self) -> Dataset:
        if self.spec.path is None:
            raise WorkerError(WorkerErrorCodes.BAD_DATA, "a csv importer needs a path")

        try:
            table = np.loadtxt(self.spec.path, delimiter=",", skiprows=1 if self.spec.skip_header else 0, ndmin=2)
        except (OSError, ValueError) as exc:
            raise WorkerError(WorkerErrorCodes.BAD_DATA, f"cannot read {self.spec.path}: {exc}") from exc

        target = self.spec.target_column % table.shape[1]
        return np.delete(table, target, axis=1), table[:, target]


class SyntheticDataImporter(DataImporter):
    """
    Standard normal features and targets of a known model, reproducible from the seed of the spec. `true_weights`
    holds the feature weights optionally followed by the bias.
    """

    def true_parameters(self) -> np.ndarray:
        d = self.spec.n_features
        weights = np.asarray(self.spec.true_weights if self.spec.true_weights is not None else [0.0] * d,
                             dtype=np.float64)
        if len(weights) == d:
            weights = np.append(weights, 0.0)
        if len(weights) != d + 1:
            raise WorkerError(WorkerErrorCodes.BAD_DATA, f"true_weights must hold {d} or {d + 1} values")
        return weights

    def load_data(self) -> Dataset:
        rng = np.random.default_rng(self.spec.seed)
        params = self.true_parameters()

        x = rng.standard_normal((self.spec.n_samples, self.spec.n_features))
        z = x @ params[:-1] + params[-1]

        match self.spec.task:
            case "linear":
                y = z + self.spec.noise * rng.standard_normal(self.spec.n_samples)
            case "logistic":
                y = (rng.random(self.spec.n_samples) < 0.5 * (1.0 + np.tanh(0.5 * z))).astype(np.float64)
            case _:
                raise WorkerError(WorkerErrorCodes.BAD_DATA, f"unknown synthetic task {self.spec.task}")
        return x, y


def build_importer(spec: DataSpec) -> DataImporter:
    match spec.kind:
        case DataKind.CSV:
            return CsvDataImporter(spec)
        case DataKind.SYNTHETIC:
            return SyntheticDataImporter(spec)
    raise WorkerError(WorkerErrorCodes.BAD_DATA, f"unknown data kind {spec.kind}")
