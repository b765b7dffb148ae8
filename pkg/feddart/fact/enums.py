"""
This module contains the enumerations of the FACT toolkit.
"""

from enum import Enum, auto

from .._compat import StrEnum


class AggregationAlgorithm(StrEnum):
    """How the client parameters of a training round are combined"""
    FEDAVG = "FEDAVG"
    WEIGHTED_FEDAVG = "WEIGHTED_FEDAVG"
    FEDPROX = "FEDPROX"


class ClusteringAlgorithm(StrEnum):
    """How the clients are regrouped between two clustering rounds"""
    STATIC = "STATIC"
    KMEANS_ON_PARAMS = "KMEANS_ON_PARAMS"


class ModelType(StrEnum):
    LINEAR = "linear"
    LOGISTIC = "logistic"


class FactErrorCodes(Enum):
    """Error codes enumeration. Used throughout the toolkit in the raised `FactError`."""
    LENGTH_MISMATCH = auto()
    EMPTY_RESULTS = auto()
    ZERO_WEIGHT = auto()
    NONFINITE_INPUT = auto()
    NONFINITE_LOSS = auto()
    BAD_CONFIG = auto()
    DEGENERATE_K = auto()
    ROUND_EMPTY = auto()
    NOT_INITIALIZED = auto()
