"""
This module contains the stopping criteria of the federated training rounds and of the clustering rounds. Only the fixed
round criteria are shipped, further criteria receive the metrics of the round as keyword arguments.
"""

from abc import ABC, abstractmethod
from typing import Any

from ..errors import FactError
from .enums import FactErrorCodes


class AbstractStoppingCriterion(ABC):
    """Common base of every stopping criterion"""

    @abstractmethod
    def is_satisfied(self, round_index: int, **metrics: Any) -> bool:
        """
        Decide if the loop is over

        :param round_index: Number of rounds done so far
        :param metrics: Metrics of the last round
        :return: True when no further round must run
        """

    def to_dict(self) -> dict[str, Any]:
        return {"kind": type(self).__name__}


class AbstractFLStoppingCriterion(AbstractStoppingCriterion, ABC):
    """Stops the training rounds of a cluster"""


class AbstractClusteringStoppingCriterion(AbstractStoppingCriterion, ABC):
    """Stops the clustering rounds of a container"""


class _FixedRounds:
    def __init__(self, max_rounds: int) -> None:
        if max_rounds < 1:
            raise FactError(FactErrorCodes.BAD_CONFIG, "max_rounds must be positive")
        self.max_rounds = max_rounds

    def is_satisfied(self, round_index: int, **metrics: Any) -> bool:  # pylint: disable=unused-argument
        return round_index >= self.max_rounds

    def to_dict(self) -> dict[str, Any]:
        return {"kind": type(self).__name__, "max_rounds": self.max_rounds}

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.max_rounds})"


class FixedRoundFLStoppingCriterion(_FixedRounds, AbstractFLStoppingCriterion):
    """Satisfied once a fixed number of training rounds ran"""


class FixedRoundClusteringStoppingCriterion(_FixedRounds, AbstractClusteringStoppingCriterion):
    """Satisfied once a fixed number of clustering rounds ran"""


def fl_criterion_from_dict(data: dict[str, Any]) -> AbstractFLStoppingCriterion:
    if data.get("kind") != FixedRoundFLStoppingCriterion.__name__:
        raise FactError(FactErrorCodes.BAD_CONFIG, f"unknown stopping criterion {data.get('kind')}")
    return FixedRoundFLStoppingCriterion(int(data["max_rounds"]))


def clustering_criterion_from_dict(data: dict[str, Any]) -> AbstractClusteringStoppingCriterion:
    if data.get("kind") != FixedRoundClusteringStoppingCriterion.__name__:
        raise FactError(FactErrorCodes.BAD_CONFIG, f"unknown stopping criterion {data.get('kind')}")
    return FixedRoundClusteringStoppingCriterion(int(data["max_rounds"]))
