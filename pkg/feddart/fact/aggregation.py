"""
This module contains the aggregation of client parameter vectors by (weighted) federated averaging.
"""

import math
from typing import Sequence

from ..core.models import ParameterVector
from ..errors import FactError
from .enums import FactErrorCodes


def aggregate_fedavg(results: Sequence[ParameterVector], weighted: bool) -> ParameterVector:
    """
    Component-wise mean of client parameter vectors. Weighted averaging uses p_k = n_k / sum(n), the unweighted one
    gives every client 1 / K. Every component is an exactly rounded sum, so the result does not depend on the order
    of the clients.

    :param results: Client parameter vectors
    :param weighted: Weight the clients by their sample count
    :return: The aggregated vector, its sample count is the total of the clients
    """
    if not results:
        raise FactError(FactErrorCodes.EMPTY_RESULTS, "nothing to aggregate")

    length = len(results[0])
    if any(len(r) != length for r in results):
        raise FactError(FactErrorCodes.LENGTH_MISMATCH,
                        f"parameter lengths differ: {sorted({len(r) for r in results})}")

    total = sum(r.sample_count for r in results)

    if weighted:
        if total == 0:
            raise FactError(FactErrorCodes.ZERO_WEIGHT, "every client reported zero samples")
        weights = [r.sample_count / total for r in results]
    else:
        weights = [1 / len(results)] * len(results)

    values = [math.fsum(p * r.values[j] for p, r in zip(weights, results)) for j in range(length)]

    if not all(math.isfinite(v) for v in values):
        raise FactError(FactErrorCodes.NONFINITE_INPUT, "aggregation produced non finite parameters")

    return ParameterVector(values=values, sample_count=total, shape=results[0].shape)
