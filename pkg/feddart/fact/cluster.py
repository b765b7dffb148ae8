"""
This module contains the clusters of clients, the container holding them and the clustering step regrouping the
clients between two clustering rounds.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from sklearn.cluster import KMeans

from .._compat import Self
from ..core.models import ParameterVector
from ..errors import FactError
from .aggregation import aggregate_fedavg
from .enums import ClusteringAlgorithm, FactErrorCodes
from .models import AbstractModel
from .stopping import (AbstractClusteringStoppingCriterion, AbstractFLStoppingCriterion,
                       FixedRoundClusteringStoppingCriterion, FixedRoundFLStoppingCriterion,
                       clustering_criterion_from_dict, fl_criterion_from_dict)


@dataclass
class Cluster:
    """A group of clients sharing one global model"""
    cluster_id: int
    client_names: list[str]
    model: AbstractModel
    fl_stopping_criterion: AbstractFLStoppingCriterion = field(
        default_factory=lambda: FixedRoundFLStoppingCriterion(1))

    def to_dict(self) -> dict[str, Any]:
        return {
            "cluster_id": self.cluster_id,
            "client_names": list(self.client_names),
            "model": self.model.to_dict(),
            "fl_stopping_criterion": self.fl_stopping_criterion.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        return cls(int(data["cluster_id"]), list(data["client_names"]), AbstractModel.from_dict(data["model"]),
                   fl_criterion_from_dict(data["fl_stopping_criterion"]))


@dataclass
class ClusterContainer:
    """The clusters of a run, their clustering algorithm and the criterion ending the clustering rounds"""
    clusters: list[Cluster]
    clustering_algorithm: ClusteringAlgorithm = ClusteringAlgorithm.STATIC
    n_clusters: int = 1
    clustering_stopping_criterion: AbstractClusteringStoppingCriterion = field(
        default_factory=lambda: FixedRoundClusteringStoppingCriterion(1))
    seed: int = 0

    @classmethod
    def single(cls, model: AbstractModel, client_names: list[str],
               fl_stopping_criterion: Optional[AbstractFLStoppingCriterion] = None) -> Self:
        """Container holding one static cluster of every client, for one clustering round"""
        cluster = Cluster(0, list(client_names), model,
                          fl_stopping_criterion or FixedRoundFLStoppingCriterion(1))
        return cls([cluster], ClusteringAlgorithm.STATIC, 1, FixedRoundClusteringStoppingCriterion(1))

    @property
    def client_names(self) -> list[str]:
        return [name for cluster in self.clusters for name in cluster.client_names]

    def cluster_of(self, client_name: str) -> Cluster:
        for cluster in self.clusters:
            if client_name in cluster.client_names:
                return cluster
        raise KeyError(client_name)

    def validate(self) -> None:
        """
        Check that the clusters are non-empty and disjoint

        :raises FactError: BAD_CONFIG
        """
        if not self.clusters or not self.client_names:
            raise FactError(FactErrorCodes.BAD_CONFIG, "the container holds no client")
        if any(not c.client_names for c in self.clusters):
            raise FactError(FactErrorCodes.BAD_CONFIG, "empty cluster")
        if len(set(self.client_names)) != len(self.client_names):
            raise FactError(FactErrorCodes.BAD_CONFIG, "a client belongs to several clusters")
        if self.n_clusters < 1:
            raise FactError(FactErrorCodes.BAD_CONFIG, "n_clusters must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "clusters": [c.to_dict() for c in self.clusters],
            "clustering_algorithm": self.clustering_algorithm.value,
            "n_clusters": self.n_clusters,
            "clustering_stopping_criterion": self.clustering_stopping_criterion.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        return cls([Cluster.from_dict(c) for c in data["clusters"]],
                   ClusteringAlgorithm(data["clustering_algorithm"]), int(data["n_clusters"]),
                   clustering_criterion_from_dict(data["clustering_stopping_criterion"]), int(data.get("seed", 0)))


def _kmeans_labels(vectors: np.ndarray, k: int, seed: int) -> np.ndarray:
    if k == len(vectors):
        return np.arange(k)
    return KMeans(n_clusters=k, init="k-means++", n_init=10, random_state=seed).fit(vectors).labels_


def apply_clustering(container: ClusterContainer, client_params: dict[str, ParameterVector]) -> ClusterContainer:
    """
    Regroup the clients of a container. STATIC keeps the container as it is, KMEANS_ON_PARAMS runs seeded k-means on
    the flattened client parameters and gives every new cluster the centroid of its members as model parameters.
    A client without parameters joins the new cluster holding most of its former cluster-mates.

    :param container: Current clusters
    :param client_params: Last parameters returned by each client
    :return: The regrouped container, clusters ordered by their smallest client name
    """
    if container.clustering_algorithm == ClusteringAlgorithm.STATIC:
        return container

    names = sorted(n for n in container.client_names if n in client_params)
    k = container.n_clusters

    if k < 1 or k > len(names):
        raise FactError(FactErrorCodes.DEGENERATE_K, f"cannot build {k} clusters from {len(names)} clients")

    vectors = np.vstack([client_params[n].as_array() for n in names])
    labels = {name: int(label) for name, label in zip(names, _kmeans_labels(vectors, k, container.seed))}

    for name in sorted(set(container.client_names) - set(labels)):
        mates = [labels[m] for m in container.cluster_of(name).client_names if m in labels]
        votes = Counter(mates or labels.values())
        labels[name] = min(votes, key=lambda label: (-votes[label], label))

    groups: dict[int, list[str]] = {}
    for name in sorted(labels):
        groups.setdefault(labels[name], []).append(name)

    clusters = []
    for cluster_id, members in enumerate(sorted(groups.values(), key=min)):
        previous = container.cluster_of(members[0])
        model = previous.model.copy()
        model.parameters = aggregate_fedavg([client_params[m] for m in members if m in client_params], weighted=False)
        clusters.append(Cluster(cluster_id, members, model, previous.fl_stopping_criterion))

    return ClusterContainer(clusters, container.clustering_algorithm, container.n_clusters,
                            container.clustering_stopping_criterion, container.seed)
