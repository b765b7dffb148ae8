"""
FACT: federated aggregation and clustering toolkit built on the Fed-DART workflow manager.
"""

from .aggregation import aggregate_fedavg
from .cluster import Cluster, ClusterContainer, apply_clustering
from .enums import AggregationAlgorithm, ClusteringAlgorithm, FactErrorCodes, ModelType
from .models import (MODELS, AbstractModel, Hyperparameters, LinearModel, LogisticModel, ModelConfig, RoundMetrics,
                     build_model, local_train_fedprox)
from .server import Server
from .stopping import (AbstractClusteringStoppingCriterion, AbstractFLStoppingCriterion,
                       AbstractStoppingCriterion, FixedRoundClusteringStoppingCriterion, FixedRoundFLStoppingCriterion)
