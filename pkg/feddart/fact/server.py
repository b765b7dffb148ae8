"""
This module contains the FACT server: the routines initializing the clusters on the clients, training every cluster by
federated rounds and regrouping the clients between clustering rounds. All communication goes through a
WorkflowManager, in test mode or against a running DART-Server alike.
"""

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Optional

from ..core.models import Handle, ParameterVector, TaskResult, TaskStatus
from ..errors import FactError
from ..logger import LoggingManager
from ..workflow.manager import WorkflowManager
from ..worker.registry import FunctionRegistry
from .cluster import Cluster, ClusterContainer, apply_clustering
from .enums import FactErrorCodes
from .models import AbstractModel, RoundMetrics
from .stopping import AbstractFLStoppingCriterion

MetricsCallback = Callable[[RoundMetrics], None]
PostTrainingHook = Callable[["Server", ClusterContainer], None]


def _model_description(model: AbstractModel, with_parameters: bool = False) -> dict[str, Any]:
    description = model.to_dict()
    parameters = description.pop("parameters")
    if with_parameters:
        description["global_model_parameters"] = parameters
    return description


class Server:
    """
    Server side of FACT. `initialization` builds the clusters and the local models, `training` runs the clustering
    rounds until the clustering stopping criterion is satisfied.
    """

    def __init__(self, server_file: str | Path, device_file: Optional[str | Path] = None, test_mode: bool = False,
                 workflow_manager: Optional[WorkflowManager] = None, seed: int = 0, max_wait_seconds: float = 60.0,
                 poll_interval_seconds: float = 0.05, output_dir: str | Path = "./output",
                 client_data: Optional[dict[str, dict[str, Any]]] = None,
                 registry: Optional[FunctionRegistry] = None) -> None:
        self.logger = LoggingManager.get_logger("fact-server", app="FACT")
        self.server_file = server_file
        self.device_file = device_file
        self.seed = seed
        self.max_wait_seconds = max_wait_seconds
        self.poll_interval_seconds = poll_interval_seconds
        self.client_data = client_data or {}

        self.workflow_manager = workflow_manager or WorkflowManager(test_mode=test_mode, output_dir=output_dir,
                                                                    seed=seed, registry=registry)

        self.container: Optional[ClusterContainer] = None
        self.client_params: dict[str, ParameterVector] = {}
        self.metrics: list[RoundMetrics] = []
        self.clustering_round = 0

        self._metrics_callbacks: list[MetricsCallback] = []
        self._post_training_hooks: list[PostTrainingHook] = []
        self._device_rounds: dict[str, int] = {}
        self._evaluations = 0
        self._mu = threading.Lock()

    def add_metrics_callback(self, callback: MetricsCallback) -> None:
        """Called with the metrics of every training round of every cluster"""
        self._metrics_callbacks.append(callback)

    def add_post_training_hook(self, hook: PostTrainingHook) -> None:
        """Called once `training` is done, to save the trained models or evaluate them"""
        self._post_training_hooks.append(hook)

    # -----------------------------------------------------------------------------------------------------------------
    # Initialization

    def initialization(self, model_or_container: AbstractModel | ClusterContainer,
                       fl_stopping_criterion: Optional[AbstractFLStoppingCriterion] = None,
                       init_params: Optional[dict[str, Any]] = None) -> ClusterContainer:
        """
        Start Fed-DART and initialize the local models. A bare model is wrapped into a container holding a single
        static cluster of every connected client, for one clustering round.

        :param model_or_container: Model shared by every client, or the clusters to train
        :param fl_stopping_criterion: Criterion of the single cluster built from a bare model
        :param init_params: Extra parameters of the init task
        :return: The initialized container
        """
        first_model = model_or_container if isinstance(model_or_container, AbstractModel) \
            else model_or_container.clusters[0].model if model_or_container.clusters else None
        if first_model is None:
            raise FactError(FactErrorCodes.BAD_CONFIG, "the container holds no cluster")

        self._create_init_task(first_model, init_params)
        self.workflow_manager.start_fed_dart(self.server_file, self.device_file)
        names = self.workflow_manager.get_all_device_names()

        if isinstance(model_or_container, AbstractModel):
            container = ClusterContainer.single(model_or_container, names, fl_stopping_criterion)
        else:
            container = model_or_container
        container.validate()

        for cluster in container.clusters:
            self._init_cluster(cluster, cluster.client_names)

        self.container = container
        self.logger.success(f"{len(container.clusters)} clusters initialized on {len(container.client_names)} clients")
        return container

    def initialization_by_model(self, model: AbstractModel,
                                fl_stopping_criterion: Optional[AbstractFLStoppingCriterion] = None) -> ClusterContainer:
        return self.initialization(model, fl_stopping_criterion)

    def _create_init_task(self, model: AbstractModel, init_params: Optional[dict[str, Any]]) -> None:
        default_params = {**_model_description(model), **(init_params or {})}
        per_device = {name: {**default_params, "data": data} for name, data in self.client_data.items()}
        self.workflow_manager.create_init_task(default_params, "init", per_device_params=per_device)

    def _init_cluster(self, cluster: Cluster, client_names: list[str]) -> None:
        connected = set(self.workflow_manager.get_all_device_names())
        participants = [name for name in client_names if name in connected]
        if not participants:
            return

        params = _model_description(cluster.model, with_parameters=True)
        handle = self.workflow_manager.start_task({name: params for name in participants}, "init",
                                                  self.max_wait_seconds,
                                                  task_name=f"fact-init-c{cluster.cluster_id}-cr{self.clustering_round}")
        status = self._wait(handle)
        failed = [r.device_name for r in self.workflow_manager.get_task_result(handle) if r.failed]

        if failed or status.missing_devices:
            self.logger.warning(f"cluster {cluster.cluster_id}: init failed on {failed + sorted(status.missing_devices)}")

    # -----------------------------------------------------------------------------------------------------------------
    # Training

    def training(self, task_parameters: Optional[dict[str, Any]] = None) -> ClusterContainer:
        """
        Train every cluster, regroup the clients and repeat until the clustering stopping criterion is satisfied.
        The clusters of a clustering round are trained in parallel.

        :param task_parameters: Parameters of the learn tasks, they override the hyperparameters of the models
        :return: The trained container
        """
        if self.container is None:
            raise FactError(FactErrorCodes.NOT_INITIALIZED, "initialization must run before training")

        task_parameters = dict(task_parameters or {})
        rounds = 0

        while True:
            container = self.container
            with ThreadPoolExecutor(max_workers=len(container.clusters), thread_name_prefix="fact-cluster") as pool:
                futures = [pool.submit(self.train_cluster, cluster, task_parameters, self.clustering_round)
                           for cluster in container.clusters]
                for future in futures:
                    future.result()

            rounds += 1
            self.clustering_round += 1
            params = {name: self.client_params[name] for name in container.client_names if name in self.client_params}
            regrouped = apply_clustering(container, params)
            self.container = regrouped

            if container.clustering_stopping_criterion.is_satisfied(rounds, metrics=self.metrics):
                break

            self._reinit_moved_clients(container, regrouped)

        self.logger.success(f"training done after {rounds} clustering rounds")
        for hook in self._post_training_hooks:
            hook(self, self.container)
        return self.container

    def _reinit_moved_clients(self, before: ClusterContainer, after: ClusterContainer) -> None:
        if after is before:
            return

        for cluster in after.clusters:
            members = set(cluster.client_names)
            moved = [name for name in cluster.client_names
                     if set(before.cluster_of(name).client_names) != members]
            if moved:
                self.logger.info(f"clients {moved} moved to cluster {cluster.cluster_id}")
                self._init_cluster(cluster, moved)

    def _next_round(self, device_name: str) -> int:
        with self._mu:
            round_index = self._device_rounds.get(device_name, 0)
            self._device_rounds[device_name] = round_index + 1
            return round_index

    def train_cluster(self, cluster: Cluster, task_parameters: dict[str, Any], clustering_round: int) -> None:
        """
        Federated training of one cluster: the global parameters of the cluster are sent to its clients, the
        results available before the timeout are aggregated into the new global parameters

        :param cluster: Cluster to train
        :param task_parameters: Parameters of the learn tasks
        :param clustering_round: Current clustering round, used to name the tasks
        :raises FactError: ROUND_EMPTY when a round ends without any result
        """
        training_round = 0

        while True:
            connected = set(self.workflow_manager.get_all_device_names())
            participants = [name for name in cluster.client_names if name in connected]
            if not participants:
                raise FactError(FactErrorCodes.ROUND_EMPTY, f"no client of cluster {cluster.cluster_id} is connected")

            global_parameters = cluster.model.parameters.model_dump()
            parameter_dict = {
                name: {"global_model_parameters": global_parameters,
                       "task_parameters": {**task_parameters, "seed": self.seed, "round": self._next_round(name)}}
                for name in participants
            }

            handle = self.workflow_manager.start_task(
                parameter_dict, "learn", self.max_wait_seconds,
                task_name=f"fact-c{cluster.cluster_id}-cr{clustering_round}-tr{training_round}")
            status = self._wait(handle)
            results = sorted(self.workflow_manager.get_task_result(handle), key=lambda r: r.device_name)

            succeeded = [r for r in results if not r.failed]
            if not succeeded:
                raise FactError(FactErrorCodes.ROUND_EMPTY,
                                f"cluster {cluster.cluster_id} round {training_round}: no client delivered a result")

            vectors = [ParameterVector.model_validate(r.result_dict["parameters"]) for r in succeeded]
            cluster.model.aggregate(vectors)

            metrics = self._round_metrics(cluster, clustering_round, training_round, status, results, vectors)
            with self._mu:
                for result, vector in zip(succeeded, vectors):
                    self.client_params[result.device_name] = vector
            self._emit(metrics)

            training_round += 1
            if cluster.fl_stopping_criterion.is_satisfied(training_round, loss=metrics.loss, metrics=metrics):
                return

    @staticmethod
    def _round_metrics(cluster: Cluster, clustering_round: int, training_round: int, status: TaskStatus,
                       results: list[TaskResult], vectors: list[ParameterVector]) -> RoundMetrics:
        succeeded = [r for r in results if not r.failed]
        total = sum(v.sample_count for v in vectors)
        losses = [float(r.result_dict.get("loss", 0.0)) for r in succeeded]

        if total > 0:
            loss = sum(loss_k * v.sample_count for loss_k, v in zip(losses, vectors)) / total
        else:
            loss = sum(losses) / len(losses)

        return RoundMetrics(clustering_round=clustering_round, training_round=training_round,
                            cluster_id=cluster.cluster_id, loss=loss,
                            devices=[r.device_name for r in succeeded],
                            missing_devices=sorted(status.missing_devices),
                            failed_devices=[r.device_name for r in results if r.failed],
                            durations={r.device_name: r.duration_seconds for r in results},
                            sample_count=total)

    def _emit(self, metrics: RoundMetrics) -> None:
        with self._mu:
            self.metrics.append(metrics)
            for callback in self._metrics_callbacks:
                callback(metrics)
        self.logger.info(f"cluster {metrics.cluster_id} cr {metrics.clustering_round} tr {metrics.training_round}: "
                         f"loss {metrics.loss:.6g} over {len(metrics.devices)} clients")

    def _wait(self, handle: Handle) -> TaskStatus:
        while True:
            status = self.workflow_manager.get_task_status(handle)
            if status.state.is_terminal:
                return status
            time.sleep(self.poll_interval_seconds)

    # -----------------------------------------------------------------------------------------------------------------
    # After training

    def evaluate(self) -> dict[int, dict[str, dict[str, Any]]]:
        """
        Evaluate the model of every cluster on the local data of its clients

        :return: The metrics per cluster id and device name
        """
        if self.container is None:
            raise FactError(FactErrorCodes.NOT_INITIALIZED, "nothing to evaluate before initialization")

        connected = set(self.workflow_manager.get_all_device_names())
        evaluation: dict[int, dict[str, dict[str, Any]]] = {}

        for cluster in self.container.clusters:
            participants = [name for name in cluster.client_names if name in connected]
            evaluation[cluster.cluster_id] = {}
            if not participants:
                continue

            params = {"global_model_parameters": cluster.model.parameters.model_dump()}
            handle = self.workflow_manager.start_task(
                {name: params for name in participants}, "evaluate", self.max_wait_seconds,
                task_name=f"fact-eval-c{cluster.cluster_id}-{self._evaluations}")
            self._wait(handle)
            evaluation[cluster.cluster_id] = {r.device_name: r.result_dict
                                              for r in self.workflow_manager.get_task_result(handle) if not r.failed}

        self._evaluations += 1
        return evaluation

    def export(self, path: str | Path) -> None:
        """
        Write the trained models as JSON: the model of the first cluster at the top level, every cluster below
        """
        if self.container is None:
            raise FactError(FactErrorCodes.NOT_INITIALIZED, "nothing to export before initialization")

        model = self.container.clusters[0].model.to_dict()
        document = {
            "model_type": model["model_type"],
            "model_config": model["model_config"],
            "parameters": model["parameters"],
            "clusters": self.container.to_dict(),
        }

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as file:
            json.dump(document, file, indent=2)

    @staticmethod
    def load_export(path: str | Path) -> ClusterContainer:
        with open(path, "r", encoding="utf-8") as file:
            return ClusterContainer.from_dict(json.load(file)["clusters"])

    def shutdown(self) -> None:
        self.workflow_manager.close()
