"""
This module contains the commands of the `feddart` executable: run a DART-Server, run a worker, run a FACT experiment
and report the loss curves of a finished experiment.
"""

import argparse
import csv
import os
import sys
from pathlib import Path
from typing import IO, Optional, Sequence

import matplotlib
from dotenv import load_dotenv
from pydantic import ValidationError
from tabulate import tabulate

from ..config import KEY_ENV, ConfigErrorCodes, load_device_file, load_model, load_server_file
from ..errors import ConfigError, FactError, FedDartError, WorkflowError
from ..fact.cluster import Cluster, ClusterContainer
from ..fact.enums import ClusteringAlgorithm, FactErrorCodes
from ..fact.models import RoundMetrics, build_model
from ..fact.server import Server
from ..fact.stopping import FixedRoundClusteringStoppingCriterion, FixedRoundFLStoppingCriterion
from ..logger import LoggingManager
from ..parser import parse_args
from ..server.base import DartServer
from ..worker.core import Worker
from ..worker.enums import WorkerErrorCodes
from ..worker.models import WorkerConfig
from ..workflow.enums import WorkflowErrorCodes
from .enums import ExitCode
from .models import ExperimentConfig

METRICS_FILE = "metrics.jsonl"
MODEL_FILE = "model.json"
REPORT_COLUMNS = ["clustering_round", "training_round", "cluster_id", "loss", "devices", "sample_count"]

_BAD_CONFIG_CODES = {FactErrorCodes.BAD_CONFIG, FactErrorCodes.DEGENERATE_K}
_CONNECT_CODES = {WorkflowErrorCodes.CONNECT_FAILED, WorkflowErrorCodes.INIT_TIMEOUT}


def exit_code_of(exc: FedDartError) -> ExitCode:
    """Category of a fatal failure"""
    if isinstance(exc, ConfigError) or (isinstance(exc, FactError) and exc.code in _BAD_CONFIG_CODES):
        return ExitCode.BAD_CONFIG
    if isinstance(exc, WorkflowError) and exc.code in _CONNECT_CODES:
        return ExitCode.CONNECT_FAILURE
    return ExitCode.TRAINING_FAILURE


def load_experiment(path: str | Path, test_mode: bool = False, seed: Optional[int] = None) -> ExperimentConfig:
    """
    Load an experiment file, relative paths are taken relative to the file

    :param path: Path of the experiment file
    :param test_mode: Force the test mode
    :param seed: Seed replacing the one of the file
    :return: The checked experiment
    """
    config = load_model(ExperimentConfig, path, seed=seed, test_mode=True if test_mode else None)
    config = config.resolved(Path(path).resolve().parent)
    config.check_files()
    return config


def build_container(config: ExperimentConfig, client_names: list[str]) -> ClusterContainer:
    """
    Clusters of an experiment: a single cluster of every client, regrouped by the clustering algorithm after every
    clustering round

    :param config: Experiment
    :param client_names: Clients taking part
    :return: The container to initialize
    """
    structure = dict(config.model.structure)
    if "n_features" not in structure and config.data:
        structure["n_features"] = next(iter(config.data.values())).n_features

    model = build_model(config.model.model_type, structure, config.model.hyperparameters, config.aggregation)
    cluster = Cluster(0, sorted(client_names), model, FixedRoundFLStoppingCriterion(config.fl_rounds))

    return ClusterContainer([cluster], config.clustering, config.k,
                            FixedRoundClusteringStoppingCriterion(config.clustering_rounds), config.seed)


def _client_names(config: ExperimentConfig) -> list[str]:
    if config.device_file is not None:
        return load_device_file(config.device_file).names
    return sorted(config.data)


def run_experiment(config: ExperimentConfig) -> Server:
    """
    Initialize and train the clusters of an experiment, write the metrics of every round and export the models

    :param config: Checked experiment
    :return: The server, already shut down
    """
    output_dir = config.output_dir
    output_dir.mkdir(parents=True, exist_ok=True)

    names = _client_names(config)
    if not names:
        raise ConfigError(ConfigErrorCodes.COULD_NOT_PARSE_CONFIGURATION, "no client: give a device file or data")

    container = build_container(config, names)
    if config.clustering == ClusteringAlgorithm.KMEANS_ON_PARAMS and config.k > len(names):
        raise FactError(FactErrorCodes.DEGENERATE_K, f"cannot build {config.k} clusters from {len(names)} clients")

    server = Server(config.server_file, config.device_file, test_mode=config.test_mode, seed=config.seed,
                    max_wait_seconds=config.max_wait_seconds, output_dir=output_dir,
                    client_data={name: spec.model_dump(mode="json") for name, spec in config.data.items()})

    with open(output_dir / METRICS_FILE, "w", encoding="utf-8") as metrics_file:
        def _write(metrics: RoundMetrics) -> None:
            metrics_file.write(metrics.model_dump_json() + "\n")
            metrics_file.flush()

        server.add_metrics_callback(_write)
        try:
            server.initialization(container)
            server.training(config.task_parameters)
            server.export(output_dir / MODEL_FILE)
        finally:
            server.shutdown()

    return server


def cmd_run(args: argparse.Namespace) -> ExitCode:
    logger = LoggingManager.get_logger("cli", app="CLI")

    try:
        config = load_experiment(args.config, args.test_mode, args.seed)
        run_experiment(config)
    except FedDartError as exc:
        logger.error(f"experiment failed: {exc}")
        return exit_code_of(exc)

    logger.success(f"experiment done, results in {config.output_dir}")
    return ExitCode.OK


def cmd_server(args: argparse.Namespace) -> ExitCode:
    logger = LoggingManager.get_logger("cli", app="CLI")

    try:
        config = load_server_file(args.config)
    except ConfigError as exc:
        logger.error(str(exc))
        return ExitCode.BAD_CONFIG

    if config.log_file is not None:
        LoggingManager().add_file(config.log_file)
        logger.info(f"server logs written to {config.log_file}")

    try:
        DartServer(config).run()
    finally:
        if config.log_file is not None:
            LoggingManager().remove_file(config.log_file)
    return ExitCode.OK


def cmd_worker(args: argparse.Namespace) -> ExitCode:
    logger = LoggingManager.get_logger("cli", app="CLI")

    try:
        config = load_model(WorkerConfig, args.config, key=os.getenv(KEY_ENV), seed=args.seed)
        worker = Worker(config)
    except FedDartError as exc:
        logger.error(str(exc))
        return ExitCode.BAD_CONFIG

    code = worker.run_loop()
    if code == WorkerErrorCodes.REFUSED:
        return ExitCode.BAD_CONFIG
    return ExitCode.OK if code == WorkerErrorCodes.OK else ExitCode.TRAINING_FAILURE


def read_metrics(path: str | Path) -> list[RoundMetrics]:
    """
    Parse a metrics file

    :param path: JSON-lines file written by the run command
    :return: The round metrics in file order
    :raises ConfigError: on the first malformed line, the message names its number
    """
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(ConfigErrorCodes.COULD_NOT_FIND_CONFIGURATION, f"{path}: {exc}") from exc

    metrics = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            metrics.append(RoundMetrics.model_validate_json(line))
        except ValidationError as exc:
            raise ConfigError(ConfigErrorCodes.COULD_NOT_PARSE_CONFIGURATION,
                              f"{path} line {number}: {exc.errors()[0]['msg']}") from exc
    return metrics


def _rows(metrics: Sequence[RoundMetrics]) -> list[list]:
    return [[m.clustering_round, m.training_round, m.cluster_id, m.loss, " ".join(m.devices), m.sample_count]
            for m in metrics]


def write_csv(metrics: Sequence[RoundMetrics], out: IO[str]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    writer.writerows(_rows(metrics))


def plot_losses(metrics: Sequence[RoundMetrics], path: str | Path) -> None:
    """Draw the loss of every cluster along its training rounds"""
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt  # pylint: disable=import-outside-toplevel

    curves: dict[int, list[float]] = {}
    for m in metrics:
        curves.setdefault(m.cluster_id, []).append(m.loss if m.loss is not None else float("nan"))

    fig, ax = plt.subplots()
    for cluster_id, losses in sorted(curves.items()):
        ax.plot(range(1, len(losses) + 1), losses, marker="o", label=f"cluster {cluster_id}")
    ax.set_xlabel("round")
    ax.set_ylabel("loss")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)


def cmd_report(args: argparse.Namespace, out: Optional[IO[str]] = None) -> ExitCode:
    logger = LoggingManager.get_logger("cli", app="CLI")
    out = out or sys.stdout

    try:
        metrics = read_metrics(args.metrics)
    except ConfigError as exc:
        logger.error(exc.message)
        return ExitCode.BAD_CONFIG

    if args.format == "table":
        out.write(tabulate(_rows(metrics), headers=REPORT_COLUMNS, floatfmt=".6g") + "\n")
    else:
        write_csv(metrics, out)

    if args.plot:
        plot_losses(metrics, args.plot)
        logger.info(f"loss curves drawn into {args.plot}")
    return ExitCode.OK


COMMANDS = {
    "server": cmd_server,
    "worker": cmd_worker,
    "run": cmd_run,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)

    load_dotenv()

    LoggingManager(args.logs, args.log_level, args.debug)

    return int(COMMANDS[args.command](args))
