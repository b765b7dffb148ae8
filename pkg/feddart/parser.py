"""
Arguments parser for Fed-DART.
"""

import argparse
from typing import Optional, Sequence

from .logger import LogLevel


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--log-level",
        type=LogLevel,
        choices=list(LogLevel),
        default=LogLevel.INFO,
        help="Minimal level of the displayed logs",
    )
    parser.add_argument(
        "-l", "--logs", action="store_true", help="Store the logs in a file as well"
    )
    parser.add_argument("-d", "--debug", action="store_true", help="Debug mode")


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="feddart",
        description="Server-centric federated learning runtime and clustering toolkit",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    server = commands.add_parser(
        "server",
        help="Run a DART-Server",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    server.add_argument(
        "-c",
        "--config",
        type=str,
        default="./config/server.json",
        help="File path of the server file",
    )
    _add_common_arguments(server)

    worker = commands.add_parser(
        "worker",
        help="Run a DART-Client executing the tasks of one device",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    worker.add_argument(
        "-c",
        "--config",
        type=str,
        default="./config/worker.json",
        help="File path of the worker file",
    )
    worker.add_argument("--seed", type=int, default=None, help="Seed replacing the one of the worker file")
    _add_common_arguments(worker)

    run = commands.add_parser(
        "run",
        help="Run a FACT experiment, in test mode or against a DART-Server",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    run.add_argument(
        "-c",
        "--config",
        type=str,
        default="./config/experiment.json",
        help="File path of the experiment file",
    )
    run.add_argument(
        "-t", "--test-mode", action="store_true", help="Simulate the server and the clients in this process"
    )
    run.add_argument("--seed", type=int, default=None, help="Seed replacing the one of the experiment file")
    _add_common_arguments(run)

    report = commands.add_parser(
        "report",
        help="Summarize the loss curves of a metrics file",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    report.add_argument(
        "metrics",
        type=str,
        help="File path of the metrics.jsonl written by the run command",
    )
    report.add_argument(
        "-f",
        "--format",
        choices=["csv", "table"],
        default="csv",
        help="Output format of the summary",
    )
    report.add_argument(
        "-p", "--plot", type=str, default=None, help="Draw the loss curves into this image file"
    )
    _add_common_arguments(report)

    return parser.parse_args(argv)
