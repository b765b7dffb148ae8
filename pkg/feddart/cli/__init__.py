"""
Command line of Fed-DART.
"""

from .core import cmd_report, cmd_run, cmd_server, cmd_worker, main, read_metrics, run_experiment
from .enums import ExitCode
from .models import ExperimentConfig, ModelSpec
