"""
This module contains the enumerations of the command line.
"""

from enum import IntEnum


class ExitCode(IntEnum):
    """Process exit codes, one per category of fatal failure"""
    OK = 0
    BAD_CONFIG = 2
    CONNECT_FAILURE = 3
    TRAINING_FAILURE = 4
