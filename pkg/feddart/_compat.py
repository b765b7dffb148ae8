"""Backports of ``enum.StrEnum`` and ``typing.Self`` (Python 3.11+) for Python 3.10."""

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        """Enum whose members are also (and must be) strings, as in Python 3.11."""

        def __new__(cls, *values):
            value = str(*values)
            member = str.__new__(cls, value)
            member._value_ = value
            return member

        __str__ = str.__str__
        __format__ = str.__format__

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

__all__ = ["Self", "StrEnum"]
