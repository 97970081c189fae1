"""Blind video quality assessment core."""

from ._core import *  # noqa: F401,F403
from ._core import ConfigError, DataError, NumericError  # noqa: F401
