"""Covariance and precision estimation for matrix-variate data with missing values."""

from ._core import *  # noqa: F401,F403
from ._core import Error, run_command

__all__ = [name for name in dir() if not name.startswith("_")]
