"""Wasserstein-1 estimation with 1-Lipschitz networks, exact optimal transport
and minimax shape fitting."""

from ._neemo import *  # noqa: F401,F403
from ._neemo import __doc__  # noqa: F401

__version__ = "0.1.0"
