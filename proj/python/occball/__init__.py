"""Cartpole fundamental limits, identification, H-infinity synthesis and SAC."""

from ._occball import *  # noqa: F401,F403
from ._occball import __version__  # noqa: F401
