"""Cutpoints and local times of transient nearest-neighbour walks on the half-line."""

from ._cutwalk import *  # noqa: F401,F403
from ._cutwalk import __version__  # noqa: F401
