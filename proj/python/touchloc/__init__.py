"""Tactile global localization: meshes, touch rendering, codebooks and a particle filter."""

from ._core import *  # noqa: F401,F403
from ._core import git_describe  # noqa: F401

__version__ = "0.1.0"
