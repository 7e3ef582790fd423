"""Retinal screening toolkit bindings."""

from ._core import *  # noqa: F401,F403
from ._core import RetscreenError, __doc__  # noqa: F401
