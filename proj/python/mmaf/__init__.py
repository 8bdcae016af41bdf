"""Coalescing Brownian particle flow: simulation and Monte Carlo experiments.

Thin Python layer over the compiled extension. Everything public lives in
the extension module; this package just re-exports it.
"""

from ._mmaf import *  # noqa: F401,F403
from ._mmaf import __version__  # noqa: F401
