"""Linesearch Douglas-Rachford and ADMM for nonconvex composite problems."""

from .core import *  # noqa: F401,F403
from .directions import *  # noqa: F401,F403
from .quadcache import *  # noqa: F401,F403
from .drs import *  # noqa: F401,F403
from .drs import default_stepsize, admissible_C  # noqa: F401
from .admm import *  # noqa: F401,F403
from .admm import default_penalty  # noqa: F401
from .problems import *  # noqa: F401,F403

__version__ = "0.1.0"
