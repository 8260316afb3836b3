"""EscapeRoom gridworlds and goal-graph exploration-complexity analysis.

The heavy lifting lives in the compiled `_core` extension; this package
re-exports its public surface.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
