from ._sparselab import *  # noqa: F401,F403
from ._sparselab import __version__  # noqa: F401
