try:
    from ._dstein import *  # noqa: F401,F403
except ImportError:
    from _dstein import *  # noqa: F401,F403
