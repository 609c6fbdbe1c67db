"""Transitional-problem curricula on a synthetic arithmetic domain."""

try:
    from ._levelup import *  # noqa: F401,F403  (installed package layout)
except ImportError:  # in-tree build: the module sits next to the package
    from _levelup import *  # noqa: F401,F403

__version__ = "0.1.0"
