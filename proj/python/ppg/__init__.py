"""Phasic policy gradient: C++ core with toy environments and a training
harness, exposed through the `_core` extension module.

When the package is installed (scikit-build-core places `_core` next to this
file) the import is direct; during development the extension can also be
picked up from a CMake build tree via the PPG_CORE_DIR environment variable.
"""

import os
import sys

try:
    from ._core import *  # noqa: F401,F403
    from . import _core as core  # noqa: F401
except ImportError:  # pragma: no cover - dev-tree fallback
    _dir = os.environ.get("PPG_CORE_DIR")
    if not _dir:
        raise
    sys.path.insert(0, _dir)
    from _core import *  # noqa: F401,F403
    import _core as core  # noqa: F401

__version__ = "0.1.0"
