# SPDX-License-Identifier: Apache-2.0
"""Robust wideband precoding: scenario statistics, stochastic WMMSE, unfolded
approximation, EWSR evaluation, and complexity formulas.

The compiled extension normally lives inside this package. For in-tree builds
set RLDDU_EXT_DIR to the directory holding the ``_core`` extension.
"""

import os
import sys

try:
    from ._core import *  # noqa: F401,F403
    from ._core import __doc__ as _core_doc  # noqa: F401
except ImportError:
    _ext_dir = os.environ.get("RLDDU_EXT_DIR")
    if not _ext_dir:
        raise
    if _ext_dir not in sys.path:
        sys.path.insert(0, _ext_dir)
    from _core import *  # noqa: F401,F403

__version__ = "0.1.0"
