"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``PIBT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

NATIVE = False
bfs_to = _pykernels.bfs_to
pibt_step = None

if os.environ.get("PIBT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        NATIVE = True
        bfs_to = _ckernels.bfs_to
        pibt_step = _ckernels.pibt_step


def name() -> str:
    return "cython" if NATIVE else "python"
