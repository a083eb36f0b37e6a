"""Kernel selection: compiled Cython sweep when available, pure Python
otherwise. Set SEQSCREEN_PURE_PYTHON=1 to force the fallback."""

import os

COMPILED = False

if os.environ.get("SEQSCREEN_PURE_PYTHON", "") != "1":
    try:
        from ._cd import cd_epoch  # noqa: F401
        COMPILED = True
    except ImportError:
        pass

if not COMPILED:
    from ._fallback import cd_epoch  # noqa: F401

__all__ = ["cd_epoch", "COMPILED"]
