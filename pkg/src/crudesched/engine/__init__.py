"""Kernel selection: compiled extension when built, pure-Python source otherwise.

``crudesched.engine.core`` is written in Cython pure-Python mode, so the same
file serves as both the extension source and the interpreted fallback.  Set
``CRUDESCHED_PURE=1`` to force the interpreted kernel (used by the benchmark
and the twin-kernel tests).
"""
from __future__ import annotations

import importlib.util
import os
from pathlib import Path

__all__ = ["core", "KERNEL_COMPILED", "load_pure_kernel"]


def load_pure_kernel():
    """Load the interpreted kernel from source, even when the extension exists."""
    src = Path(__file__).parent / "core.py"
    spec = importlib.util.spec_from_file_location(
        "crudesched.engine._core_pure", src
    )
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


if os.environ.get("CRUDESCHED_PURE"):
    core = load_pure_kernel()
else:
    from . import core  # the .so shadows core.py when built

KERNEL_COMPILED: bool = core.KERNEL_COMPILED
