"""Kernel selection: the compiled sweep when it was built, else pure Python.

Set ``BISGSAMP_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import logging
import os
from types import ModuleType

from . import _pykernel

log = logging.getLogger(__name__)

try:
    from . import _ckernel  # type: ignore[attr-defined]
except ImportError:  # extension not built
    _ckernel = None


def available() -> list[str]:
    return ["python"] + (["cython"] if _ckernel is not None else [])


def get_kernel(name: str | None = None) -> ModuleType:
    """Return the kernel module for `name` ('cython', 'python' or None for the default)."""
    if name is None:
        name = os.environ.get("BISGSAMP_BACKEND", "auto")
    if name == "python":
        return _pykernel
    if name == "cython":
        if _ckernel is None:
            raise RuntimeError("compiled kernel not built; reinstall with Cython and a C compiler")
        return _ckernel
    if name != "auto":
        raise ValueError(f"unknown backend {name!r}")
    return _ckernel if _ckernel is not None else _pykernel


DEFAULT = get_kernel()
