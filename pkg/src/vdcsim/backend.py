"""Kernel selection.

The compiled extension is used when it imports cleanly; otherwise the numpy
fallback is used.  ``VDCSIM_BACKEND=python`` (or ``c``) forces a choice.
"""

from __future__ import annotations

import importlib
import logging
import os

log = logging.getLogger(__name__)

_MODULES = {"c": "vdcsim._ckernels", "python": "vdcsim._pykernels"}


def load(name: str | None = None):
    """Return a kernel module; ``name`` is ``"c"``, ``"python"`` or ``None`` (auto)."""
    if name is None:
        name = os.environ.get("VDCSIM_BACKEND", "auto").lower()
    if name == "auto":
        try:
            return importlib.import_module(_MODULES["c"])
        except ImportError as exc:
            log.info("compiled kernels unavailable (%s); using numpy fallback", exc)
            return importlib.import_module(_MODULES["python"])
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; expected 'c', 'python' or 'auto'")
    return importlib.import_module(_MODULES[name])


def available() -> list[str]:
    names = []
    for key, mod in _MODULES.items():
        try:
            importlib.import_module(mod)
        except ImportError:
            continue
        names.append(key)
    return names


kernels = load()
