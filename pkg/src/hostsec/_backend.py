"""Kernel backend selection.

The compiled ``_core`` extension is used when importable; setting
``HOSTSEC_PURE_PYTHON=1`` forces the numpy fallback.
"""
import importlib
import os

BACKENDS = ("cython", "python")


def load(name=None):
    """Return the kernel module for ``name`` (``"cython"`` or ``"python"``).

    With ``name=None`` the best available backend is chosen.
    """
    if name == "python":
        return importlib.import_module("hostsec._fallback")
    if name == "cython":
        return importlib.import_module("hostsec._core")
    if name is not None:
        raise ValueError(f"unknown backend {name!r}")
    if os.environ.get("HOSTSEC_PURE_PYTHON", "") not in ("", "0"):
        return load("python")
    try:
        return load("cython")
    except ImportError:
        return load("python")


def available():
    """Names of the backends that can be imported in this environment."""
    names = []
    for name in BACKENDS:
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


kernels = load()
BACKEND = "cython" if kernels.__name__.endswith("_core") else "python"
