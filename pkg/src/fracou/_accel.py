"""Backend selection for the hot numeric kernels.

Every kernel module ships two implementations of its inner loops: a numba
``@njit`` version and a pure-numpy version. The numba path is used when numba
imports cleanly and ``FRACOU_DISABLE_NUMBA`` is unset (or ``0``). The choice
can be flipped at runtime with :func:`use_numba`, which the test suite and the
benchmark use to run both paths on identical inputs.
"""

from __future__ import annotations

import contextlib
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

ENV_FLAG = "FRACOU_DISABLE_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "0").strip().lower() not in ("", "0", "false", "no")


_enabled = HAVE_NUMBA and not _env_disabled()


def enabled() -> bool:
    """True when kernels dispatch to their numba implementation."""
    return _enabled


def backend() -> str:
    return "numba" if _enabled else "numpy"


@contextlib.contextmanager
def use_numba(flag: bool):
    """Temporarily force the numba (``True``) or numpy (``False``) path."""
    global _enabled
    old = _enabled
    _enabled = bool(flag) and HAVE_NUMBA
    try:
        yield
    finally:
        _enabled = old


def njit(*args, **kwargs):
    """``numba.njit`` with caching on; identity decorator without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
