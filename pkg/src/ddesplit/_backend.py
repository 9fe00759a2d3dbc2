"""Select the compiled or pure-Python inner loops at import time.

The compiled extension is used when it was built and importable, unless the
environment variable ``DDESPLIT_PURE_PYTHON`` is set to a non-empty value
other than ``0``. Callers always go through :data:`core` so that
:func:`use_backend` can swap implementations at runtime (tests, benchmarks).
"""

import contextlib
import os

from . import _core_py

try:
    from . import _core as _core_ext
except ImportError:  # extension not built
    _core_ext = None

_BACKENDS = {"python": _core_py}
if _core_ext is not None:
    _BACKENDS["compiled"] = _core_ext


def _initial():
    forced = os.environ.get("DDESPLIT_PURE_PYTHON", "")
    if forced and forced != "0":
        return "python"
    return "compiled" if _core_ext is not None else "python"


name = _initial()
core = _BACKENDS[name]


def available():
    return sorted(_BACKENDS)


def set_backend(which):
    global core, name
    if which not in _BACKENDS:
        raise ValueError(f"backend {which!r} not available; have {available()}")
    name = which
    core = _BACKENDS[which]


@contextlib.contextmanager
def use_backend(which):
    previous = name
    set_backend(which)
    try:
        yield core
    finally:
        set_backend(previous)
