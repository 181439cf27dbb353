"""Backend selection for the hot convolution kernels.

Set LOWRANKCNN_BACKEND=numpy or LOWRANKCNN_BACKEND=numba to force a path;
by default numba is used when importable.  Both backends produce bit
identical convolution outputs (see numpy_ops docstring), so the flag trades
speed only.
"""

import os

from . import numpy_ops

_ENV = "LOWRANKCNN_BACKEND"
_active = None


def _load(name):
    if name == "numpy":
        return numpy_ops
    if name == "numba":
        from . import numba_ops

        return numba_ops
    raise ValueError(f"{_ENV} must be 'numpy' or 'numba', not '{name}'")


def active():
    """Return the active kernel module, resolving it on first use."""
    global _active
    if _active is None:
        choice = os.environ.get(_ENV)
        if choice:
            _active = _load(choice)
        else:
            try:
                _active = _load("numba")
            except ImportError:
                _active = numpy_ops
    return _active


def use(name):
    """Force a backend by name; intended for tests and benchmarks."""
    global _active
    _active = _load(name)
    return _active


def reset():
    """Drop any forced backend; the next call re-resolves from the env."""
    global _active
    _active = None
