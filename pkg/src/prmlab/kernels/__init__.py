"""Backend dispatch for the numeric hot loops.

The PRMLAB_BACKEND environment variable picks the implementation:

  auto   (default) use the numba jit kernels when numba imports, else numpy
  numba  require the jit kernels, fail if numba is unavailable
  numpy  force the pure-numpy fallback

Both backends expose the same functions; `benchmarks/bench_kernels.py`
compares them head to head.
"""

from __future__ import annotations

import os

_CHOICES = ("auto", "numba", "numpy")


def _select():
    choice = os.environ.get("PRMLAB_BACKEND", "auto").strip().lower()
    if choice not in _CHOICES:
        raise ValueError(f"PRMLAB_BACKEND must be one of {_CHOICES}, got {choice!r}")
    if choice in ("auto", "numba"):
        try:
            from . import accel

            return accel
        except ImportError:
            if choice == "numba":
                raise
    from . import reference

    return reference


_impl = _select()

BACKEND_NAME = _impl.BACKEND_NAME
forward_linear = _impl.forward_linear
forward_mlp = _impl.forward_mlp
softmax3 = _impl.softmax3
realized_loss_dz = _impl.realized_loss_dz
expected_loss_dz = _impl.expected_loss_dz
backward_linear = _impl.backward_linear
backward_mlp = _impl.backward_mlp
adam_update = _impl.adam_update


def backend_name() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return BACKEND_NAME
