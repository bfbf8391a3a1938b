"""Kernel backend selection.

The time-stepping solver kernels exist twice: a numba ``@njit`` version and a
pure-NumPy version vectorised over the batch axis. Both perform the same
floating-point operations in the same order, so on a given platform they
produce identical results; the numba path is much faster for narrow batches.

Selection is controlled by the ``REFLECTSDE_NUMBA`` environment variable,
read once at import:

* unset or ``"1"``/``"auto"``: use numba when it imports, NumPy otherwise
  (``"1"`` raises if numba is missing);
* ``"0"``: force the pure-NumPy path.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("REFLECTSDE_NUMBA", "auto").strip().lower()

if _FLAG == "0":
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        if _FLAG == "1":
            raise RuntimeError(
                "REFLECTSDE_NUMBA=1 but numba is not importable"
            ) from None
        NUMBA_ENABLED = False


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
