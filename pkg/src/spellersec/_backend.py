"""Kernel backend selection.

Hot loops have two implementations: a numba-compiled one and a pure numpy
one. ``SPELLERSEC_NUMBA=0`` forces the numpy path; any other value (or the
flag being unset) uses numba when it is importable.
"""

import os

try:
    import numba  # noqa: F401

    _NUMBA_IMPORTABLE = True
except ImportError:  # pragma: no cover
    _NUMBA_IMPORTABLE = False


def numba_enabled() -> bool:
    """Whether the numba kernel path is active for this process."""
    flag = os.environ.get("SPELLERSEC_NUMBA", "1")
    return _NUMBA_IMPORTABLE and flag not in ("0", "false", "False")


def worker_count(explicit=None) -> int:
    """Resolve the worker count for parallel scoring.

    ``explicit`` wins over the ``SPELLERSEC_WORKERS`` environment variable;
    the default is single-process.
    """
    if explicit is not None:
        return max(1, int(explicit))
    return max(1, int(os.environ.get("SPELLERSEC_WORKERS", "1")))
