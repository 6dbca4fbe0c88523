"""Hot loops, dispatched to numba or numpy according to ``pdmho._accel``."""

from ._accel import USE_NUMBA, backend_name

if USE_NUMBA:
    from ._kernels_numba import (
        banded_matmul,
        banded_matvec,
        bisect_lowest,
        inverse_iteration,
        ql_implicit,
        tridiag_solve,
    )
else:
    from ._kernels_numpy import (  # noqa: F401
        banded_matmul,
        banded_matvec,
        bisect_lowest,
        inverse_iteration,
        ql_implicit,
        tridiag_solve,
    )

__all__ = [
    "backend_name",
    "banded_matmul",
    "banded_matvec",
    "bisect_lowest",
    "inverse_iteration",
    "ql_implicit",
    "tridiag_solve",
]
