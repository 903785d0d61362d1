"""Linear system solution for assembled MNA systems."""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg


class EngineError(Exception):
    pass


class SingularMatrixError(EngineError):
    def __init__(self, unknown_index: int, message: str = ""):
        self.unknown_index = unknown_index
        super().__init__(message or f"singular system at unknown {unknown_index}")


class TopologyError(EngineError):
    pass


class ConvergenceError(EngineError):
    def __init__(self, message: str, worst_node: str | None = None,
                 residual: float = float("nan")):
        self.worst_node = worst_node
        self.residual = residual
        super().__init__(message)


_PIVOT_RTOL = 1e-14


def solve_dense(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense LU with partial pivoting and a zero-pivot guard."""
    lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = max(np.abs(A).max(), 1.0)
    bad = np.nonzero(diag <= _PIVOT_RTOL * scale)[0]
    if bad.size:
        raise SingularMatrixError(int(bad[0]))
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def solve_sparse(A, b: np.ndarray) -> np.ndarray:
    """Sparse LU (SuperLU, partial pivoting) with singularity detection.

    Accepts a scipy sparse matrix or a dense array; the dense path is
    delegated to :func:`solve_dense`.
    """
    if not scipy.sparse.issparse(A):
        return solve_dense(np.asarray(A, dtype=complex)
                           if np.iscomplexobj(A) or np.iscomplexobj(b)
                           else np.asarray(A, dtype=float), b)
    try:
        lu = scipy.sparse.linalg.splu(A.tocsc())
        x = lu.solve(b)
    except RuntimeError as exc:  # SuperLU signals singularity this way
        raise SingularMatrixError(-1, f"sparse factorization failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError(int(np.nonzero(~np.isfinite(x))[0][0]))
    return x
