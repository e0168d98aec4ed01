"""Symmetric linear operators with dense or edge-list storage.

Operators up to ``DENSE_LIMIT`` nodes are materialized as dense float64
matrices (dense eigensolvers need them anyway at desk scale). Larger
operators keep only the symmetric edge-list form and support matvec and
power iteration.
"""
from __future__ import annotations

import numpy as np

DENSE_LIMIT = 4096

_SYM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class SymOperator:
    """Immutable wrapper around a symmetric real matrix.

    Construct via :meth:`from_dense` or :meth:`from_edges`; the latter
    describes the matrix by its diagonal plus one value per unordered
    off-diagonal pair (i, j).
    """

    def __init__(self, *, dense=None, n=None, edges=None, offdiag=None, diag=None):
        if dense is not None:
            self._dense = _readonly(dense)
            self._n = self._dense.shape[0]
            self._edges = None
            self._offdiag = None
            self._diag = None
        else:
            self._dense = None
            self._n = int(n)
            self._edges = np.ascontiguousarray(edges, dtype=np.int64)
            self._edges.setflags(write=False)
            self._offdiag = _readonly(offdiag)
            self._diag = _readonly(diag)

    @classmethod
    def from_dense(cls, mat, sym_tol: float = _SYM_TOL) -> "SymOperator":
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        scale = np.abs(mat).max() if mat.size else 0.0
        asym = np.abs(mat - mat.T).max() if mat.size else 0.0
        if asym > sym_tol * max(scale, 1e-300):
            raise ValueError(
                f"matrix is not symmetric: max|M - M^T| = {asym:.3e} "
                f"exceeds {sym_tol:.1e} * max|M| = {sym_tol * scale:.3e}"
            )
        return cls(dense=0.5 * (mat + mat.T))

    @classmethod
    def from_edges(cls, n, edges, offdiag, diag) -> "SymOperator":
        """Symmetric matrix with M[i,j] = M[j,i] = offdiag_e on each pair and given diagonal."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        offdiag = np.asarray(offdiag, dtype=np.float64)
        diag = np.asarray(diag, dtype=np.float64)
        if offdiag.shape != (edges.shape[0],):
            raise ValueError("one off-diagonal value per edge required")
        if diag.shape != (n,):
            raise ValueError(f"diagonal must have length {n}")
        if n <= DENSE_LIMIT:
            m = np.zeros((n, n))
            m[edges[:, 0], edges[:, 1]] = offdiag
            m[edges[:, 1], edges[:, 0]] = offdiag
            m[np.arange(n), np.arange(n)] = diag
            return cls(dense=m)
        return cls(n=n, edges=edges, offdiag=offdiag, diag=diag)

    @property
    def n(self) -> int:
        return self._n

    @property
    def shape(self):
        return (self._n, self._n)

    @property
    def is_dense(self) -> bool:
        return self._dense is not None

    def dense(self) -> np.ndarray:
        if self._dense is None:
            raise ValueError(
                f"operator with n={self._n} > {DENSE_LIMIT} is matvec-only"
            )
        return self._dense

    def diagonal(self) -> np.ndarray:
        if self._dense is not None:
            return np.diag(self._dense).copy()
        return self._diag.copy()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply to a vector (n,) or a stack of columns (n, c)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self._n:
            raise ValueError(f"operand has {x.shape[0]} rows, operator has n={self._n}")
        if self._dense is not None:
            return self._dense @ x
        y = self._diag.reshape(-1, *([1] * (x.ndim - 1))) * x
        ei, ej = self._edges[:, 0], self._edges[:, 1]
        w = self._offdiag.reshape(-1, *([1] * (x.ndim - 1)))
        np.add.at(y, ei, w * x[ej])
        np.add.at(y, ej, w * x[ei])
        return y

    def max_abs(self) -> float:
        """Largest entry magnitude (tolerance scale)."""
        if self._dense is not None:
            return float(np.abs(self._dense).max()) if self._n else 0.0
        cands = [0.0]
        if self._diag.size:
            cands.append(float(np.abs(self._diag).max()))
        if self._offdiag.size:
            cands.append(float(np.abs(self._offdiag).max()))
        return max(cands)

    def scaled(self, alpha: float, shift: float = 0.0) -> "SymOperator":
        """Return alpha * M + shift * I as a new operator."""
        if self._dense is not None:
            m = alpha * self._dense
            m[np.arange(self._n), np.arange(self._n)] += shift
            return SymOperator(dense=m)
        return SymOperator(
            n=self._n,
            edges=self._edges,
            offdiag=alpha * self._offdiag,
            diag=alpha * self._diag + shift,
        )

    def __repr__(self):
        kind = "dense" if self.is_dense else "edges"
        return f"SymOperator(n={self._n}, {kind})"
