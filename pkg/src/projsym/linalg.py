"""Dense vector arithmetic, Gram-Schmidt and orthogonal projection.

Vectors are plain 1-D float64 numpy arrays. A set of m columns in R^p is held
by :class:`ColumnSet` as a ``(p, m)`` array; an orthonormal basis produced by
:func:`gram_schmidt` is held by :class:`OrthonormalBasis` in the same layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RankDeficient

DEFAULT_RANK_TOL = 1e-12


def as_vector(a, name="vector") -> np.ndarray:
    """Coerce ``a`` to a finite, non-empty 1-D float64 array (copied, read-only)."""
    v = np.array(a, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    v.flags.writeable = False
    return v


def _same_dim(a, b):
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(f"dimension {a.shape[-1]} does not match {b.shape[-1]}")


def inner(a, b) -> float:
    """Euclidean inner product of two vectors of equal dimension."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_dim(a, b)
    return float(a @ b)


def norm(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt(a @ a))


@dataclass(frozen=True, eq=False)
class ColumnSet:
    """An ordered set of m column vectors in R^p, stored as a ``(p, m)`` array."""

    columns: np.ndarray

    def __post_init__(self):
        cols = np.array(self.columns, dtype=np.float64)
        if cols.ndim != 2 or cols.shape[0] < 1 or cols.shape[1] < 1:
            raise ValueError(f"columns must be a non-empty (p, m) array, got shape {cols.shape}")
        if cols.shape[1] > cols.shape[0]:
            raise ValueError(f"need m <= p, got p={cols.shape[0]}, m={cols.shape[1]}")
        if not np.all(np.isfinite(cols)):
            raise ValueError("columns have non-finite entries")
        cols.flags.writeable = False
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_vectors(cls, vectors) -> "ColumnSet":
        """Build from a sequence of m vectors, each of length p."""
        vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
        if len({v.shape for v in vectors}) > 1:
            raise DimensionMismatch("all columns must have the same dimension")
        return cls(np.column_stack(vectors))

    @property
    def p(self) -> int:
        return self.columns.shape[0]

    @property
    def m(self) -> int:
        return self.columns.shape[1]

    def __len__(self):
        return self.m

    def __getitem__(self, j) -> np.ndarray:
        return self.columns[:, j]

    def __iter__(self):
        return iter(self.columns.T)

    def map(self, fn) -> "ColumnSet":
        """Apply a vector map to every column, keeping column order."""
        return ColumnSet.from_vectors([fn(c) for c in self])


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """k orthonormal vectors in R^p stored as the columns of a ``(p, k)`` array.

    ``tol`` is the tolerance at which orthonormality was validated.
    """

    vectors: np.ndarray
    tol: float

    @property
    def p(self) -> int:
        return self.vectors.shape[0]

    @property
    def k(self) -> int:
        return self.vectors.shape[1]

    def __getitem__(self, j) -> np.ndarray:
        return self.vectors[:, j]

    def gram_error(self) -> float:
        """Largest entrywise deviation of the Gram matrix from the identity."""
        g = self.vectors.T @ self.vectors
        return float(np.max(np.abs(g - np.eye(self.k))))


def orthonormalize(a: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL):
    """Modified Gram-Schmidt with one re-orthogonalization pass, batched.

    Parameters
    ----------
    a : ndarray, shape (..., p, m)
        Columns to orthonormalize. Leading axes are independent problems.
    rank_tol : float
        A column is flagged when its residual norm is at most ``rank_tol``
        times the largest input column norm of its problem.

    Returns
    -------
    u : ndarray, shape (..., p, m)
        Orthonormalized columns. Flagged columns are left unnormalized.
    rel_residual : ndarray, shape (..., m)
        Residual norm of each column divided by the largest column norm.

    Notes
    -----
    Columns are processed in input order and no sign normalization is applied,
    so the diagonal of the implied triangular factor is positive. That keeps
    the recursion commuting with any orthogonal map applied to all columns.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    a = np.asarray(a, dtype=np.float64)
    # rows layout: (..., m, p) keeps each vector contiguous
    w = np.swapaxes(a, -1, -2).copy()
    m = w.shape[-2]
    scale = np.sqrt(np.max(np.sum(w * w, axis=-1), axis=-1))
    rel = np.empty(w.shape[:-1])
    single = w.ndim == 2
    for j in range(m):
        v = w[..., j, :]
        for i in range(j):
            ui = w[..., i, :]
            if single:
                v -= (ui @ v) * ui
            else:
                v -= np.sum(ui * v, axis=-1)[..., None] * ui
        if j:
            prev = w[..., :j, :]
            coef = np.einsum("...ip,...p->...i", prev, v)
            v -= np.einsum("...i,...ip->...p", coef, prev)
        nv = np.sqrt(np.sum(v * v, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            rel[..., j] = np.where(scale > 0, nv / scale, 0.0)
        ok = rel[..., j] > rank_tol
        v /= np.where(ok, nv, 1.0)[..., None]
    return np.swapaxes(w, -1, -2), rel


def gram_schmidt(cols, rank_tol: float = DEFAULT_RANK_TOL) -> OrthonormalBasis:
    """Orthonormalize a column set in order.

    The returned basis satisfies span(u_1..u_j) = span(col_1..col_j) for every
    prefix j.

    Raises
    ------
    RankDeficient
        If some column's residual is at most ``rank_tol`` times the largest
        column norm. ``err.column`` is the 1-based index of the first such column.
    """
    if not isinstance(cols, ColumnSet):
        cols = ColumnSet(cols)
    u, rel = orthonormalize(cols.columns, rank_tol)
    bad = np.flatnonzero(rel <= rank_tol)
    if bad.size:
        j = int(bad[0])
        raise RankDeficient(j + 1, float(rel[j]))
    u.flags.writeable = False
    # validation tolerance scales with roundoff in the Gram matrix
    return OrthonormalBasis(u, tol=64 * np.finfo(np.float64).eps * max(cols.p, 1))


def project_onto_basis(x, basis: OrthonormalBasis) -> np.ndarray:
    """Orthogonal projection sum_j <x, u_j> u_j of ``x`` onto the span of ``basis``."""
    x = np.asarray(x, dtype=np.float64)
    u = basis.vectors if isinstance(basis, OrthonormalBasis) else np.asarray(basis)
    if x.shape[-1] != u.shape[0]:
        raise DimensionMismatch(f"vector has dimension {x.shape[-1]}, basis has {u.shape[0]}")
    return u @ (u.T @ x)
