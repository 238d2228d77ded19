"""Gaussian column ensembles and the random projection Px.

Trial ``i`` under root seed ``s`` draws its p x m Gaussian matrix from the
substream ``(s, TRIALS, i)``, so a batch's content does not depend on chunking
or on how many worker threads produced it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .isometries import unit
from .linalg import DEFAULT_RANK_TOL, ColumnSet, as_vector, gram_schmidt, orthonormalize, project_onto_basis
from .rng import RETRY, RandomStream, trial_stream

CHUNK = 1024


def check_dims(p: int, m: int):
    if not 1 <= m <= p:
        raise ValueError("m must satisfy 1 <= m <= p")


@dataclass(frozen=True)
class EnsembleSpec:
    p: int
    m: int
    seed: int
    stream_index: int = 0

    def __post_init__(self):
        check_dims(self.p, self.m)


@dataclass(frozen=True, eq=False)
class ProjectionSample:
    """One realization of Px split into its component along x and the rest."""

    stream_index: int
    px: np.ndarray
    alpha: float
    perp: np.ndarray

    @property
    def perp_norm(self) -> float:
        return float(np.linalg.norm(self.perp))


def sample_ensemble(spec: EnsembleSpec) -> ColumnSet:
    """m i.i.d. N(0, I_p) columns drawn from the spec's trial substream."""
    g = trial_stream(spec.seed, spec.stream_index).standard_normal((spec.p, spec.m))
    return ColumnSet(g)


def project_x(x, E: ColumnSet, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthogonal projection of x onto span(E), via a Gram-Schmidt basis of E."""
    x = as_vector(x, "x")
    if not isinstance(E, ColumnSet):
        E = ColumnSet(E)
    if x.shape[0] != E.p:
        raise DimensionMismatch(f"x has dimension {x.shape[0]}, columns have {E.p}")
    return project_onto_basis(x, gram_schmidt(E, rank_tol))


def decompose(x, v):
    """Split v into alpha * x_hat + perp with perp orthogonal to x.

    Works on a single vector or on rows of an ``(n, p)`` array.
    """
    xh = unit(x)
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != xh.shape[0]:
        raise DimensionMismatch(f"v has dimension {v.shape[-1]}, x has {xh.shape[0]}")
    alpha = v @ xh
    perp = v - np.multiply.outer(alpha, xh)
    return alpha, perp


@dataclass(frozen=True, eq=False)
class ProjectionBatch:
    """Array form of a batch of projection samples (rows are trials)."""

    x: np.ndarray
    m: int
    seed: int
    stream_index: np.ndarray
    px: np.ndarray
    alpha: np.ndarray
    perp: np.ndarray

    def __len__(self):
        return self.px.shape[0]

    @property
    def perp_norm(self) -> np.ndarray:
        return np.linalg.norm(self.perp, axis=1)

    def samples(self) -> list[ProjectionSample]:
        return [
            ProjectionSample(int(i), px, float(a), r)
            for i, px, a, r in zip(self.stream_index, self.px, self.alpha, self.perp)
        ]


def _project_stack(x, gauss):
    u, rel = orthonormalize(gauss)
    ok = np.all(rel > DEFAULT_RANK_TOL, axis=-1)
    coef = np.matmul(np.swapaxes(u, -1, -2), x)
    px = np.matmul(u, coef[..., None])[..., 0]
    return px, ok


def _chunk(x, m, seed, indices):
    p = x.shape[0]
    gauss = np.stack([trial_stream(seed, i).standard_normal((p, m)) for i in indices])
    px, ok = _project_stack(x, gauss)
    for row in np.flatnonzero(~ok):
        i = int(indices[row])
        g = RandomStream(seed, (RETRY, i)).standard_normal((p, m))
        px[row] = project_x(x, ColumnSet(g))
    return px


def draw_projections(x, m: int, n: int, seed: int, start: int = 0, workers: int = 1) -> ProjectionBatch:
    """Draw Px for trials ``start .. start + n - 1`` as arrays.

    A trial whose Gaussian draw is numerically rank deficient is redrawn once
    from its retry substream; a second failure aborts with RankDeficient.
    """
    x = as_vector(x, "x")
    unit(x)
    check_dims(x.shape[0], m)
    if n < 1:
        raise ValueError("n must be >= 1")
    idx = np.arange(start, start + n)
    chunks = [idx[k:k + CHUNK] for k in range(0, n, CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _chunk(x, m, seed, c), chunks))
    else:
        parts = [_chunk(x, m, seed, c) for c in chunks]
    px = np.concatenate(parts)
    alpha, perp = decompose(x, px)
    return ProjectionBatch(x, m, seed, idx, px, alpha, perp)


def sample_projection_batch(x, m: int, n: int, seed: int, workers: int = 1) -> list[ProjectionSample]:
    """n independent realizations of Px using stream indices 0 .. n-1."""
    return draw_projections(x, m, n, seed, workers=workers).samples()
