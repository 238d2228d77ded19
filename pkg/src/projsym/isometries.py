"""Reflection across a line and rotation about an axis, both fixing a vector x.

Both operators accept a single vector of shape ``(p,)`` or a stack of row
vectors of shape ``(n, p)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadBlock, DimensionMismatch, ZeroVector
from .linalg import as_vector, orthonormalize
from .rng import RandomStream

BLOCK_TOL = 1e-8


def unit(x, name="x") -> np.ndarray:
    """Return x / ||x||, raising ZeroVector when x = 0."""
    x = as_vector(x, name)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ZeroVector(f"{name} is the zero vector; its direction is undefined")
    return x / nx


def _check_dim(y, p):
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != p:
        raise DimensionMismatch(f"expected vectors of dimension {p}, got {y.shape[-1]}")
    return y


@dataclass(frozen=True, eq=False)
class ReflectionAboutLine:
    """The map y -> 2<y, a>a - y for a unit axis a."""

    axis: np.ndarray

    @property
    def p(self) -> int:
        return self.axis.shape[0]

    def __call__(self, y) -> np.ndarray:
        return reflect(self, y)

    def matrix(self) -> np.ndarray:
        a = self.axis
        return 2.0 * np.outer(a, a) - np.eye(self.p)


def make_reflection(x) -> ReflectionAboutLine:
    a = unit(x)
    a.flags.writeable = False
    return ReflectionAboutLine(a)


def reflect(op: ReflectionAboutLine, y) -> np.ndarray:
    y = _check_dim(y, op.p)
    a = op.axis
    return 2.0 * (y @ a)[..., None] * a - y


def make_axis_frame(x) -> np.ndarray:
    """Orthogonal ``(p, p)`` matrix whose first column is x / ||x||.

    Built from one Householder reflector H = I - 2vv^T/(v^T v) with
    v = x_hat + sign(x_hat[0]) e_1, which maps e_1 to -sign(x_hat[0]) x_hat;
    the first column is then rescaled by -sign so it equals x_hat. The sign
    choice keeps ||v|| >= 1, so there is no cancellation near x_hat = +-e_1.
    """
    xh = unit(x)
    p = xh.shape[0]
    s = 1.0 if xh[0] >= 0 else -1.0
    v = xh.copy()
    v[0] += s
    frame = np.eye(p) - (2.0 / (v @ v)) * np.outer(v, v)
    frame[:, 0] *= -s
    return frame


def _det(q: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(q)
    return float(sign * np.exp(logdet))


def haar_special_orthogonal(k: int, stream: RandomStream) -> np.ndarray:
    """Draw a k x k rotation uniformly (Haar) from SO(k).

    A Gaussian matrix is orthonormalized column by column; Gram-Schmidt leaves
    the triangular factor with a positive diagonal, which makes the result Haar
    on O(k). Negating the last column when the determinant is -1 maps the other
    coset onto SO(k) without distorting the measure.
    """
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    g = stream.standard_normal((k, k))
    q, rel = orthonormalize(g)
    if np.any(rel <= 1e-12):
        # probability zero; fall back to a fresh draw from a child stream
        return haar_special_orthogonal(k, stream.substream(0))
    if np.linalg.slogdet(q)[0] < 0:
        q[:, -1] = -q[:, -1]
    return q


def validate_block(block, k=None) -> np.ndarray:
    q = np.array(block, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise BadBlock(f"block must be square, got shape {q.shape}")
    if k is not None and q.shape[0] != k:
        raise BadBlock(f"block must be {k}x{k}, got {q.shape[0]}x{q.shape[1]}")
    if not np.all(np.isfinite(q)):
        raise BadBlock("block has non-finite entries")
    if q.size and np.max(np.abs(q.T @ q - np.eye(q.shape[0]))) > BLOCK_TOL:
        raise BadBlock("block is not orthogonal")
    if q.size and abs(_det(q) - 1.0) > BLOCK_TOL:
        raise BadBlock("block does not have determinant +1")
    return q


@dataclass(frozen=True, eq=False)
class AxisRotation:
    """The rotation V diag(1, Q) V^T about the first column of ``frame``."""

    frame: np.ndarray
    block: np.ndarray

    @property
    def p(self) -> int:
        return self.frame.shape[0]

    @property
    def axis(self) -> np.ndarray:
        return self.frame[:, 0]

    def __call__(self, y) -> np.ndarray:
        return apply_rotation(self, y)

    def matrix(self) -> np.ndarray:
        d = np.eye(self.p)
        d[1:, 1:] = self.block
        return self.frame @ d @ self.frame.T


def make_axis_rotation(x, block) -> AxisRotation:
    frame = make_axis_frame(x)
    q = validate_block(block, frame.shape[0] - 1)
    frame.flags.writeable = False
    q.flags.writeable = False
    return AxisRotation(frame, q)


def random_axis_rotation(x, stream: RandomStream) -> AxisRotation:
    """Rotation about x with a Haar-distributed block."""
    p = as_vector(x).shape[0]
    block = haar_special_orthogonal(p - 1, stream) if p > 1 else np.eye(0)
    return make_axis_rotation(x, block)


def apply_rotation(op: AxisRotation, y, explicit: bool = False) -> np.ndarray:
    """Apply the rotation to ``y``.

    The default path multiplies by V^T, the block, and V in turn without forming
    the p x p product. ``explicit=True`` materializes V diag(1, Q) V^T instead;
    it exists for cross-checking.
    """
    y = _check_dim(y, op.p)
    if explicit:
        return y @ op.matrix().T
    z = y @ op.frame
    z[..., 1:] = z[..., 1:] @ op.block.T
    return z @ op.frame.T


def invert_rotation(op: AxisRotation) -> AxisRotation:
    return AxisRotation(op.frame, op.block.T)
