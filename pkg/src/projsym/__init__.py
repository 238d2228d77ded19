"""Random Gaussian subspace projection and its symmetries about the projected vector.

For a fixed x in R^p and a random m-dimensional subspace spanned by Gaussian
columns, the projection Px has the same distribution as its reflection across
x and as any rotation of it about x. This package computes Px, builds both
isometries, and checks the claim exactly (per realization) and statistically.
"""

__version__ = "0.1.0"

from .errors import (
    AxisMismatch,
    BadBlock,
    DimensionMismatch,
    ProjSymError,
    RankDeficient,
    TooFewSamples,
    ZeroVector,
)
from .isometries import (
    AxisRotation,
    ReflectionAboutLine,
    apply_rotation,
    haar_special_orthogonal,
    invert_rotation,
    make_axis_frame,
    make_axis_rotation,
    make_reflection,
    random_axis_rotation,
    reflect,
)
from .lab import (
    ExactCheckResult,
    StatTestResult,
    TestReport,
    check_gs_equivariance,
    check_reflection_equivariance,
    check_rotation_equivariance,
    direction_uniformity,
    energy_two_sample,
    ks_two_sample,
    run_exact_suite,
    run_statistical_suite,
)
from .linalg import ColumnSet, OrthonormalBasis, gram_schmidt, inner, norm, project_onto_basis
from .projector import (
    EnsembleSpec,
    ProjectionSample,
    decompose,
    draw_projections,
    project_x,
    sample_ensemble,
    sample_projection_batch,
)
from .rng import RandomStream
