"""Exact equivariance checks and Monte Carlo equality-in-distribution tests.

Two tiers:

* exact: for a single realization E, projecting x onto the transformed columns
  must equal the transformed projection of x (and Gram-Schmidt must commute
  with the isometry). These are identities, checked as relative residuals.
* statistical: independent batches of Px and of T(Px), with T a reflection
  across x or a rotation about x, must be indistinguishable.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from .errors import AxisMismatch, TooFewSamples
from .isometries import (
    AxisRotation,
    ReflectionAboutLine,
    apply_rotation,
    invert_rotation,
    make_axis_frame,
    make_reflection,
    random_axis_rotation,
    reflect,
    unit,
)
from .linalg import ColumnSet, as_vector, gram_schmidt
from .projector import check_dims, decompose, draw_projections, project_x
from .rng import EXACT, HAAR, PERMUTATION, RandomStream

EXACT_TOL = 1e-10
AXIS_TOL = 1e-10
ENERGY_CAP = 2000
N_PERM = 499
SEED_PASS_FRACTION = 0.9
SNAP = 1e-12
CONTROLS = ("none", "reflect-off-axis", "rotate-off-axis")


@dataclass
class ExactCheckResult:
    check_name: str
    trials: int
    max_residual: float
    tol: float
    pass_: bool = field(init=False)

    def __post_init__(self):
        self.pass_ = bool(self.max_residual <= self.tol)

    def to_dict(self):
        return {
            "check_name": self.check_name,
            "trials": self.trials,
            "max_residual": float(self.max_residual),
            "tol": float(self.tol),
            "pass": self.pass_,
        }


@dataclass
class StatTestResult:
    test_name: str
    statistic: float
    p_value: float
    n_samples: int
    n_permutations: int
    alpha: float
    reject: bool = field(init=False)
    seed: int | None = None
    excluded: int = 0

    def __post_init__(self):
        self.reject = bool(self.p_value < self.alpha)

    def to_dict(self):
        d = asdict(self)
        d["statistic"] = float(self.statistic)
        d["p_value"] = float(self.p_value)
        return d


@dataclass
class TestReport:
    config: dict
    exact_checks: list[ExactCheckResult]
    stat_tests: list[StatTestResult]
    seeds_required: int = 0

    __test__ = False  # not a pytest class

    def seed_verdicts(self, prefix: str = "") -> dict[int, bool]:
        """Per-seed pass/fail over the stat tests whose name starts with ``prefix``."""
        out: dict[int, bool] = {}
        for t in self.stat_tests:
            if t.test_name.startswith(prefix):
                out[t.seed] = out.get(t.seed, True) and not t.reject
        return out

    @property
    def seeds_passed(self) -> int:
        return sum(self.seed_verdicts().values())

    @property
    def exact_pass(self) -> bool:
        return all(c.pass_ for c in self.exact_checks)

    @property
    def overall_pass(self) -> bool:
        return self.exact_pass and self.seeds_passed >= self.seeds_required

    def to_dict(self):
        return {
            "config": self.config,
            "exact_checks": [c.to_dict() for c in self.exact_checks],
            "stat_tests": [t.to_dict() for t in self.stat_tests],
            "seeds_passed": self.seeds_passed,
            "seeds_required": self.seeds_required,
            "overall_pass": self.overall_pass,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------- exact tier


def _apply(iso, y):
    if isinstance(iso, ReflectionAboutLine):
        return reflect(iso, y)
    if isinstance(iso, AxisRotation):
        return apply_rotation(iso, y)
    raise TypeError(f"not an isometry: {iso!r}")


def _map_columns(iso, E: ColumnSet) -> ColumnSet:
    return ColumnSet(_apply(iso, E.columns.T).T)


def check_reflection_equivariance(x, E: ColumnSet, op: ReflectionAboutLine | None = None) -> float:
    """||P_{R(E)} x - R(P_E x)|| / ||x|| for the reflection R across x."""
    x = as_vector(x, "x")
    op = make_reflection(x) if op is None else op
    lhs = project_x(x, _map_columns(op, E))
    rhs = reflect(op, project_x(x, E))
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(x))


def _check_axis(x, rot: AxisRotation):
    if np.linalg.norm(rot.axis - unit(x)) > AXIS_TOL:
        raise AxisMismatch("rotation axis differs from x / ||x||")


def check_rotation_equivariance(x, E: ColumnSet, rot: AxisRotation) -> float:
    """||P_{Q(E)} x - Q(P_E x)|| / ||x|| for a rotation Q about x."""
    x = as_vector(x, "x")
    _check_axis(x, rot)
    lhs = project_x(x, _map_columns(rot, E))
    rhs = apply_rotation(rot, project_x(x, E))
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(x))


def check_gs_equivariance(x, E: ColumnSet, iso) -> float:
    """Largest column distance between GS(iso(E)) and iso(GS(E))."""
    if isinstance(iso, AxisRotation):
        _check_axis(x, iso)
    lhs = gram_schmidt(_map_columns(iso, E)).vectors
    rhs = _apply(iso, gram_schmidt(E).vectors.T).T
    return float(np.max(np.linalg.norm(lhs - rhs, axis=0)))


def check_inverse_round_trip(rot: AxisRotation, y) -> float:
    """||Q^{-1}(Q y) - y|| / ||y||."""
    y = np.asarray(y, dtype=np.float64)
    back = apply_rotation(invert_rotation(rot), apply_rotation(rot, y))
    ny = np.linalg.norm(y)
    return float(np.linalg.norm(back - y) / ny) if ny > 0 else float(np.linalg.norm(back))


EXACT_CHECKS = (
    "reflection_equivariance",
    "rotation_equivariance",
    "rotation_inverse_round_trip",
    "gs_reflection_equivariance",
    "gs_rotation_equivariance",
)


def exact_trial(stream: RandomStream, p=None, m=None, x=None) -> dict[str, float]:
    """All exact residuals for one random configuration drawn from ``stream``.

    Unset ``p`` is drawn from 2..64, unset ``m`` from 1..p, unset ``x`` is Gaussian.
    """
    if x is not None:
        x = as_vector(x, "x")
        p = x.shape[0]
    if p is None:
        p = int(stream.integers(2, 65))
    if m is None:
        m = int(stream.integers(1, p + 1))
    check_dims(p, m)
    if x is None:
        x = stream.standard_normal(p)
    E = ColumnSet(stream.standard_normal((p, m)))
    rot = random_axis_rotation(x, stream.substream(HAAR))
    refl = make_reflection(x)
    px = project_x(x, E)
    return {
        "reflection_equivariance": check_reflection_equivariance(x, E, refl),
        "rotation_equivariance": check_rotation_equivariance(x, E, rot),
        "rotation_inverse_round_trip": check_inverse_round_trip(rot, px) if np.any(px) else 0.0,
        "gs_reflection_equivariance": check_gs_equivariance(x, E, refl),
        "gs_rotation_equivariance": check_gs_equivariance(x, E, rot),
    }


def run_exact_suite(n: int, seed: int, p=None, m=None, x=None, tol: float = EXACT_TOL,
                    workers: int = 1) -> list[ExactCheckResult]:
    """Run every exact check over ``n`` random configurations and keep the worst residual."""
    if n < 1:
        raise ValueError("n must be >= 1")
    root = RandomStream(seed, (EXACT,))

    def one(i):
        return exact_trial(root.substream(i), p, m, x)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(n)))
    else:
        rows = [one(i) for i in range(n)]
    return [ExactCheckResult(name, n, max(r[name] for r in rows), tol) for name in EXACT_CHECKS]


# ---------------------------------------------------------- two-sample tests


def energy_two_sample(A, B, n_perm: int, stream: RandomStream, alpha: float = 0.01,
                      test_name: str = "energy") -> StatTestResult:
    """Energy-distance two-sample test with a permutation p-value.

    The statistic is the V-statistic 2 mean|a-b| - mean|a-a'| - mean|b-b'|.
    The p-value uses the add-one rule, (1 + #{T_perm >= T_obs}) / (n_perm + 1).
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[0] < 2 or B.shape[0] < 2:
        raise TooFewSamples("energy test needs at least 2 samples per side")
    if n_perm < 99:
        raise ValueError("n_perm must be >= 99")
    na, nb = A.shape[0], B.shape[0]
    N = na + nb
    Z = np.vstack([A, B])
    D = cdist(Z, Z)
    # column 0 is the observed labelling
    labels = np.zeros((N, n_perm + 1))
    labels[:na, 0] = 1.0
    for k in range(1, n_perm + 1):
        labels[stream.permutation(N)[:na], k] = 1.0
    DL = D @ labels
    s_aa = np.einsum("ik,ik->k", labels, DL)
    s_a = labels.T @ D.sum(axis=1)
    s_ab = s_a - s_aa
    s_bb = D.sum() - 2.0 * s_ab - s_aa
    T = 2.0 * s_ab / (na * nb) - s_aa / na**2 - s_bb / nb**2
    obs = T[0]
    # slack absorbs summation-order roundoff between identical labellings
    slack = 1e-12 * (D.sum() / N**2)
    exceed = int(np.count_nonzero(T[1:] >= obs - slack))
    p_value = (1 + exceed) / (n_perm + 1)
    return StatTestResult(test_name, float(max(obs, 0.0)), p_value, N, n_perm, alpha)


def ks_two_sample(a, b, alpha: float = 0.01, test_name: str = "ks") -> StatTestResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size < 8 or b.size < 8:
        raise TooFewSamples("KS test needs at least 8 samples per side")
    res = stats.ks_2samp(a, b, method="asymp")
    return StatTestResult(test_name, float(res.statistic), float(min(max(res.pvalue, 0.0), 1.0)),
                          a.size + b.size, 0, alpha)


def direction_uniformity(perps, frame, alpha: float = 0.01, scale: float = 1.0,
                         zero_tol: float = 1e-12, test_name: str = "direction_uniformity") -> StatTestResult:
    """Rayleigh test that perpendicular directions are uniform on the sphere.

    ``perps`` are in original coordinates and must be orthogonal to the
    frame's first column. They are expressed in frame coordinates 2..p, giving
    directions on the unit sphere of R^d with d = p - 1. Under uniformity
    d * n * |mean direction|^2 is asymptotically chi-squared with d degrees of
    freedom. Vectors shorter than ``zero_tol * scale`` are excluded and counted.
    """
    perps = np.atleast_2d(np.asarray(perps, dtype=np.float64))
    frame = np.asarray(frame, dtype=np.float64)
    p = frame.shape[0]
    coords = perps @ frame
    lengths = np.linalg.norm(perps, axis=1)
    keep = lengths > zero_tol * scale
    if np.any(np.abs(coords[keep, 0]) > 1e-8 * lengths[keep]):
        raise AxisMismatch("perpendicular components are not orthogonal to the frame axis")
    n = int(np.count_nonzero(keep))
    if n < 10 * p:
        raise TooFewSamples(f"need at least {10 * p} nonzero perpendicular components, got {n}")
    d = p - 1
    u = coords[keep, 1:] / lengths[keep, None]
    rbar = u.mean(axis=0)
    stat = d * n * float(rbar @ rbar)
    return StatTestResult(test_name, stat, float(stats.chi2.sf(stat, d)), n, 0, alpha,
                          excluded=int(perps.shape[0] - n))


# ------------------------------------------------------------- the suite


def tilted_axis(x, angle_deg: float) -> np.ndarray:
    """Unit vector at ``angle_deg`` from x, tilted towards the frame's second column."""
    frame = make_axis_frame(x)
    t = math.radians(angle_deg)
    if frame.shape[0] < 2:
        raise ValueError("an off-axis control needs p >= 2")
    return math.cos(t) * frame[:, 0] + math.sin(t) * frame[:, 1]


def suite_operators(x, seed: int, control: str = "none", angle: float = 45.0):
    """The reflection and rotation a suite run uses for ``seed``.

    With ``control="none"`` both fix x. The off-axis controls replace one of
    them by the same kind of map about an axis tilted ``angle`` degrees away.
    """
    if control not in CONTROLS:
        raise ValueError(f"unknown control {control!r}")
    refl_axis = tilted_axis(x, angle) if control == "reflect-off-axis" else x
    rot_axis = tilted_axis(x, angle) if control == "rotate-off-axis" else x
    refl = make_reflection(refl_axis)
    rot = random_axis_rotation(rot_axis, RandomStream(seed, (HAAR,)))
    return refl, rot


def _seed_tests(x, m, n, seed, alpha, control, angle, n_perm, energy_cap):
    xn = float(np.linalg.norm(x))
    p = x.shape[0]
    refl, rot = suite_operators(x, seed, control, angle)
    batch = draw_projections(x, m, 2 * n, seed)
    base, other = batch.px[:n], batch.px[n:]
    base_alpha, base_perp = batch.alpha[:n], batch.perp[:n]
    base_pn = np.linalg.norm(base_perp, axis=1)
    cap = min(n, energy_cap)

    def snap(v):
        # roundoff-level differences become ties (matters when m = p and Px = x)
        res = SNAP * xn
        return np.round(np.asarray(v) / res) * res

    out = []
    for k, (lemma, op) in enumerate((("lemma1", refl), ("lemma2", rot))):
        moved = _apply(op, other)
        a_t, r_t = decompose(x, moved)
        perm_stream = RandomStream(seed, (PERMUTATION, k))
        out.append(energy_two_sample(snap(base[:cap]), snap(moved[:cap]), n_perm, perm_stream, alpha,
                                     f"{lemma}/energy"))
        out.append(ks_two_sample(snap(base_alpha), snap(a_t), alpha, f"{lemma}/ks_alpha"))
        out.append(ks_two_sample(snap(base_pn), snap(np.linalg.norm(r_t, axis=1)), alpha,
                                 f"{lemma}/ks_perp_norm"))
    name = "lemma2/direction_uniformity"
    usable = int(np.count_nonzero(base_pn > 1e-12 * xn))
    if usable == 0:
        # m = p: every perpendicular component vanishes, direction undefined
        out.append(StatTestResult(name, 0.0, 1.0, 0, 0, alpha, excluded=n))
    else:
        out.append(direction_uniformity(base_perp, make_axis_frame(x), alpha, scale=xn, test_name=name))
    for t in out:
        t.seed = seed
    return out


def run_statistical_suite(x, m: int, n: int, seeds, alpha: float = 0.01, control: str = "none",
                          angle: float = 45.0, n_perm: int = N_PERM, energy_cap: int = ENERGY_CAP,
                          exact_trials: int = 5, exact_tol: float = EXACT_TOL, workers: int = 1,
                          min_n: int = 1000) -> TestReport:
    """Full battery for both symmetries over several seeds.

    For each seed, 2n projections are drawn and split into two independent
    halves: the first half is compared against the transformed second half, so
    the tests see the distributional claim rather than the pointwise identity.
    Energy tests use at most ``energy_cap`` samples per side. Before testing,
    samples are rounded to a grid of 1e-12 * ||x|| so that pure roundoff does
    not register as a difference. Exact checks are also run on
    ``exact_trials`` fresh ensembles per seed.

    The suite passes when every exact check passes and at least 90% of seeds
    have no rejection.
    """
    x = as_vector(x, "x")
    unit(x)
    p = x.shape[0]
    check_dims(p, m)
    if n < min_n:
        raise ValueError(f"n must be >= {min_n}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")

    def one(seed):
        tests = _seed_tests(x, m, n, seed, alpha, control, angle, n_perm, energy_cap)
        exact = run_exact_suite(exact_trials, seed, p=p, m=m, x=x, tol=exact_tol) if exact_trials else []
        return tests, exact

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(one, seeds))
    else:
        per_seed = [one(s) for s in seeds]

    stat_tests = [t for tests, _ in per_seed for t in tests]
    exact = []
    if exact_trials:
        for name in EXACT_CHECKS:
            worst = [c for _, cs in per_seed for c in cs if c.check_name == name]
            exact.append(ExactCheckResult(name, sum(c.trials for c in worst),
                                          max(c.max_residual for c in worst), exact_tol))
    config = {
        "p": p, "m": int(m), "n": int(n), "seeds": seeds, "alpha": float(alpha),
        "control": control, "angle": float(angle), "n_permutations": int(n_perm),
        "energy_cap": int(energy_cap), "exact_trials": int(exact_trials),
        "x": [float(v) for v in x],
    }
    required = math.ceil(SEED_PASS_FRACTION * len(seeds) - 1e-9)
    return TestReport(config, exact, stat_tests, required)
