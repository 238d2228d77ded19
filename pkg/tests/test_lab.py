import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from projsym.errors import AxisMismatch, TooFewSamples
from projsym.isometries import make_axis_frame, make_axis_rotation, make_reflection, random_axis_rotation, reflect
from projsym.lab import (
    ExactCheckResult,
    StatTestResult,
    check_gs_equivariance,
    check_reflection_equivariance,
    check_rotation_equivariance,
    direction_uniformity,
    energy_two_sample,
    ks_two_sample,
    run_exact_suite,
    run_statistical_suite,
    suite_operators,
    tilted_axis,
)
from projsym.linalg import ColumnSet
from projsym.projector import EnsembleSpec, draw_projections, project_x, sample_ensemble
from projsym.rng import RandomStream

from oracles import energy_statistic_loops, ks_statistic_brute


def rand_config(rng, p, m):
    return rng.standard_normal(p), ColumnSet(rng.standard_normal((p, m)))


class TestExactChecks:
    def test_reflection_axis_column(self, rng):
        x = rng.standard_normal(4)
        assert check_reflection_equivariance(x, ColumnSet(x[:, None])) < 1e-15

    @pytest.mark.parametrize("p, m, tol", [(5, 2, 1e-12), (64, 32, 1e-10)])
    def test_reflection_random(self, rng, p, m, tol):
        x, E = rand_config(rng, p, m)
        assert check_reflection_equivariance(x, E) < tol

    def test_rotation_identity_block(self, rng):
        x, E = rand_config(rng, 6, 3)
        assert check_rotation_equivariance(x, E, make_axis_rotation(x, np.eye(5))) < 1e-14

    @pytest.mark.parametrize("p, m, tol", [(5, 2, 1e-12), (64, 32, 1e-10)])
    def test_rotation_random(self, rng, p, m, tol):
        x, E = rand_config(rng, p, m)
        rot = random_axis_rotation(x, RandomStream(p))
        assert check_rotation_equivariance(x, E, rot) < tol

    def test_rotation_axis_mismatch(self, rng):
        x, E = rand_config(rng, 5, 2)
        rot = random_axis_rotation(rng.standard_normal(5), RandomStream(0))
        with pytest.raises(AxisMismatch):
            check_rotation_equivariance(x, E, rot)
        with pytest.raises(AxisMismatch):
            check_gs_equivariance(x, E, rot)

    def test_gs_orthonormal_input(self, rng):
        x = rng.standard_normal(5)
        E = ColumnSet(np.eye(5)[:, :3])
        assert check_gs_equivariance(x, E, make_reflection(x)) < 1e-12

    def test_gs_random(self, rng):
        x, E = rand_config(rng, 6, 3)
        assert check_gs_equivariance(x, E, make_reflection(x)) < 1e-11
        assert check_gs_equivariance(x, E, random_axis_rotation(x, RandomStream(1))) < 1e-11

    def test_off_axis_reflection_breaks_identity(self, rng):
        # sanity: the identity is specific to maps that fix x
        x, E = rand_config(rng, 6, 3)
        assert check_reflection_equivariance(x, E, make_reflection(tilted_axis(x, 45))) > 1e-3

    def test_pairing_uses_same_substreams(self):
        # the transformed-ensemble path and the transformed-projection path share trial i's draw
        x = np.linspace(1, 2, 7)
        batch = draw_projections(x, 3, 10, seed=5)
        op = make_reflection(x)
        for i in range(10):
            E = sample_ensemble(EnsembleSpec(7, 3, 5, i))
            lhs = project_x(x, E.map(op))
            assert np.linalg.norm(lhs - reflect(op, batch.px[i])) < 1e-12 * np.linalg.norm(x)

    def test_run_exact_suite(self):
        results = run_exact_suite(30, seed=4)
        assert all(isinstance(r, ExactCheckResult) and r.pass_ and r.trials == 30 for r in results)
        assert [r.to_dict()["pass"] for r in results] == [True] * 5
        strict = run_exact_suite(5, seed=4, tol=1e-30)
        assert not any(r.pass_ for r in strict)

    def test_exact_suite_fixed_dims_and_workers(self):
        a = run_exact_suite(12, seed=1, p=10, m=4)
        b = run_exact_suite(12, seed=1, p=10, m=4, workers=3)
        assert [r.max_residual for r in a] == [r.max_residual for r in b]


class TestEnergy:
    def test_identical_lists(self, rng):
        A = rng.standard_normal((40, 3))
        res = energy_two_sample(A, A.copy(), 99, RandomStream(0))
        assert res.statistic == 0.0 and res.p_value == 1.0 and not res.reject

    def test_separated(self, rng):
        A = rng.standard_normal((200, 4))
        B = rng.standard_normal((200, 4))
        B[:, 0] += 100
        res = energy_two_sample(A, B, 199, RandomStream(0))
        assert res.p_value == 1 / 200 and res.reject

    def test_statistic_matches_loops(self, rng):
        A = rng.standard_normal((17, 3))
        B = rng.standard_normal((23, 3)) + 0.3
        res = energy_two_sample(A, B, 99, RandomStream(1))
        assert res.statistic == pytest.approx(energy_statistic_loops(A, B), rel=1e-12)
        assert res.n_samples == 40 and res.n_permutations == 99

    def test_deterministic_and_bounded(self, rng):
        A, B = rng.standard_normal((2, 30, 2))
        r1 = energy_two_sample(A, B, 149, RandomStream(3))
        r2 = energy_two_sample(A, B, 149, RandomStream(3))
        assert r1 == r2
        assert 1 / 150 <= r1.p_value <= 1

    def test_preconditions(self, rng):
        with pytest.raises(ValueError):
            energy_two_sample(rng.standard_normal((5, 2)), rng.standard_normal((5, 2)), 50, RandomStream(0))
        with pytest.raises(TooFewSamples):
            energy_two_sample(rng.standard_normal((1, 2)), rng.standard_normal((5, 2)), 99, RandomStream(0))

    def test_null_calibration_projections(self):
        x = np.arange(1.0, 9.0)
        rejections = 0
        for s in range(50):
            a = draw_projections(x, 2, 300, seed=1000 + s).px
            b = draw_projections(x, 2, 300, seed=2000 + s).px
            rejections += energy_two_sample(a, b, 199, RandomStream(s)).reject
        assert rejections <= 2

    def test_p_values_super_uniform(self):
        small = 0
        for s in range(200):
            r = np.random.default_rng(s)
            res = energy_two_sample(r.standard_normal((40, 3)), r.standard_normal((40, 3)), 99, RandomStream(s))
            small += res.p_value < 0.05
        assert small / 200 <= 0.08


class TestKS:
    def test_equal(self, rng):
        a = rng.standard_normal(50)
        res = ks_two_sample(a, a.copy())
        assert res.statistic == 0 and res.p_value == 1.0

    def test_disjoint(self, rng):
        res = ks_two_sample(rng.uniform(0, 1, 30), rng.uniform(2, 3, 30))
        assert res.statistic == 1.0 and res.reject

    def test_statistic_matches_brute_force(self, rng):
        a, b = rng.standard_normal(41), rng.standard_normal(37) + 0.2
        assert ks_two_sample(a, b).statistic == pytest.approx(ks_statistic_brute(a, b), abs=1e-15)

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            ks_two_sample(np.arange(7.0), np.arange(10.0))

    def test_null_calibration_alpha_channel(self):
        x = np.ones(8)
        keep = 0
        for s in range(50):
            a = draw_projections(x, 2, 2000, seed=3000 + s).alpha
            b = draw_projections(x, 2, 2000, seed=4000 + s).alpha
            keep += not ks_two_sample(a, b).reject
        assert keep >= 48


class TestDirectionUniformity:
    def test_balanced(self):
        frame = np.eye(5)
        dirs = np.vstack([np.eye(5)[1:], -np.eye(5)[1:]] * 10)
        res = direction_uniformity(dirs, frame)
        assert res.statistic == pytest.approx(0.0, abs=1e-20)
        assert res.p_value == pytest.approx(1.0) and not res.reject

    def test_concentrated(self):
        dirs = np.tile(np.eye(4)[1], (60, 1))
        res = direction_uniformity(dirs, np.eye(4))
        assert res.p_value < 1e-10 and res.reject

    def test_too_few_and_excluded(self):
        dirs = np.vstack([np.tile(np.eye(4)[1], (39, 1)), np.zeros((3, 4))])
        with pytest.raises(TooFewSamples):
            direction_uniformity(dirs, np.eye(4))
        dirs = np.vstack([np.vstack([np.eye(4)[1:], -np.eye(4)[1:]] * 7), np.zeros((3, 4))])
        assert direction_uniformity(dirs, np.eye(4)).excluded == 3

    def test_not_perpendicular(self):
        with pytest.raises(AxisMismatch):
            direction_uniformity(np.ones((60, 3)), np.eye(3))

    def test_calibrated_on_exact_uniform_directions(self):
        # Gaussian directions in the complement are exactly uniform; rejection rate must sit near alpha
        frame = make_axis_frame(np.arange(1.0, 7.0))
        small = 0
        for s in range(200):
            g = np.random.default_rng(s).standard_normal((100, 5))
            perps = g @ frame[:, 1:].T
            small += direction_uniformity(perps, frame).p_value < 0.05
        assert small / 200 <= 0.08

    def test_projection_perps(self):
        x = np.linspace(-1, 1.5, 8)
        frame = make_axis_frame(x)
        keep = keep_rot = 0
        for s in range(20):
            b = draw_projections(x, 2, 10_000, seed=s)
            keep += not direction_uniformity(b.perp, frame).reject
            # oracle: a fresh Haar rotation about x per sample must leave the verdicts unchanged in law
            rot_perps = np.array([
                random_axis_rotation(x, RandomStream(s, (77, i)))(r) for i, r in enumerate(b.perp[:2000])
            ])
            keep_rot += not direction_uniformity(rot_perps, frame).reject
        assert keep >= 18
        assert keep_rot >= 18


class TestSuite:
    def test_full_span_trivial(self):
        x = np.array([1.0, 2.0, -1.0])
        rep = run_statistical_suite(x, 3, 1000, [0, 1], exact_trials=2)
        assert rep.overall_pass
        energy = [t for t in rep.stat_tests if t.test_name.endswith("energy")]
        assert all(t.statistic < 1e-20 for t in energy)
        uni = [t for t in rep.stat_tests if t.test_name.endswith("uniformity")]
        assert all(t.excluded == 1000 and t.n_samples == 0 for t in uni)
        refl, rot = suite_operators(x, 0)
        b = draw_projections(x, 3, 50, 0)
        assert np.allclose(refl(b.px), x) and np.allclose(rot(b.px), x)

    def test_involution_on_batch(self):
        x = np.arange(1.0, 9.0)
        refl, _ = suite_operators(x, 0)
        px = draw_projections(x, 2, 1000, 0).px
        once = refl(px)
        assert np.array_equal(once, refl(px))
        assert np.max(np.abs(refl(once) - px)) <= 1e-12 * np.linalg.norm(x)

    def test_report_shape_and_schema(self):
        x = np.arange(1.0, 9.0)
        rep = run_statistical_suite(x, 2, 1000, [0, 1, 2], exact_trials=2)
        assert len(rep.stat_tests) == 3 * 7
        assert set(rep.seed_verdicts()) == {0, 1, 2}
        assert rep.seeds_required == 3
        schema = json.loads(resources.files("projsym").joinpath("report_schema.json").read_text())
        doc = json.loads(rep.to_json())
        doc["config"].update(command="check-stat", trials=1000, seed=0, x_source="test")
        jsonschema.validate(doc, schema)

    def test_suite_workers_invariant(self):
        x = np.arange(1.0, 6.0)
        a = run_statistical_suite(x, 2, 1000, [5, 6], exact_trials=1)
        b = run_statistical_suite(x, 2, 1000, [5, 6], exact_trials=1, workers=2)
        assert a.to_json() == b.to_json()

    def test_rotate_off_axis_control_rejected(self):
        x = np.arange(1.0, 9.0)
        rep = run_statistical_suite(x, 2, 1000, [0, 1, 2], control="rotate-off-axis", exact_trials=0)
        assert not rep.overall_pass
        assert not any(rep.seed_verdicts("lemma2/").values())
        # the reflection is untouched by this control
        assert sum(rep.seed_verdicts("lemma1/").values()) >= 2

    def test_suite_validation(self):
        x = np.ones(4)
        with pytest.raises(ValueError):
            run_statistical_suite(x, 2, 999, [0])
        with pytest.raises(ValueError):
            run_statistical_suite(x, 5, 1000, [0])
        with pytest.raises(ValueError):
            run_statistical_suite(x, 2, 1000, [0], control="bogus")

    def test_stat_result_reject_rule(self):
        assert StatTestResult("t", 1.0, 0.009, 10, 0, 0.01).reject
        assert not StatTestResult("t", 1.0, 0.01, 10, 0, 0.01).reject

    def test_tilted_axis_angle(self):
        x = np.arange(1.0, 5.0)
        z = tilted_axis(x, 45)
        assert np.linalg.norm(z) == pytest.approx(1.0)
        assert z @ x / np.linalg.norm(x) == pytest.approx(np.cos(np.pi / 4))
