import json
import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from dipsim.exceptions import DimensionMismatch, InputError
from dirichlet.sampling import DPParams, SamplerConfig, dp_posterior_params, sample_dp_finite
from measures.measures import (
    Box,
    IsotropicGaussian2D,
    SymmetricGaussian1D,
    UniformDisk,
    UniformUnitSquare,
    eval_box,
    random_boxes,
)
from symmetry.groups import make_cyclic_group_2d, make_reflection_group

from .fitting import CENTERED, LIMIT, fit, fit_centered, fit_limit, fit_univariate_symmetric
from .limit import LimitOrbitSampler, arc_fraction
from .paths import run_paper_algorithm, sample_path
from .serializers import path_from_dict, path_to_dict, posterior_from_dict, posterior_to_dict

QUARTER_ORBIT = [[1, 0], [0, 1], [-1, 0], [0, -1]]


def direct_base_mass(alpha, base, data, group, box):
    """[alpha H(B) + (1/k) sum_i sum_j 1{g_j X_i in B}] / (alpha + m), summed point by point."""
    hits = sum(bool(box.contains([g.apply(x)])[0]) for x in data for g in group)
    return (alpha * base.box_probability(box) + hits / group.order) / (alpha + len(data))


def safe_boxes(measure, boxes, buffer=1e-9):
    return [box for box in boxes if box.boundary_distance(measure.points).min() > buffer]


class FitTests(SimpleTestCase):

    def test_single_datum_quarter_turns(self):
        posterior = fit(1.0, UniformDisk(), [[1.0, 0.0]], make_cyclic_group_2d(4))
        self.assertEqual(posterior.p_cont, 0.5)
        self.assertEqual(posterior.alpha_star, 2.0)
        self.assertEqual(posterior.discrete.points.tolist(), QUARTER_ORBIT)
        self.assertEqual(posterior.discrete.weights.tolist(), [0.25] * 4)
        self.assertEqual(posterior.warnings, [])

    def test_no_data_is_the_prior(self):
        base = UniformDisk()
        posterior = fit(3.0, base, [], make_cyclic_group_2d(6))
        self.assertEqual(posterior.alpha_star, 3.0)
        self.assertEqual(posterior.p_cont, 1.0)
        self.assertIs(posterior.base.continuous, base)
        self.assertIsNone(posterior.discrete)

    def test_trivial_group_matches_dp_update(self):
        data = np.random.default_rng(3).normal(size=(6, 2))
        posterior = fit(0.8, IsotropicGaussian2D(), data, make_cyclic_group_2d(1))
        params = dp_posterior_params(0.8, IsotropicGaussian2D(), data)
        self.assertEqual(posterior.alpha_star, params.alpha)
        self.assertEqual(posterior.p_cont, params.base.p_cont)
        np.testing.assert_array_equal(posterior.discrete.points, params.base.discrete.points)
        np.testing.assert_array_equal(posterior.discrete.weights, params.base.discrete.weights)

    def test_base_matches_direct_sum(self):
        rng = np.random.default_rng(17)
        base = IsotropicGaussian2D()
        for trial in range(50):
            alpha = float(rng.uniform(0.1, 10.0))
            m = int(rng.integers(1, 21))
            group = make_cyclic_group_2d(int(rng.choice([1, 2, 4, 8])))
            data = rng.normal(size=(m, 2))
            posterior = fit(alpha, base, data, group, check_invariance=False)
            self.assertEqual(posterior.p_cont, alpha / (alpha + m))
            for box in random_boxes(base, 20, rng):
                with self.subTest(trial=trial, box=box):
                    expected = direct_base_mass(alpha, base, data, group, box)
                    self.assertAlmostEqual(eval_box(posterior.base, box), expected, delta=1e-12)

    def test_small_alpha_leans_on_data(self):
        posterior = fit(1e-8, UniformDisk(), [[0.5, 0.0]], make_cyclic_group_2d(2))
        self.assertEqual(posterior.p_cont, 1e-8 / (1e-8 + 1))

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            fit(1.0, SymmetricGaussian1D(), [[1.0, 0.0]], make_cyclic_group_2d(4))
        with self.assertRaises(DimensionMismatch):
            fit(1.0, UniformDisk(), [[1.0, 0.0, 2.0]], make_cyclic_group_2d(4))

    def test_non_positive_alpha(self):
        with self.assertRaises(InputError):
            fit(0.0, UniformDisk(), [], make_cyclic_group_2d(4))

    def test_non_invariant_base_is_recorded(self):
        with self.assertLogs('posterior.fitting', 'WARNING'):
            posterior = fit(1.0, UniformUnitSquare(), [[0.5, 0.5]], make_cyclic_group_2d(4))
        self.assertEqual(len(posterior.warnings), 1)
        self.assertIn('uniform-unit-square', posterior.warnings[0])
        self.assertEqual(posterior.p_cont, 0.5)

    def test_invariant_bases_pass_the_spot_check(self):
        self.assertEqual(fit(1.0, IsotropicGaussian2D(2.0), [], make_cyclic_group_2d(8)).warnings, [])
        self.assertEqual(fit(1.0, SymmetricGaussian1D(1.5), [[0.0]], make_reflection_group(1.5)).warnings, [])

    def test_shifted_symmetric_gaussian_fails_the_spot_check(self):
        with self.assertLogs('posterior.fitting', 'WARNING'):
            posterior = fit(1.0, SymmetricGaussian1D(1.0), [[0.0]], make_reflection_group(0.0))
        self.assertTrue(posterior.warnings)


class UnivariateSymmetricTests(SimpleTestCase):

    def test_single_datum(self):
        posterior = fit_univariate_symmetric(1.0, SymmetricGaussian1D(), [5.0], 0.0)
        self.assertEqual(posterior.p_cont, 0.5)
        self.assertEqual(posterior.discrete.points.ravel().tolist(), [5.0, -5.0])
        self.assertEqual(posterior.discrete.weights.tolist(), [0.5, 0.5])

    def test_symmetric_data_merge(self):
        posterior = fit_univariate_symmetric(1.0, SymmetricGaussian1D(), [-3.0, 3.0], 0.0)
        self.assertEqual(posterior.discrete.size, 4)
        merged = posterior.discrete.merged()
        self.assertEqual(merged.points.ravel().tolist(), [-3.0, 3.0])
        self.assertEqual(merged.weights.tolist(), [0.5, 0.5])

    def test_same_as_reflection_group_fit(self):
        data = [0.3, 4.1, -2.0]
        left = fit_univariate_symmetric(2.0, SymmetricGaussian1D(1.0), data, 1.0)
        right = fit(2.0, SymmetricGaussian1D(1.0), [[x] for x in data], make_reflection_group(1.0))
        np.testing.assert_array_equal(left.discrete.points, right.discrete.points)
        np.testing.assert_array_equal(left.discrete.weights, right.discrete.weights)
        self.assertEqual(left.alpha_star, right.alpha_star)


class LimitTests(SimpleTestCase):

    def test_right_half_plane(self):
        posterior = fit_limit(1.0, UniformDisk(2.0), [[1.0, 0.0]])
        self.assertEqual(posterior.kind, LIMIT)
        self.assertIsNone(posterior.group)
        self.assertAlmostEqual(posterior.discrete.box_probability(Box((0, -2), (2, 2))), 0.5, places=15)

    def test_box_around_every_circle(self):
        orbit = LimitOrbitSampler([[1.0, 0.0], [0.0, -2.5], [0.3, 0.4]])
        self.assertEqual(orbit.box_probability(Box((-3, -3), (3, 3))), 1.0)

    def test_corner_arc(self):
        box = Box((0.5, 0.5), (2.0, 2.0))
        expected = (math.pi / 2 - 2 * math.asin(0.5)) / (2 * math.pi)
        self.assertAlmostEqual(arc_fraction(1.0, box), expected, places=14)
        angles = (np.arange(10**6) + 0.5) * 2 * math.pi / 10**6
        grid = box.contains(np.column_stack([np.cos(angles), np.sin(angles)])).mean()
        self.assertAlmostEqual(arc_fraction(1.0, box), grid, delta=1e-5)

    def test_arc_fraction_matches_fine_grid(self):
        rng = np.random.default_rng(8)
        angles = (np.arange(200000) + 0.5) * 2 * math.pi / 200000
        for box in random_boxes(IsotropicGaussian2D(), 25, rng):
            r = float(rng.uniform(0.1, 2.0))
            grid = box.contains(r * np.column_stack([np.cos(angles), np.sin(angles)])).mean()
            with self.subTest(box=box, r=r):
                self.assertAlmostEqual(arc_fraction(r, box), grid, delta=5e-5)

    def test_datum_at_origin(self):
        orbit = LimitOrbitSampler([[0.0, 0.0]])
        self.assertEqual(orbit.box_probability(Box((-1, -1), (1, 1))), 1.0)
        self.assertEqual(orbit.box_probability(Box((0, 0), (1, 1))), 0.0)

    def test_draws_keep_data_norms(self):
        data = np.array([[1.0, 0.0], [0.0, 3.0], [-2.0, 2.0]])
        draws = LimitOrbitSampler(data).sample(5000, np.random.default_rng(4))
        norms = np.hypot(draws[:, 0], draws[:, 1])
        radii = np.hypot(data[:, 0], data[:, 1])
        self.assertTrue(np.all(np.min(np.abs(norms[:, None] - radii[None, :]), axis=1) < 1e-10))

    def test_draw_frequencies_match_arc_fractions(self):
        orbit = LimitOrbitSampler([[1.0, 0.0], [0.0, 1.5]])
        box = Box((0.2, -0.4), (1.6, 1.2))
        n = 200000
        freq = box.contains(orbit.sample(n, np.random.default_rng(6))).mean()
        q = orbit.box_probability(box)
        self.assertLessEqual(abs(freq - q), 4 * math.sqrt(q * (1 - q) / n))

    def test_requires_planar_data(self):
        with self.assertRaises(DimensionMismatch):
            fit_limit(1.0, UniformDisk(), [[1.0, 0.0, 0.0]])
        with self.assertRaises(DimensionMismatch):
            fit_limit(1.0, SymmetricGaussian1D(), [[1.0]])

    def test_large_groups_approach_the_limit(self):
        rng = np.random.default_rng(12)
        data = rng.normal(size=(5, 2))
        limit = fit_limit(1.0, IsotropicGaussian2D(), data, check_invariance=False)
        for box in random_boxes(IsotropicGaussian2D(), 10, rng):
            fine = fit(1.0, IsotropicGaussian2D(), data, make_cyclic_group_2d(256), check_invariance=False)
            target = eval_box(limit.base, box)
            with self.subTest(box=box):
                self.assertLess(abs(eval_box(fine.base, box) - target), 0.02)


class CenteredTests(SimpleTestCase):

    def test_centred_data_part(self):
        posterior = fit_centered(2.0, SymmetricGaussian1D(), [1.0, 2.0, 3.0, 10.0])
        self.assertEqual(posterior.kind, CENTERED)
        self.assertEqual(posterior.alpha_star, 6.0)
        self.assertEqual(posterior.discrete.points.ravel().tolist(), [-3.0, -2.0, -1.0, 6.0])

    def test_paths_are_not_symmetrized(self):
        posterior = fit_centered(2.0, SymmetricGaussian1D(), [1.0, 2.0])
        path = sample_path(posterior, 'finite:50', np.random.default_rng(0))
        self.assertEqual(path.measure.size, 50)


class SamplePathTests(SimpleTestCase):

    def setUp(self):
        self.data = np.array([[0.7, 0.2], [-1.1, 0.4], [0.3, -0.9]])

    def test_trivial_group_gives_raw_dp_path(self):
        posterior = fit(2.0, IsotropicGaussian2D(), self.data, make_cyclic_group_2d(1))
        path = sample_path(posterior, 'finite:300', np.random.default_rng(21))
        raw = sample_dp_finite(DPParams(posterior.alpha_star, posterior.base), 300, np.random.default_rng(21))
        np.testing.assert_array_equal(path.measure.points, raw.measure.points)
        np.testing.assert_array_equal(path.measure.weights, raw.measure.weights)

    def test_finite_group_paths_are_invariant(self):
        group = make_cyclic_group_2d(4)
        posterior = fit(2.0, IsotropicGaussian2D(), self.data, group)
        rng = np.random.default_rng(5)
        for sampler in ('finite:200', 'stick-breaking:1e-4'):
            measure = sample_path(posterior, sampler, rng).measure
            for box in safe_boxes(measure, random_boxes(IsotropicGaussian2D(), 100, rng)):
                for g in group:
                    moved = math.fsum(measure.weights[box.contains(measure.points @ g.matrix.T)])
                    with self.subTest(sampler=sampler, box=box, g=g):
                        self.assertAlmostEqual(measure.box_probability(box), moved, delta=1e-9)

    def test_atom_count_is_multiplied_by_group_order(self):
        posterior = fit(1.0, IsotropicGaussian2D(), self.data, make_cyclic_group_2d(6))
        path = sample_path(posterior, SamplerConfig('finite', n_atoms=40), np.random.default_rng(1))
        self.assertEqual(path.measure.size, 240)
        self.assertEqual(path.truncation.n_atoms, 40)

    def test_limit_paths_use_the_rotation_grid(self):
        posterior = fit_limit(1.0, IsotropicGaussian2D(), self.data)
        path = sample_path(posterior, 'finite:10', np.random.default_rng(2), k_sym=36)
        self.assertEqual(path.measure.size, 360)
        self.assertEqual(sample_path(posterior, 'finite:10', np.random.default_rng(2)).measure.size, 3600)

    def test_mean_box_mass_matches_base(self):
        posterior = fit(1.5, IsotropicGaussian2D(), self.data, make_cyclic_group_2d(4))
        box = Box((-1.0, -1.0), (1.0, 1.0))
        rng = np.random.default_rng(10)
        reps = 2000
        masses = np.array([sample_path(posterior, 'finite:300', rng).measure.box_probability(box) for _ in range(reps)])
        h = eval_box(posterior.base, box)
        sigma = math.sqrt(h * (1 - h) / (posterior.alpha_star + 1) / reps)
        self.assertLessEqual(abs(masses.mean() - h), 4 * sigma)

    def test_bad_sampler(self):
        posterior = fit(1.0, IsotropicGaussian2D(), self.data, make_cyclic_group_2d(2))
        with self.assertRaises(InputError):
            sample_path(posterior, 'polya-urn', np.random.default_rng(0))

    def test_unknown_kind(self):
        posterior = replace(fit(1.0, IsotropicGaussian2D(), self.data, make_cyclic_group_2d(2)), kind='octahedral')
        with self.assertRaises(InputError) as ctx:
            sample_path(posterior, 'finite:10', np.random.default_rng(0))
        self.assertEqual(ctx.exception.code, 'group')


class FiveStepConstructionTests(SimpleTestCase):

    def test_matches_fit_then_sample_path(self):
        data = np.random.default_rng(30).normal(size=(4, 2))
        direct = run_paper_algorithm(1.3, UniformDisk(2.0), data, 8, 150, np.random.default_rng(77))
        posterior = fit(1.3, UniformDisk(2.0), data, make_cyclic_group_2d(8))
        composed = sample_path(posterior, 'finite:150', np.random.default_rng(77))
        np.testing.assert_array_equal(direct.measure.points, composed.measure.points)
        np.testing.assert_array_equal(direct.measure.weights, composed.measure.weights)

    def test_trivial_group_is_a_dp_posterior_draw(self):
        data = [[0.5, 0.5], [1.0, -2.0]]
        direct = run_paper_algorithm(1.0, IsotropicGaussian2D(), data, 1, 100, np.random.default_rng(3))
        params = dp_posterior_params(1.0, IsotropicGaussian2D(), data)
        raw = sample_dp_finite(params, 100, np.random.default_rng(3))
        np.testing.assert_array_equal(direct.measure.points, raw.measure.points)
        np.testing.assert_array_equal(direct.measure.weights, raw.measure.weights)

    def test_no_data_draws_from_the_prior(self):
        path = run_paper_algorithm(2.0, UniformDisk(), [], 4, 50, np.random.default_rng(0))
        self.assertEqual(path.measure.size, 200)
        self.assertTrue(np.all(np.hypot(path.measure.points[:, 0], path.measure.points[:, 1]) <= 1.0 + 1e-12))

    def test_invalid_arguments(self):
        with self.assertRaises(InputError):
            run_paper_algorithm(1.0, UniformDisk(), [], 0, 10, np.random.default_rng(0))
        with self.assertRaises(InputError):
            run_paper_algorithm(1.0, UniformDisk(), [], 4, 0, np.random.default_rng(0))


class SerializerTests(SimpleTestCase):

    def round_trip(self, posterior):
        return posterior_from_dict(json.loads(json.dumps(posterior_to_dict(posterior))))

    def test_finite_group_round_trip(self):
        rng = np.random.default_rng(40)
        posterior = fit(1.7, IsotropicGaussian2D(0.5), rng.normal(size=(5, 2)), make_cyclic_group_2d(5))
        loaded = self.round_trip(posterior)
        self.assertEqual(loaded.alpha_star, posterior.alpha_star)
        self.assertEqual(loaded.group_description(), {'kind': 'cyclic2d', 'k': 5})
        for box in random_boxes(IsotropicGaussian2D(), 100, rng):
            self.assertEqual(eval_box(loaded.base, box), eval_box(posterior.base, box))

    def test_payload_fields(self):
        payload = posterior_to_dict(fit_univariate_symmetric(1.0, SymmetricGaussian1D(2.0), [1.0], 2.0))
        self.assertEqual(payload['group'], {'kind': 'reflection', 'k': 2, 'mu': 2.0})
        self.assertEqual(payload['p_cont'], 0.5)
        self.assertEqual(payload['base_continuous'], {'kind': 'gauss1d-symmetric', 'mu': 2.0, 'sigma': 1.0})
        self.assertEqual(payload['data'], [[1.0]])

    def test_limit_and_centered_round_trip(self):
        limit = fit_limit(1.0, UniformDisk(2.0), [[1.0, 0.5]])
        box = Box((0.0, 0.0), (2.0, 2.0))
        self.assertEqual(eval_box(self.round_trip(limit).base, box), eval_box(limit.base, box))
        centered = fit_centered(1.0, SymmetricGaussian1D(), [1.0, 4.0])
        self.assertEqual(self.round_trip(centered).discrete.points.ravel().tolist(), [-1.5, 1.5])

    def test_warnings_survive(self):
        posterior = fit(1.0, UniformUnitSquare(), [], make_cyclic_group_2d(4))
        self.assertEqual(self.round_trip(posterior).warnings, posterior.warnings)

    def test_inconsistent_alpha_star(self):
        payload = posterior_to_dict(fit(1.0, UniformDisk(), [[1.0, 0.0]], make_cyclic_group_2d(4)))
        payload['alpha_star'] = 7.0
        with self.assertRaises(InputError):
            posterior_from_dict(payload)

    def test_missing_field(self):
        with self.assertRaises(InputError):
            posterior_from_dict({'alpha_star': 1.0})

    def test_path_round_trip(self):
        posterior = fit(1.0, UniformDisk(), [[1.0, 0.0]], make_cyclic_group_2d(4))
        path = sample_path(posterior, 'stick-breaking:1e-3', np.random.default_rng(9))
        loaded = path_from_dict(json.loads(json.dumps(path_to_dict(path))))
        np.testing.assert_array_equal(loaded.measure.points, path.measure.points)
        np.testing.assert_array_equal(loaded.measure.weights, path.measure.weights)
        self.assertEqual(loaded.truncation, path.truncation)
