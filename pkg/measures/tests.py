import json
import math

import numpy as np
from django.test import SimpleTestCase

from dipsim.exceptions import DimensionMismatch, InputError
from symmetry.groups import make_cyclic_group_2d, make_reflection_group

from .measures import (
    Box,
    DiscreteMeasure,
    IsotropicGaussian2D,
    MixtureBase,
    SymmetricGaussian1D,
    UniformBall3D,
    UniformDisk,
    UniformUnitSquare,
    box_grid,
    eval_box,
    eval_box_with_error,
    make_base,
    pairwise_disjoint,
    random_boxes,
    sample,
)
from .orbits import centered_empirical, orbit_symmetrize_measure, symmetrized_dirac, symmetrized_empirical
from .serializers import base_from_dict, discrete_from_dict

QUARTER_ORBIT = [[1, 0], [0, 1], [-1, 0], [0, -1]]


def transformed_mass(measure, g, box):
    """P(g^-1 B): mass of atoms whose image under g lands in B."""
    images = np.array([g.apply(p) for p in measure.points])
    return math.fsum(measure.weights[box.contains(images)])


class BoxTests(SimpleTestCase):

    def test_half_open_membership(self):
        box = Box((0.0, 0.0), (1.0, 1.0))
        np.testing.assert_array_equal(box.contains([[0, 0.5], [1, 1], [0.5, 0.5]]), [False, True, True])

    def test_low_must_be_below_high(self):
        with self.assertRaises(InputError):
            Box((1.0,), (1.0,))

    def test_full_space(self):
        box = Box.full_space(2)
        self.assertTrue(box.is_full_space)
        self.assertTrue(box.contains([[1e300, -1e300]]).all())

    def test_grid_is_a_partition(self):
        boxes = box_grid((-1, -1), (1, 1), 3)
        self.assertEqual(len(boxes), 9)
        self.assertTrue(pairwise_disjoint(boxes))
        self.assertAlmostEqual(sum(eval_box(UniformUnitSquare(), b) for b in box_grid((0, 0), (1, 1), 4)), 1.0)


class SymmetrizedDiracTests(SimpleTestCase):

    def test_quarter_turn_orbit(self):
        measure = symmetrized_dirac(make_cyclic_group_2d(4), (1, 0))
        np.testing.assert_array_equal(measure.points, QUARTER_ORBIT)
        np.testing.assert_array_equal(measure.weights, [0.25] * 4)

    def test_trivial_group_gives_dirac(self):
        measure = symmetrized_dirac(make_cyclic_group_2d(1), (2.0, 3.0))
        np.testing.assert_array_equal(measure.points, [[2.0, 3.0]])
        np.testing.assert_array_equal(measure.weights, [1.0])

    def test_reflection(self):
        measure = symmetrized_dirac(make_reflection_group(0.0), 5.0)
        np.testing.assert_array_equal(measure.points.ravel(), [5.0, -5.0])
        np.testing.assert_array_equal(measure.weights, [0.5, 0.5])

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            symmetrized_dirac(make_cyclic_group_2d(4), (1.0,))


class SymmetrizedEmpiricalTests(SimpleTestCase):

    def test_single_datum_matches_dirac(self):
        group = make_cyclic_group_2d(6)
        one = symmetrized_empirical(group, [(0.3, -1.2)])
        dirac = symmetrized_dirac(group, (0.3, -1.2))
        np.testing.assert_array_equal(one.points, dirac.points)
        np.testing.assert_array_equal(one.weights, dirac.weights)

    def test_reflection_formula(self):
        data = [1.0, 4.0, -2.5]
        measure = symmetrized_empirical(make_reflection_group(1.0), data)
        self.assertEqual(measure.size, 6)
        np.testing.assert_array_equal(measure.points.ravel(), [1.0, 1.0, 4.0, -2.0, -2.5, 4.5])
        np.testing.assert_allclose(measure.weights, 1 / 6)

    def test_half_turn_group(self):
        measure = symmetrized_empirical(make_cyclic_group_2d(2), [(1, 0), (0, 2)])
        np.testing.assert_array_equal(measure.points, [[1, 0], [-1, 0], [0, 2], [0, -2]])
        np.testing.assert_array_equal(measure.weights, [0.25] * 4)

    def test_empty_data_rejected(self):
        with self.assertRaises(InputError):
            symmetrized_empirical(make_cyclic_group_2d(4), [])


class CenteredEmpiricalTests(SimpleTestCase):

    def test_two_points(self):
        measure = centered_empirical([1.0, 3.0])
        np.testing.assert_array_equal(measure.points.ravel(), [-1.0, 1.0])
        np.testing.assert_array_equal(measure.weights, [0.5, 0.5])

    def test_single_point_goes_to_zero(self):
        np.testing.assert_array_equal(centered_empirical([7.25]).points, [[0.0]])

    def test_mean_is_zero(self):
        self.assertLessEqual(abs(centered_empirical([1, 2, 3, 10]).mean()[0]), 1e-12)

    def test_empty_rejected(self):
        with self.assertRaises(InputError):
            centered_empirical([])


class EvalBoxTests(SimpleTestCase):

    def test_unit_square_product_formula(self):
        self.assertAlmostEqual(eval_box(UniformUnitSquare(), Box((0.2, 0.1), (0.5, 0.4))), 0.09, places=15)

    def test_discrete_atom_in_box(self):
        measure = symmetrized_dirac(make_cyclic_group_2d(4), (1, 0))
        self.assertEqual(eval_box(measure, Box((0.5, -0.5), (1.5, 0.5))), 0.25)

    def test_gaussian_square(self):
        expected = math.erf(1 / math.sqrt(2)) ** 2
        self.assertAlmostEqual(eval_box(IsotropicGaussian2D(1.0), Box((-1, -1), (1, 1))), expected, places=12)
        self.assertAlmostEqual(expected, 0.46607, delta=1e-5)

    def test_symmetric_gaussian_is_reflection_invariant(self):
        base = SymmetricGaussian1D(mu=2.0, sigma=0.7)
        self.assertAlmostEqual(eval_box(base, Box((2.5,), (3.1,))), eval_box(base, Box((0.9,), (1.5,))), places=14)

    def test_disk_exact_cases(self):
        disk = UniformDisk(1.0)
        self.assertAlmostEqual(eval_box(disk, Box((0, 0), (1, 1))), 0.25, places=14)
        self.assertAlmostEqual(eval_box(disk, Box((0, -2), (2, 2))), 0.5, places=14)
        self.assertEqual(eval_box(disk, Box((-3, -3), (3, 3))), 1.0)
        self.assertEqual(eval_box(disk, Box((1, 1), (2, 2))), 0.0)

    def test_disk_matches_monte_carlo(self):
        disk = UniformDisk(1.5)
        rng = np.random.default_rng(3)
        draws = disk.sample(200_000, rng)
        for box in random_boxes(disk, 20, rng):
            q = eval_box(disk, box)
            freq = box.contains(draws).mean()
            self.assertLessEqual(abs(freq - q), 4 * math.sqrt(max(q * (1 - q), 1e-12) / len(draws)) + 1e-9)

    def test_mixture_arithmetic(self):
        mixture = MixtureBase(0.4, UniformUnitSquare(), DiscreteMeasure([[0.5, 0.5]], [1.0]))
        box = Box((0.25, 0.25), (0.75, 0.75))
        self.assertAlmostEqual(eval_box(mixture, box), 0.4 * 0.25 + 0.6, places=15)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            eval_box(UniformDisk(), Box((0,), (1,)))

    def test_monte_carlo_fallback_declares_error(self):
        ball = UniformBall3D(1.0)
        box = Box((0, 0, 0), (math.inf, math.inf, math.inf))
        with self.assertLogs('measures.measures', level='WARNING'):
            estimate = eval_box_with_error(ball, box)
        self.assertGreater(estimate.stderr, 0)
        self.assertLessEqual(abs(estimate.value - 0.125), 4 * estimate.stderr)

    def test_mixture_carries_fallback_error(self):
        ball = UniformBall3D(1.0)
        box = Box((0, 0, 0), (math.inf, math.inf, math.inf))
        mixture = MixtureBase(0.5, ball, DiscreteMeasure([[5.0, 5.0, 5.0]], [1.0]))
        with self.assertLogs('measures.measures', level='WARNING'):
            alone = eval_box_with_error(ball, box)
            mixed = eval_box_with_error(mixture, box)
        self.assertGreater(mixed.stderr, 0)
        self.assertAlmostEqual(mixed.stderr, 0.5 * alone.stderr, places=15)
        self.assertAlmostEqual(mixed.value, 0.5 * alone.value + 0.5, places=15)
        self.assertEqual(eval_box(mixture, box), mixed.value)


class SampleTests(SimpleTestCase):

    def test_single_atom(self):
        draws = sample(DiscreteMeasure([[2.0, -1.0]], [1.0]), 50, np.random.default_rng(0))
        np.testing.assert_array_equal(draws, np.tile([2.0, -1.0], (50, 1)))

    def test_mixture_without_continuous_mass(self):
        discrete = symmetrized_dirac(make_cyclic_group_2d(4), (1, 0))
        draws = sample(MixtureBase(0.0, UniformDisk(), discrete), 200, np.random.default_rng(1))
        for point in draws:
            self.assertIn(point.round(12).tolist(), QUARTER_ORBIT)

    def test_disk_quarter_fraction(self):
        n = 10**6
        draws = sample(UniformDisk(1.0), n, np.random.default_rng(2))
        freq = Box((0, 0), (1, 1)).contains(draws).mean()
        self.assertLessEqual(abs(freq - 0.25), 3 * math.sqrt(0.25 * 0.75 / n))

    def test_mixture_frequencies_match_eval(self):
        mixture = MixtureBase(0.3, IsotropicGaussian2D(1.0), symmetrized_empirical(make_cyclic_group_2d(8), [(1.0, 0.2)]))
        rng = np.random.default_rng(4)
        n = 100_000
        draws = sample(mixture, n, rng)
        for box in random_boxes(IsotropicGaussian2D(1.0), 15, rng):
            q = eval_box(mixture, box)
            freq = box.contains(draws).mean()
            self.assertLessEqual(abs(freq - q), 4 * math.sqrt(max(q * (1 - q), 1e-12) / n) + 1e-9)

    def test_zero_draws_rejected(self):
        with self.assertRaises(InputError):
            sample(UniformDisk(), 0, np.random.default_rng(0))

    def test_rotation_invariant_bases(self):
        rng = np.random.default_rng(5)
        n = 200_000
        g = make_cyclic_group_2d(7)[3]
        for base in (UniformDisk(1.0), IsotropicGaussian2D(2.0)):
            draws = base.sample(n, rng)
            images = draws @ g.matrix.T
            for box in random_boxes(base, 10, rng):
                q = eval_box(base, box)
                freq = box.contains(images).mean()
                self.assertLessEqual(abs(freq - q), 4 * math.sqrt(max(q * (1 - q), 1e-12) / n) + 1e-9)


class OrbitSymmetrizeTests(SimpleTestCase):

    def setUp(self):
        rng = np.random.default_rng(11)
        self.measure = DiscreteMeasure(rng.normal(size=(7, 2)), rng.dirichlet(np.ones(7)))

    def test_trivial_group_unchanged(self):
        out = orbit_symmetrize_measure(make_cyclic_group_2d(1), self.measure)
        np.testing.assert_array_equal(out.points, self.measure.points)
        np.testing.assert_array_equal(out.weights, self.measure.weights)

    def test_single_atom_gives_symmetrized_dirac(self):
        group = make_cyclic_group_2d(4)
        out = orbit_symmetrize_measure(group, DiscreteMeasure([[1.0, 0.0]], [1.0]))
        np.testing.assert_array_equal(out.points, symmetrized_dirac(group, (1, 0)).points)

    def test_idempotent_as_measures(self):
        group = make_cyclic_group_2d(5)
        once = orbit_symmetrize_measure(group, self.measure)
        twice = orbit_symmetrize_measure(group, once).merged(1e-9)
        rng = np.random.default_rng(12)
        for box in random_boxes(IsotropicGaussian2D(1.0), 100, rng):
            if min(box.boundary_distance(once.points)) < 1e-9:
                continue
            self.assertAlmostEqual(eval_box(once, box), eval_box(twice, box), places=12)

    def test_output_is_invariant(self):
        group = make_cyclic_group_2d(6)
        out = orbit_symmetrize_measure(group, self.measure)
        rng = np.random.default_rng(13)
        checked = 0
        for box in random_boxes(IsotropicGaussian2D(1.0), 200, rng):
            if min(box.boundary_distance(out.points)) < 1e-9:
                continue
            checked += 1
            for g in group:
                self.assertLessEqual(abs(eval_box(out, box) - transformed_mass(out, g, box)), 1e-9)
        self.assertGreater(checked, 150)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            orbit_symmetrize_measure(make_reflection_group(0.0), self.measure)


class DiscreteMeasureTests(SimpleTestCase):

    def test_weights_must_sum_to_one(self):
        with self.assertRaises(InputError):
            DiscreteMeasure([[0.0], [1.0]], [0.5, 0.6])

    def test_negative_weight_rejected(self):
        with self.assertRaises(InputError):
            DiscreteMeasure([[0.0], [1.0]], [1.5, -0.5])

    def test_merge_symmetric_data(self):
        measure = symmetrized_empirical(make_reflection_group(0.0), [-2.0, 2.0]).merged()
        np.testing.assert_array_equal(measure.points.ravel(), [-2.0, 2.0])
        np.testing.assert_array_equal(measure.weights, [0.5, 0.5])

    def test_json_round_trip_is_exact(self):
        measure = symmetrized_empirical(make_cyclic_group_2d(7), [(0.1, 0.7), (-1.3, 0.25)])
        loaded = discrete_from_dict(json.loads(json.dumps(measure.as_dict())))
        np.testing.assert_array_equal(loaded.points, measure.points)
        np.testing.assert_array_equal(loaded.weights, measure.weights)
        for point in measure.points:
            box = Box(point - 1.0, point)
            self.assertEqual(eval_box(loaded, box), eval_box(measure, box))

    def test_malformed_json(self):
        with self.assertRaises(InputError):
            discrete_from_dict({'atoms': []})


class BaseMeasureTests(SimpleTestCase):

    def test_make_base_and_round_trip(self):
        base = make_base('uniform-disk', radius=2.0)
        self.assertEqual(base_from_dict(base.as_dict()), base)

    def test_unknown_kind(self):
        with self.assertRaises(InputError):
            make_base('cauchy')

    def test_bad_scale(self):
        with self.assertRaises(InputError):
            IsotropicGaussian2D(sigma=-1.0)

    def test_mixture_validation(self):
        with self.assertRaises(InputError):
            MixtureBase(1.5, UniformDisk())
        with self.assertRaises(InputError):
            MixtureBase(0.5, UniformDisk())
