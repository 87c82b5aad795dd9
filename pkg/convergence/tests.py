import io
import json
import math

import numpy as np
from django.test import SimpleTestCase, tag

from dipsim.exceptions import InputError
from measures.measures import (
    Box,
    DiscreteMeasure,
    IsotropicGaussian2D,
    SymmetricGaussian1D,
    UniformDisk,
    UniformUnitSquare,
    eval_box,
    random_boxes,
)
from measures.orbits import orbit_symmetrize_measure
from posterior.fitting import fit, fit_centered, fit_limit
from posterior.paths import sample_path
from symmetry.groups import make_cyclic_group_2d

from .lab import (
    check_moments,
    check_path_invariance,
    default_grid,
    distort_weights,
    finite_dim_sample,
    invariance_gap,
    invariance_gaps,
    limit_self_distance,
    moment_oracle,
    sweep_k,
    sweep_m,
)
from .reports import ConvergenceReport, dump_json

HALF_PLANES = [
    Box((-math.inf, -math.inf), (0.0, math.inf)),
    Box((0.0, -math.inf), (math.inf, math.inf)),
]
QUADRANTS = [
    Box((0.0, -math.inf), (math.inf, math.inf)),
    Box((-math.inf, 0.0), (0.0, math.inf)),
    Box((-math.inf, -math.inf), (0.0, 0.0)),
]
CORNER = Box((0.5, 0.5), (2.0, 2.0))


class FiniteDimSampleTests(SimpleTestCase):

    def setUp(self):
        self.posterior = fit(2.0, IsotropicGaussian2D(), [[0.4, 0.3], [-1.2, 0.8]], make_cyclic_group_2d(4))

    def test_full_space_column_is_one(self):
        sample = finite_dim_sample(self.posterior, [Box.full_space(2)], 50, 'finite:100', np.random.default_rng(0))
        self.assertEqual(sample.shape, (50, 1))
        self.assertTrue(np.all(sample == 1.0))

    def test_partition_rows_sum_to_one(self):
        sample = finite_dim_sample(self.posterior, HALF_PLANES, 200, None, np.random.default_rng(1))
        np.testing.assert_allclose(sample.sum(axis=1), 1.0, atol=1e-9)

    def test_column_means_match_base(self):
        boxes = [Box((-1.0, -1.0), (1.0, 1.0)), Box((0.5, 0.5), (3.0, 3.0))]
        reps = 3000
        sample = finite_dim_sample(self.posterior, boxes, reps, 'finite:300', np.random.default_rng(2))
        for i, box in enumerate(boxes):
            h = eval_box(self.posterior.base, box)
            sigma = math.sqrt(h * (1 - h) / (self.posterior.alpha_star + 1) / reps)
            with self.subTest(box=i):
                self.assertLessEqual(abs(sample[:, i].mean() - h), 4 * sigma)

    def test_worker_count_does_not_change_results(self):
        serial = finite_dim_sample(self.posterior, QUADRANTS, 40, 'finite:50', np.random.default_rng(3), workers=1)
        threaded = finite_dim_sample(self.posterior, QUADRANTS, 40, 'finite:50', np.random.default_rng(3), workers=4)
        np.testing.assert_array_equal(serial, threaded)

    def test_invalid_reps(self):
        with self.assertRaises(InputError):
            finite_dim_sample(self.posterior, QUADRANTS, 0, None, np.random.default_rng(0))

    def test_box_dimension_checked(self):
        with self.assertRaises(InputError):
            finite_dim_sample(self.posterior, [Box((0.0,), (1.0,))], 5, None, np.random.default_rng(0))


class MomentOracleTests(SimpleTestCase):

    def test_beta_half_variance(self):
        moments = moment_oracle(1.0, UniformUnitSquare(), [Box((0.0, 0.0), (0.5, 1.0))])
        self.assertEqual(moments.mean.tolist(), [0.5])
        self.assertEqual(moments.variance.tolist(), [0.125])

    def test_product_moment(self):
        boxes = [Box((0.0, 0.0), (0.5, 0.5)), Box((0.5, 0.0), (1.0, 0.5))]
        moments = moment_oracle(1.0, UniformUnitSquare(), boxes)
        self.assertEqual(moments.product[0, 1], 0.03125)
        self.assertEqual(moments.product[1, 0], 0.03125)
        self.assertAlmostEqual(moments.product[0, 0], moments.variance[0] + 0.0625, places=15)

    def test_null_box(self):
        moments = moment_oracle(3.0, UniformUnitSquare(), [Box((2.0, 2.0), (3.0, 3.0)), Box((0.0, 0.0), (1.0, 1.0))])
        self.assertEqual(moments.mean[0], 0.0)
        self.assertEqual(moments.variance[0], 0.0)
        self.assertEqual(moments.product[0].tolist(), [0.0, 0.0])

    def test_overlapping_boxes(self):
        with self.assertRaises(InputError) as ctx:
            moment_oracle(1.0, UniformUnitSquare(), [Box((0, 0), (0.6, 0.6)), Box((0.5, 0.5), (1, 1))])
        self.assertEqual(ctx.exception.code, 'overlap')


class CheckMomentsTests(SimpleTestCase):

    @tag('slow')
    def test_well_specified_posterior_passes(self):
        posterior = fit(5.0, IsotropicGaussian2D(), [[0.5, 0.5], [-0.3, 1.0], [1.5, -0.2]], make_cyclic_group_2d(4))
        check = check_moments(posterior, QUADRANTS, 10000, np.random.default_rng(10))
        self.assertTrue(check.passed, check.failures())
        self.assertEqual(check.failures(), [])

    @tag('slow')
    def test_prior_moments_across_concentrations(self):
        for alpha in (0.5, 1.0, 5.0):
            posterior = fit(alpha, UniformDisk(), [], make_cyclic_group_2d(2), check_invariance=False)
            with self.subTest(alpha=alpha):
                check = check_moments(posterior, QUADRANTS, 10000, np.random.default_rng(int(alpha * 10)))
                self.assertTrue(check.passed, check.failures())

    @tag('slow')
    def test_distorted_weights_fail(self):
        posterior = fit(20.0, IsotropicGaussian2D(), [], make_cyclic_group_2d(4), check_invariance=False)
        with self.assertLogs('convergence.lab', 'WARNING'):
            check = check_moments(posterior, QUADRANTS, 10000, np.random.default_rng(11), distort=1.1)
        self.assertFalse(check.passed)
        self.assertGreater(abs(check.z_mean[0]), 4)
        self.assertTrue(check.failures())

    def test_full_space_box_has_zero_score(self):
        posterior = fit(1.0, IsotropicGaussian2D(), [[1.0, 1.0]], make_cyclic_group_2d(4))
        check = check_moments(posterior, [Box.full_space(2)], 20, np.random.default_rng(0), 'finite:30')
        self.assertEqual(check.z_mean.tolist(), [0.0])
        self.assertEqual(check.z_variance.tolist(), [0.0])
        self.assertTrue(check.passed)

    def test_report_rows(self):
        posterior = fit(1.0, IsotropicGaussian2D(), [], make_cyclic_group_2d(1))
        check = check_moments(posterior, HALF_PLANES, 30, np.random.default_rng(0), 'finite:20', seed=9)
        out = io.StringIO()
        check.write_csv(out)
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[0], 'level,box_id,statistic,value,mc_sigma,seed')
        # 6 rows per box, 3 per pair
        self.assertEqual(len(lines), 1 + 2 * 6 + 3)
        self.assertTrue(lines[1].startswith('30,0,mean,'))
        payload = json.loads(_json(check))
        self.assertEqual(payload['seed'], 9)
        self.assertEqual(len(payload['z_mean']), 2)


def _json(report):
    out = io.StringIO()
    report.write_json(out)
    return out.getvalue()


def _reject_constant(name):
    raise ValueError(f'non-standard JSON constant {name}')


class DistortWeightsTests(SimpleTestCase):

    def test_reweights_inside_box(self):
        measure = DiscreteMeasure([[0.5, 0.5], [2.0, 2.0]], [0.5, 0.5])
        distorted = distort_weights(measure, Box((0, 0), (1, 1)), 1.1)
        self.assertAlmostEqual(distorted.weights[0], 0.55 / 1.05, places=15)
        self.assertAlmostEqual(math.fsum(distorted.weights), 1.0, places=15)

    def test_no_change_when_box_is_empty_or_full(self):
        measure = DiscreteMeasure([[0.5, 0.5], [2.0, 2.0]], [0.5, 0.5])
        self.assertIs(distort_weights(measure, Box((5, 5), (6, 6))), measure)
        self.assertIs(distort_weights(measure, Box.full_space(2)), measure)


class InvarianceGapTests(SimpleTestCase):

    def test_symmetrized_measure(self):
        rng = np.random.default_rng(20)
        group = make_cyclic_group_2d(6)
        measure = orbit_symmetrize_measure(group, DiscreteMeasure.uniform(rng.normal(size=(15, 2))))
        self.assertLessEqual(invariance_gap(measure, group, random_boxes(IsotropicGaussian2D(), 200, rng)), 1e-9)

    def test_isolated_atom(self):
        measure = DiscreteMeasure([[1.0, 0.5]], [1.0])
        self.assertEqual(invariance_gap(measure, make_cyclic_group_2d(4), [Box((0.7, 0.2), (1.5, 0.8))]), 1.0)

    def test_trivial_group(self):
        rng = np.random.default_rng(21)
        measure = DiscreteMeasure.uniform(rng.normal(size=(10, 2)))
        self.assertEqual(invariance_gap(measure, make_cyclic_group_2d(1), random_boxes(IsotropicGaussian2D(), 50, rng)), 0.0)

    def test_boundary_box_skipped(self):
        measure = DiscreteMeasure([[1.0, 0.5]], [1.0])
        with self.assertLogs('convergence.lab', 'INFO'):
            gaps = invariance_gaps(measure, make_cyclic_group_2d(4), [Box((1.0, 0.0), (2.0, 1.0))])
        self.assertTrue(np.isnan(gaps[0]))
        self.assertEqual(invariance_gap(measure, make_cyclic_group_2d(4), [Box((1.0, 0.0), (2.0, 1.0))]), 0.0)

    def test_sampled_paths_are_invariant(self):
        rng = np.random.default_rng(22)
        group = make_cyclic_group_2d(8)
        posterior = fit(2.0, IsotropicGaussian2D(), rng.normal(size=(4, 2)), group)
        boxes = random_boxes(IsotropicGaussian2D(), 200, rng)
        for sampler in ('finite:300', 'stick-breaking:1e-6'):
            measure = sample_path(posterior, sampler, rng).measure
            with self.subTest(sampler=sampler):
                self.assertLessEqual(invariance_gap(measure, group, boxes), 1e-9)

    def test_distortion_breaks_invariance(self):
        group = make_cyclic_group_2d(4)
        measure = orbit_symmetrize_measure(group, DiscreteMeasure([[1.0, 0.5]], [1.0]))
        box = Box((0.7, 0.2), (1.5, 0.8))
        self.assertGreater(invariance_gap(distort_weights(measure, box), group, [box]), 0.01)


class SweepKTests(SimpleTestCase):

    def test_corner_box_gaps_shrink(self):
        report = sweep_k(1.0, UniformDisk(2.0), [[1.0, 0.0]], (4, 16, 64, 256), [CORNER], 20, np.random.default_rng(0), 'finite:20')
        inside = {4: 0, 16: 1, 64: 5, 256: 21}
        expected = [0.5 * abs(inside[k] / k - 1 / 12) for k in (4, 16, 64, 256)]
        np.testing.assert_allclose(report.column('base_gap', 0), expected, atol=1e-12)
        self.assertEqual(report.levels, [4, 16, 64, 256])

    def test_fixed_point_data_have_no_gap(self):
        boxes = [Box((-1.0, -1.0), (1.0, 1.0)), CORNER]
        report = sweep_k(1.0, UniformDisk(2.0), [[0.0, 0.0]], (2, 8, 32), boxes, 5, np.random.default_rng(1), 'finite:10')
        self.assertTrue(np.all(report.column('base_gap') == 0.0))

    def test_random_data_gap_decreases(self):
        rng = np.random.default_rng(2)
        data = rng.normal(size=(5, 2))
        boxes = [Box((0.0, 0.0), (1.0, 1.0)), Box((-1.5, -0.5), (-0.2, 0.7)), Box((-1.0, -2.0), (1.0, -0.3))]
        report = sweep_k(1.0, IsotropicGaussian2D(), data, (4, 16, 64, 256), boxes, 5, rng, 'finite:10')
        gaps = report.column('base_gap')
        self.assertLess(gaps[-1], gaps[0])
        for i in range(len(boxes)):
            with self.subTest(box=i):
                self.assertLess(report.column('base_gap', i)[-1], 0.02)

    def test_pentagon_gaps_never_increase(self):
        # orbits of five points 72 degrees apart fill a grid of step 360/(5k),
        # so CORNER holds 2, 7, 27, 107 orbit points at k = 4, 16, 64, 256
        data = [[math.cos(math.radians(72 * i)), math.sin(math.radians(72 * i))] for i in range(5)]
        levels = (4, 16, 64, 256)
        report = sweep_k(1.0, UniformDisk(2.0), data, levels, [CORNER], 5, np.random.default_rng(4), 'finite:10')
        inside = {4: 2, 16: 7, 64: 27, 256: 107}
        np.testing.assert_allclose(report.column('base_gap', 0), [abs(inside[k] / k - 5 / 12) / 6 for k in levels], atol=1e-12)
        gaps = {r.level: r for r in report.rows if r.statistic == 'base_gap'}
        for k in levels[:-1]:
            coarse, fine = gaps[k], gaps[4 * k]
            with self.subTest(k=k):
                self.assertLessEqual(fine.value, coarse.value + 3 * math.hypot(coarse.mc_sigma, fine.mc_sigma))

    @tag('slow')
    def test_ks_against_limit(self):
        rng = np.random.default_rng(3)
        data = [[0.8, 0.1], [-0.4, 1.1]]
        boxes = [Box((0.0, 0.0), (1.5, 1.5)), Box((-2.0, -2.0), (0.0, 0.5))]
        report = sweep_k(1.0, IsotropicGaussian2D(), data, (256,), boxes, 10000, rng, 'finite:50')
        self.assertTrue(np.all(report.column('ks') <= 0.05))
        self.assertTrue(np.all(limit_self_distance(1.0, IsotropicGaussian2D(), data, boxes, 10000, rng, 'finite:50') <= 0.05))

    def test_levels_must_increase(self):
        with self.assertRaises(InputError):
            sweep_k(1.0, UniformDisk(), [[1.0, 0.0]], (16, 4), [CORNER], 5, np.random.default_rng(0))


class SweepMTests(SimpleTestCase):

    def test_gap_shrinks_with_more_data(self):
        wins = 0
        for seed in range(20):
            gaps = sweep_m(IsotropicGaussian2D(), 1.0, UniformDisk(), (10, 1000), np.random.default_rng(seed)).column('sup_gap')
            wins += int(gaps[-1] < gaps[0])
        self.assertGreaterEqual(wins, 18)
        report = sweep_m(IsotropicGaussian2D(), 1.0, UniformDisk(), (10, 100, 1000), np.random.default_rng(30))
        self.assertEqual(report.sweep, 'm')
        self.assertEqual(report.levels, [10, 100, 1000])

    def test_correct_prior_keeps_gaps_small(self):
        report = sweep_m(IsotropicGaussian2D(), 50.0, IsotropicGaussian2D(), (10, 100, 1000), np.random.default_rng(31))
        self.assertTrue(np.all(report.column('sup_gap') < 0.1))

    def test_dominant_prior(self):
        true_law, prior = IsotropicGaussian2D(), UniformDisk()
        report = sweep_m(true_law, 1e6, prior, (10,), np.random.default_rng(32))
        expected = max(abs(prior.box_probability(b) - true_law.box_probability(b)) for b in default_grid(2))
        self.assertAlmostEqual(report.column('sup_gap')[0], expected, delta=1e-4)

    def test_real_line(self):
        report = sweep_m(SymmetricGaussian1D(0.5), 1.0, SymmetricGaussian1D(0.5, 2.0), (5, 50), np.random.default_rng(33))
        self.assertEqual(report.levels, [5, 50])
        self.assertEqual(report.meta['group'], {'kind': 'reflection', 'k': 2, 'mu': 0.5})

    def test_dimension_mismatch(self):
        with self.assertRaises(InputError):
            sweep_m(IsotropicGaussian2D(), 1.0, SymmetricGaussian1D(), (10,), np.random.default_rng(0))


class ConvergenceReportTests(SimpleTestCase):

    def test_csv_round_trips_values(self):
        report = ConvergenceReport('k', [4, 16], reps=10, seed=5)
        report.add(4, 0, 'base_gap', 0.1, 0.0)
        report.add(16, 0, 'base_gap', 1 / 3, 0.0)
        out = io.StringIO()
        report.write_csv(out)
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[0], 'level,box_id,statistic,value,mc_sigma,sweep,reps,seed')
        self.assertEqual(float(lines[2].split(',')[3]), 1 / 3)
        self.assertEqual(lines[1], '4,0,base_gap,0.10000000000000001,0,k,10,5')

    def test_json(self):
        report = ConvergenceReport('m', [10], reps=1)
        report.add(10, 3, 'sup_gap', 0.25, 0.001)
        payload = json.loads(_json(report))
        self.assertEqual(payload['rows'][0]['box_id'], 3)
        self.assertEqual(payload['levels'], [10])

    def test_json_writes_non_finite_values_as_null(self):
        out = io.StringIO()
        dump_json({'z': np.array([np.inf, -np.inf, 1.5]), 'gap': math.nan, 'reps': np.int64(3)}, out)
        payload = json.loads(out.getvalue(), parse_constant=_reject_constant)
        self.assertEqual(payload, {'z': [None, None, 1.5], 'gap': None, 'reps': 3})

    def test_full_space_box_bounds_are_null(self):
        posterior = fit(1.0, IsotropicGaussian2D(), [], make_cyclic_group_2d(1))
        check = check_moments(posterior, [Box.full_space(2)], 5, np.random.default_rng(0), 'finite:10')
        payload = json.loads(_json(check), parse_constant=_reject_constant)
        self.assertEqual(payload['boxes'], [{'low': [None, None], 'high': [None, None]}])

    def test_levels_must_increase(self):
        with self.assertRaises(InputError):
            ConvergenceReport('k', [4, 4])

    def test_distances_are_bounded(self):
        report = ConvergenceReport('k', [4])
        with self.assertRaises(ValueError):
            report.add(4, 0, 'ks', 1.5)


class PathInvarianceCheckTests(SimpleTestCase):

    def setUp(self):
        self.posterior = fit(2.0, IsotropicGaussian2D(), [[0.6, -0.2], [1.1, 0.9], [-0.3, 0.4]], make_cyclic_group_2d(6))

    def test_symmetrized_paths_pass(self):
        check = check_path_invariance(self.posterior, 5, np.random.default_rng(40), sampler='finite:100', seed=40)
        self.assertTrue(check.passed, check.failures())
        self.assertEqual(check.reps, 5)
        self.assertEqual(check.boxes, 200)
        self.assertEqual(check.group, {'kind': 'cyclic2d', 'k': 6})

    def test_distortion_is_detected(self):
        with self.assertLogs('convergence.lab', 'WARNING'):
            check = check_path_invariance(self.posterior, 3, np.random.default_rng(41), sampler='finite:100', distort=1.1)
        self.assertFalse(check.passed)
        self.assertEqual(len(check.failures()), 3)

    def test_rotation_limit_uses_its_grid(self):
        posterior = fit_limit(1.0, UniformDisk(), [[0.5, 0.1]])
        check = check_path_invariance(posterior, 2, np.random.default_rng(42), sampler='finite:20', k_sym=36)
        self.assertEqual(check.group['k'], 36)
        self.assertTrue(check.passed)

    def test_centred_posterior_has_no_group(self):
        posterior = fit_centered(1.0, SymmetricGaussian1D(), [[0.3], [-1.0]])
        with self.assertRaises(InputError) as ctx:
            check_path_invariance(posterior, 2, np.random.default_rng(0))
        self.assertEqual(ctx.exception.code, 'group')

    def test_csv_rows(self):
        check = check_path_invariance(self.posterior, 2, np.random.default_rng(43), sampler='finite:10', seed=43)
        out = io.StringIO()
        check.write_csv(out)
        lines = out.getvalue().splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[2].startswith('2,1,invariance_gap,'))
        self.assertTrue(lines[2].endswith(',43'))
