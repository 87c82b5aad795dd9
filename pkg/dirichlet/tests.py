import math

import numpy as np
from django.test import SimpleTestCase, tag
from scipy.stats import ks_2samp

from dipsim.exceptions import InputError
from measures.measures import Box, IsotropicGaussian2D, MixtureBase, UniformDisk, eval_box

from .sampling import (
    FINITE,
    STICK_BREAKING,
    DirichletParams,
    DPParams,
    SamplerConfig,
    dp_posterior_params,
    sample_dirichlet,
    sample_dp_finite,
    sample_dp_stick_breaking,
)

QUADRANT = Box((0.0, 0.0), (math.inf, math.inf))
BOXES = [
    QUADRANT,
    Box((-0.5, -0.5), (0.5, 0.5)),
    Box((-math.inf, -1.0), (0.3, 2.0)),
]


def path_masses(draw, params, rng, reps, boxes=BOXES):
    out = np.empty((reps, len(boxes)))
    for r in range(reps):
        measure = draw(params, rng=rng).measure
        out[r] = measure.box_probabilities(boxes)
    return out


class SampleDirichletTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_draw_is_a_probability_vector(self):
        y = sample_dirichlet(DirichletParams((0.3, 1.0, 4.0)), self.rng)
        self.assertTrue(np.all(y >= 0))
        self.assertAlmostEqual(math.fsum(y), 1.0, places=12)

    def test_symmetric_mean_and_cross_moment(self):
        draws = np.array([sample_dirichlet((1, 1, 1), self.rng) for _ in range(20000)])
        np.testing.assert_allclose(draws.mean(axis=0), [1 / 3] * 3, atol=0.007)
        self.assertAlmostEqual(float(np.mean(draws[:, 0] * draws[:, 1])), 1 / 12, delta=2e-3)

    def test_beta_marginal_variance(self):
        draws = np.array([sample_dirichlet((2, 2), self.rng)[0] for _ in range(20000)])
        self.assertAlmostEqual(float(draws.var()), 0.05, delta=2e-3)

    def test_tiny_shapes_do_not_underflow(self):
        y = sample_dirichlet(np.full(5000, 1e-4), self.rng)
        self.assertTrue(np.all(np.isfinite(y)))
        self.assertAlmostEqual(math.fsum(y), 1.0, places=9)

    def test_invalid_parameters(self):
        for a in [(1.0, 0.0), (1.0, -2.0), (1.0,), (1.0, math.nan)]:
            with self.subTest(a=a), self.assertRaises(InputError):
                DirichletParams(a)


class PosteriorParamsTests(SimpleTestCase):

    def test_conjugate_update(self):
        base = IsotropicGaussian2D()
        params = dp_posterior_params(2.0, base, [[0, 0], [1, 1], [2, 2]])
        self.assertEqual(params.alpha, 5.0)
        self.assertEqual(params.base.p_cont, 0.4)
        self.assertIs(params.base.continuous, base)
        np.testing.assert_array_equal(params.base.discrete.weights, [1 / 3] * 3)

    def test_no_data_returns_prior(self):
        base = UniformDisk()
        params = dp_posterior_params(2.0, base, [])
        self.assertEqual(params.alpha, 2.0)
        self.assertIs(params.base, base)

    def test_single_datum_mixture(self):
        base = IsotropicGaussian2D()
        box = Box((0.5, 0.5), (1.5, 1.5))
        params = dp_posterior_params(1.0, base, [[1.0, 1.0]])
        self.assertAlmostEqual(eval_box(params.base, box), 0.5 * base.box_probability(box) + 0.5, places=15)

    def test_update_is_deterministic(self):
        data = np.random.default_rng(0).normal(size=(7, 2))
        first = dp_posterior_params(0.7, IsotropicGaussian2D(), data)
        second = dp_posterior_params(0.7, IsotropicGaussian2D(), data)
        self.assertEqual(first.alpha, second.alpha)
        np.testing.assert_array_equal(first.base.discrete.points, second.base.discrete.points)

    def test_alpha_must_be_positive(self):
        with self.assertRaises(InputError):
            dp_posterior_params(0.0, IsotropicGaussian2D(), [])
        with self.assertRaises(InputError):
            DPParams(-1.0, IsotropicGaussian2D())


class StickBreakingTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(2024)
        self.params = DPParams(5.0, IsotropicGaussian2D())

    def test_residual_below_tolerance(self):
        path = sample_dp_stick_breaking(self.params, 1e-4, self.rng)
        self.assertEqual(path.truncation.mode, STICK_BREAKING)
        self.assertLessEqual(path.truncation.residual, 1e-4)
        self.assertAlmostEqual(math.fsum(path.measure.weights), 1.0, places=12)
        self.assertAlmostEqual(path.measure.weights[-1], path.truncation.residual, places=12)

    def test_tiny_concentration_puts_mass_on_first_atom(self):
        params = DPParams(1e-6, IsotropicGaussian2D())
        firsts = [sample_dp_stick_breaking(params, 1e-6, self.rng).measure.weights[0] for _ in range(1000)]
        self.assertGreaterEqual(np.mean(np.array(firsts) > 0.999), 0.99)

    def test_first_and_second_moments(self):
        reps = 4000
        masses = path_masses(sample_dp_stick_breaking, self.params, self.rng, reps)
        for j, box in enumerate(BOXES):
            h = eval_box(self.params.base, box)
            variance = h * (1 - h) / (self.params.alpha + 1)
            with self.subTest(box=j):
                self.assertLessEqual(abs(masses[:, j].mean() - h), 4 * math.sqrt(variance / reps))
                self.assertAlmostEqual(masses[:, j].var(), variance, delta=0.15 * variance)

    def test_same_seed_same_path(self):
        a = sample_dp_stick_breaking(self.params, 1e-6, np.random.default_rng(5))
        b = sample_dp_stick_breaking(self.params, 1e-6, np.random.default_rng(5))
        np.testing.assert_array_equal(a.measure.points, b.measure.points)
        np.testing.assert_array_equal(a.measure.weights, b.measure.weights)

    def test_tolerance_out_of_range(self):
        for eps in (0.0, 1.0, -0.1):
            with self.subTest(eps=eps), self.assertRaises(InputError):
                sample_dp_stick_breaking(self.params, eps, self.rng)

    def test_serializes_truncation(self):
        payload = sample_dp_stick_breaking(self.params, 1e-3, self.rng).as_dict()
        self.assertEqual(payload['truncation']['mode'], STICK_BREAKING)
        self.assertEqual(payload['truncation']['eps'], 1e-3)
        self.assertEqual(payload['dim'], 2)


class FiniteSamplerTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(99)
        self.params = DPParams(2.0, IsotropicGaussian2D())

    def test_single_atom(self):
        path = sample_dp_finite(self.params, 1, self.rng)
        self.assertEqual(path.measure.size, 1)
        self.assertEqual(path.measure.weights.tolist(), [1.0])
        self.assertEqual(path.truncation.as_dict(), {'mode': FINITE, 'n_atoms': 1})

    def test_weights_have_mean_one_over_n(self):
        reps, n = 4000, 10
        firsts = np.array([sample_dp_finite(self.params, n, self.rng).measure.weights[0] for _ in range(reps)])
        sigma = math.sqrt((1 / n) * (1 - 1 / n) / (self.params.alpha + 1) / reps)
        self.assertLessEqual(abs(firsts.mean() - 1 / n), 4 * sigma)

    def test_first_moment_matches_base(self):
        reps = 2000
        masses = path_masses(sample_dp_finite, self.params, self.rng, reps)
        for j, box in enumerate(BOXES):
            h = eval_box(self.params.base, box)
            sigma = math.sqrt(h * (1 - h) / (self.params.alpha + 1) / reps)
            with self.subTest(box=j):
                self.assertLessEqual(abs(masses[:, j].mean() - h), 4 * sigma)

    def test_posterior_mixture_base(self):
        params = dp_posterior_params(1.0, IsotropicGaussian2D(), [[3.0, 3.0]])
        box = Box((2.5, 2.5), (3.5, 3.5))
        reps = 2000
        masses = path_masses(sample_dp_finite, params, self.rng, reps, boxes=[box])
        h = eval_box(params.base, box)
        sigma = math.sqrt(h * (1 - h) / (params.alpha + 1) / reps)
        self.assertLessEqual(abs(masses[:, 0].mean() - h), 4 * sigma)

    def test_zero_atoms_rejected(self):
        with self.assertRaises(InputError):
            sample_dp_finite(self.params, 0, self.rng)


class SamplerAgreementTests(SimpleTestCase):

    @tag('slow')
    def test_box_mass_distributions_agree(self):
        params = DPParams(5.0, IsotropicGaussian2D())
        reps = 10000
        sticks = path_masses(sample_dp_stick_breaking, params, np.random.default_rng(1), reps)
        finite = path_masses(lambda p, rng: sample_dp_finite(p, 2000, rng), params, np.random.default_rng(2), reps)
        for j in range(len(BOXES)):
            with self.subTest(box=j):
                self.assertLessEqual(ks_2samp(sticks[:, j], finite[:, j]).statistic, 0.02)


class SamplerConfigTests(SimpleTestCase):

    def test_parse(self):
        self.assertEqual(SamplerConfig.parse('finite:500'), SamplerConfig(FINITE, n_atoms=500))
        self.assertEqual(SamplerConfig.parse('stick-breaking:1e-3').eps, 1e-3)
        self.assertEqual(SamplerConfig.parse('finite').n_atoms, 2000)
        self.assertEqual(SamplerConfig.parse('stick-breaking').eps, 1e-6)

    def test_parse_errors(self):
        for text in ('polya', 'finite:many', 'finite:0', 'stick-breaking:2'):
            with self.subTest(text=text), self.assertRaises(InputError):
                SamplerConfig.parse(text)

    def test_draw_dispatches(self):
        params = DPParams(1.0, MixtureBase(1.0, UniformDisk()))
        path = SamplerConfig(FINITE, n_atoms=7).draw(params, np.random.default_rng(0))
        self.assertEqual(path.measure.size, 7)
