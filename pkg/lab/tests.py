import csv
import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from dipsim.exceptions import InputError
from dipsim.rng import make_rng, replica_rngs
from dirichlet.sampling import SamplerConfig, dp_posterior_params
from measures.measures import IsotropicGaussian2D, UniformDisk, eval_box, random_boxes
from posterior.fitting import fit
from posterior.serializers import path_from_dict, posterior_from_dict
from symmetry.groups import make_cyclic_group_2d

from .decorators import CHECK_FAILED, IO_ERROR, USAGE_ERROR
from .forms import FitForm, parse_group, parse_levels
from .utils import read_boxes, read_data_csv, read_jsonl, write_data_csv


class CommandTestCase(SimpleTestCase):
    """Runs commands inside a scratch directory."""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name):
        return str(self.tmp / name)

    def write(self, name, text):
        (self.tmp / name).write_text(text)
        return self.path(name)

    def call(self, name, **options):
        out = StringIO()
        call_command(name, stdout=out, **options)
        return out.getvalue()

    def assertExitCode(self, code, name, **options):
        with self.assertRaises(CommandError) as ctx:
            self.call(name, **options)
        self.assertEqual(ctx.exception.returncode, code, str(ctx.exception))
        return ctx.exception

    def read_bytes(self, name):
        return (self.tmp / name).read_bytes()


class ParseTests(SimpleTestCase):

    def test_group_forms(self):
        self.assertEqual(parse_group('cyclic2d:8'), {'kind': 'cyclic2d', 'k': 8})
        self.assertEqual(parse_group('reflection:-1.5'), {'kind': 'reflection', 'mu': -1.5})
        self.assertEqual(parse_group('cyclic3d:4:0:0:1'), {'kind': 'cyclic3d', 'k': 4, 'axis': [0.0, 0.0, 1.0]})
        self.assertEqual(parse_group('limit'), {'kind': 'limit'})
        self.assertEqual(parse_group('centered'), {'kind': 'centered'})

    def test_bad_group(self):
        for text in ('cyclic2d', 'cyclic2d:x', 'cyclic3d:4:0:1', 'dihedral:4', 'limit:3'):
            with self.subTest(text=text), self.assertRaises(InputError):
                parse_group(text)

    def test_levels(self):
        self.assertEqual(parse_levels('4, 16,64'), [4, 16, 64])
        self.assertEqual(parse_levels([10, 100]), [10, 100])
        with self.assertRaises(InputError):
            parse_levels('16,4')
        with self.assertRaises(InputError):
            parse_levels('')

    def test_fit_form(self):
        form = FitForm(data={'alpha': '2', 'base': 'disk', 'radius': '3', 'group': 'cyclic2d:4', 'data': 'd.csv', 'out': 'p.json'})
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data['group'], {'kind': 'cyclic2d', 'k': 4})
        self.assertEqual(form.base_measure('base'), UniformDisk(3.0))

    def test_fit_form_rejects_bad_values(self):
        form = FitForm(data={'alpha': '0', 'base': 'cube', 'group': 'cyclic2d:0.5', 'data': 'd.csv', 'out': 'p.json'})
        self.assertFalse(form.is_valid())
        self.assertEqual(set(form.errors), {'alpha', 'base', 'group'})


class FileTests(CommandTestCase):

    def test_csv_round_trip_is_exact(self):
        points = np.random.default_rng(0).normal(size=(20, 2))
        write_data_csv(self.path('d.csv'), points)
        np.testing.assert_array_equal(read_data_csv(self.path('d.csv'), 2), points)

    def test_malformed_row_names_line(self):
        path = self.write('d.csv', 'x,y\n1,2\n3,oops\n')
        with self.assertRaisesMessage(InputError, 'line 3'):
            read_data_csv(path, 2)

    def test_wrong_header(self):
        path = self.write('d.csv', 'x\n1\n')
        with self.assertRaises(InputError) as ctx:
            read_data_csv(path, 2)
        self.assertEqual(ctx.exception.code, 'format')

    def test_empty_file(self):
        self.assertEqual(read_data_csv(self.write('d.csv', ''), 2).shape, (0, 2))

    def test_boxes_with_open_bounds(self):
        boxes = read_boxes(self.write('b.json', '[{"low": [null, 0], "high": [1, null]}]'))
        self.assertEqual(boxes[0].low, (-math.inf, 0.0))
        self.assertEqual(boxes[0].high, (1.0, math.inf))

    def test_inverted_box_is_a_format_error(self):
        with self.assertRaises(InputError) as ctx:
            read_boxes(self.write('b.json', '[{"low": [1, 1], "high": [0, 2]}]'))
        self.assertEqual(ctx.exception.code, 'format')


class GenCommandTests(CommandTestCase):

    def test_header_only_for_empty_sample(self):
        self.call('dip_gen', dist='gauss2d', m=0, seed=1, out=self.path('d.csv'))
        self.assertEqual(self.read_bytes('d.csv'), b'x,y\n')

    def test_same_seed_same_bytes(self):
        self.call('dip_gen', dist='disk', m=50, seed=7, out=self.path('a.csv'))
        self.call('dip_gen', dist='disk', m=50, seed=7, out=self.path('b.csv'))
        self.call('dip_gen', dist='disk', m=50, seed=8, out=self.path('c.csv'))
        self.assertEqual(self.read_bytes('a.csv'), self.read_bytes('b.csv'))
        self.assertNotEqual(self.read_bytes('a.csv'), self.read_bytes('c.csv'))

    def test_gaussian_sample_mean(self):
        m = 10**5
        self.call('dip_gen', dist='gauss2d', m=m, seed=3, out=self.path('d.csv'))
        points = read_data_csv(self.path('d.csv'), 2)
        self.assertEqual(points.shape, (m, 2))
        self.assertTrue(np.all(np.abs(points.mean(axis=0)) <= 4 / math.sqrt(m)))

    def test_headers_follow_dimension(self):
        self.call('dip_gen', dist='gauss1d', m=2, seed=1, out=self.path('a.csv'))
        self.call('dip_gen', dist='gauss3d', m=2, seed=1, out=self.path('b.csv'))
        self.assertTrue(self.read_bytes('a.csv').startswith(b'x\n'))
        self.assertTrue(self.read_bytes('b.csv').startswith(b'x,y,z\n'))

    def test_usage_errors(self):
        self.assertExitCode(USAGE_ERROR, 'dip_gen', dist='gauss2d', m=-1, seed=1, out=self.path('d.csv'))
        self.assertExitCode(USAGE_ERROR, 'dip_gen', dist='gauss2d', m=5, out=self.path('d.csv'))
        self.assertExitCode(USAGE_ERROR, 'dip_gen', dist='gauss2d', m=5, seed=2**64, out=self.path('d.csv'))

    def test_unwritable_path(self):
        self.assertExitCode(IO_ERROR, 'dip_gen', dist='gauss2d', m=5, seed=1, out=self.path('missing/d.csv'))


class FitCommandTests(CommandTestCase):

    def test_single_datum_quarter_turns(self):
        data = self.write('d.csv', 'x,y\n1,0\n')
        output = self.call('dip_fit', alpha=1, base='gauss2d', group='cyclic2d:4', data=data, out=self.path('p.json'))
        self.assertIn('alpha_star=2.0 p_cont=0.5 atoms=4', output)
        payload = json.loads(self.read_bytes('p.json'))
        atoms = payload['discrete']['atoms']
        self.assertEqual([a['weight'] for a in atoms], [0.25] * 4)
        self.assertEqual([a['point'] for a in atoms], [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        self.assertEqual(payload['group'], {'kind': 'cyclic2d', 'k': 4})

    def test_empty_data_gives_prior(self):
        data = self.write('d.csv', 'x,y\n')
        output = self.call('dip_fit', alpha=3, base='disk', group='cyclic2d:8', data=data, out=self.path('p.json'))
        self.assertIn('alpha_star=3.0 p_cont=1.0 atoms=0', output)
        posterior = posterior_from_dict(json.loads(self.read_bytes('p.json')))
        self.assertEqual(posterior.m, 0)
        self.assertIsNone(posterior.discrete)

    def test_loaded_posterior_answers_like_the_original(self):
        rng = np.random.default_rng(5)
        points = rng.normal(size=(6, 2))
        write_data_csv(self.path('d.csv'), points)
        self.call('dip_fit', alpha=2, base='gauss2d', group='cyclic2d:6', data=self.path('d.csv'), out=self.path('p.json'))
        loaded = posterior_from_dict(json.loads(self.read_bytes('p.json')))
        original = fit(2.0, IsotropicGaussian2D(), points, make_cyclic_group_2d(6))
        for box in random_boxes(IsotropicGaussian2D(), 100, rng):
            self.assertEqual(eval_box(loaded.base, box), eval_box(original.base, box))

    def test_fit_is_deterministic(self):
        data = self.write('d.csv', 'x,y\n0.3,0.1\n-1,2\n')
        self.call('dip_fit', alpha=1, base='disk', group='limit', data=data, out=self.path('a.json'))
        self.call('dip_fit', alpha=1, base='disk', group='limit', data=data, out=self.path('b.json'))
        self.assertEqual(self.read_bytes('a.json'), self.read_bytes('b.json'))

    def test_non_invariant_base_is_a_warning(self):
        data = self.write('d.csv', 'x,y\n0.3,0.1\n')
        with self.assertLogs('posterior.fitting', 'WARNING'):
            self.call('dip_fit', alpha=1, base='square', group='cyclic2d:4', data=data, out=self.path('p.json'))
        self.assertTrue(json.loads(self.read_bytes('p.json'))['warnings'])

    def test_malformed_row(self):
        data = self.write('d.csv', 'x,y\n1,0\n2\n')
        error = self.assertExitCode(IO_ERROR, 'dip_fit', alpha=1, base='gauss2d', group='cyclic2d:4', data=data, out=self.path('p.json'))
        self.assertIn('line 3', str(error))

    def test_missing_data_file(self):
        self.assertExitCode(IO_ERROR, 'dip_fit', alpha=1, base='gauss2d', group='cyclic2d:4', data=self.path('nope.csv'), out=self.path('p.json'))

    def test_usage_errors(self):
        data = self.write('d.csv', 'x,y\n1,0\n')
        self.assertExitCode(USAGE_ERROR, 'dip_fit', alpha=-1, base='gauss2d', group='cyclic2d:4', data=data, out=self.path('p.json'))
        self.assertExitCode(USAGE_ERROR, 'dip_fit', alpha=1, base='gauss2d', group='cyclic2d:x', data=data, out=self.path('p.json'))
        self.assertExitCode(USAGE_ERROR, 'dip_fit', alpha=1, base='gauss2d', group='reflection:0', data=data, out=self.path('p.json'))

    def test_config_file_with_flag_override(self):
        data = self.write('d.csv', 'x,y\n1,0\n')
        config = self.write('c.json', json.dumps({'alpha': 5, 'base': 'gauss2d', 'group': 'cyclic2d:4', 'data': data, 'out': self.path('p.json')}))
        output = self.call('dip_fit', config=config, alpha='1')
        self.assertIn('alpha_star=2.0', output)

    def test_malformed_config(self):
        self.assertExitCode(IO_ERROR, 'dip_fit', config=self.write('c.json', '{"alpha": '))
        self.assertExitCode(IO_ERROR, 'dip_fit', config=self.write('c.json', '[1, 2]'))


class SampleCommandTests(CommandTestCase):

    def fit_file(self, group='cyclic2d:4', rows='1,0\n0.2,-0.7\n'):
        data = self.write('d.csv', 'x,y\n' + rows)
        self.call('dip_fit', alpha=1, base='gauss2d', group=group, data=data, out=self.path('p.json'))
        return self.path('p.json')

    def test_one_path_per_line(self):
        posterior = self.fit_file()
        output = self.call('dip_sample', posterior=posterior, reps=4, seed=11, n_atoms=30, out=self.path('paths.jsonl'))
        self.assertIn('4 finite paths', output)
        lines = read_jsonl(self.path('paths.jsonl'))
        self.assertEqual([line['replica'] for line in lines], [0, 1, 2, 3])
        for line in lines:
            path = path_from_dict(line)
            self.assertEqual(path.measure.size, 4 * 30)
            self.assertAlmostEqual(math.fsum(path.measure.weights), 1.0, places=12)
            self.assertEqual(line['seed'], 11)

    def test_same_seed_same_bytes(self):
        posterior = self.fit_file()
        self.call('dip_sample', posterior=posterior, reps=3, seed=2, out=self.path('a.jsonl'))
        self.call('dip_sample', posterior=posterior, reps=3, seed=2, out=self.path('b.jsonl'))
        self.assertEqual(self.read_bytes('a.jsonl'), self.read_bytes('b.jsonl'))

    def test_trivial_group_gives_dp_paths(self):
        posterior = self.fit_file(group='cyclic2d:1')
        self.call('dip_sample', posterior=posterior, reps=3, seed=9, sampler='finite:25', out=self.path('paths.jsonl'))
        points = read_data_csv(self.path('d.csv'), 2)
        params = dp_posterior_params(1.0, IsotropicGaussian2D(), points)
        config = SamplerConfig.parse('finite:25')
        for line, child in zip(read_jsonl(self.path('paths.jsonl')), replica_rngs(make_rng(9), 3)):
            expected = config.draw(params, child).measure
            measure = path_from_dict(line).measure
            np.testing.assert_array_equal(measure.points, expected.points)
            np.testing.assert_array_equal(measure.weights, expected.weights)

    def test_invalid_sampler(self):
        posterior = self.fit_file()
        self.assertExitCode(USAGE_ERROR, 'dip_sample', posterior=posterior, reps=2, seed=1, sampler='gibbs', out=self.path('p.jsonl'))
        self.assertExitCode(USAGE_ERROR, 'dip_sample', posterior=posterior, reps=2, seed=1, sampler='stick-breaking:2', out=self.path('p.jsonl'))

    def test_malformed_posterior(self):
        posterior = self.write('p.json', '{"alpha": 1}')
        self.assertExitCode(IO_ERROR, 'dip_sample', posterior=posterior, reps=2, seed=1, out=self.path('p.jsonl'))


class ConvergeCommandTests(CommandTestCase):

    def rows(self, name):
        with open(self.path(name), newline='') as fp:
            return list(csv.DictReader(fp))

    def test_k_sweep_base_gaps(self):
        data = self.write('d.csv', 'x,y\n1,0\n')
        boxes = self.write('b.json', '[{"low": [0.5, 0.5], "high": [2, 2]}]')
        output = self.call(
            'dip_converge', mode='k', alpha=1, base='disk', radius=2, data=data, boxes=boxes,
            k_levels='4,16', reps=10, n_atoms=10, seed=4, out=self.path('k.csv'),
        )
        self.assertIn('k=16', output)
        gaps = [float(r['value']) for r in self.rows('k.csv') if r['statistic'] == 'base_gap']
        self.assertAlmostEqual(gaps[0], 0.5 / 12, delta=1e-12)
        self.assertAlmostEqual(gaps[1], 0.5 * (1 / 12 - 1 / 16), delta=1e-12)
        self.assertEqual({r['seed'] for r in self.rows('k.csv')}, {'4'})

    def test_symmetric_data_have_no_gap(self):
        data = self.write('d.csv', 'x,y\n0,0\n')
        self.call(
            'dip_converge', mode='k', alpha=1, base='gauss2d', data=data, k_levels='2,8',
            reps=3, n_atoms=5, seed=1, out=self.path('k.csv'),
        )
        self.assertTrue(all(float(r['value']) == 0.0 for r in self.rows('k.csv') if r['statistic'] == 'base_gap'))

    def test_m_sweep(self):
        self.call('dip_converge', mode='m', alpha=1, base='disk', true='gauss2d', m_levels='10,1000', seed=6, out=self.path('m.csv'))
        gaps = [float(r['value']) for r in self.rows('m.csv')]
        self.assertEqual(len(gaps), 2)
        self.assertLess(gaps[1], gaps[0])

    def test_reproducible_json_report(self):
        for name in ('a.json', 'b.json'):
            self.call('dip_converge', mode='m', alpha=1, base='gauss2d', true='gauss2d', m_levels='5,50', seed=2, format='json', out=self.path(name))
        self.assertEqual(self.read_bytes('a.json'), self.read_bytes('b.json'))
        self.assertEqual(json.loads(self.read_bytes('a.json'))['levels'], [5, 50])

    def test_missing_sweep_arguments(self):
        self.assertExitCode(USAGE_ERROR, 'dip_converge', mode='k', alpha=1, base='gauss2d', seed=1, out=self.path('k.csv'))
        self.assertExitCode(USAGE_ERROR, 'dip_converge', mode='m', alpha=1, base='gauss2d', true='gauss2d', m_levels='10,5', seed=1, out=self.path('m.csv'))
        self.assertExitCode(USAGE_ERROR, 'dip_converge', mode='m', alpha=1, base='gauss2d', true='gauss2d', m_levels='10', group='limit', seed=1, out=self.path('m.csv'))


class CheckCommandTests(CommandTestCase):

    def setUp(self):
        super().setUp()
        data = self.write('d.csv', 'x,y\n1,0.5\n-0.4,0.9\n')
        self.call('dip_fit', alpha=20, base='gauss2d', group='cyclic2d:4', data=data, out=self.path('p.json'))
        self.posterior = self.path('p.json')

    def test_invariance_passes(self):
        output = self.call('dip_check', kind='invariance', posterior=self.posterior, reps=3, seed=1, n_atoms=50, out=self.path('r.csv'))
        self.assertIn('invariance over 200 boxes and 3 paths', output)
        self.assertEqual(len(self.read_bytes('r.csv').splitlines()), 4)

    def test_distorted_paths_fail_invariance(self):
        error = self.assertExitCode(CHECK_FAILED, 'dip_check', kind='invariance', posterior=self.posterior, reps=2, seed=1, n_atoms=50, distort=1.1)
        self.assertIn('path 0', str(error))

    def test_moments_pass(self):
        output = self.call('dip_check', kind='moments', posterior=self.posterior, reps=3000, seed=5)
        self.assertIn('moments over 4 boxes and 3000 paths', output)

    def test_distorted_moments_fail(self):
        boxes = self.write('b.json', '[{"low": [0, null], "high": [null, null]}, {"low": [null, null], "high": [0, null]}]')
        self.assertExitCode(CHECK_FAILED, 'dip_check', kind='moments', posterior=self.posterior, boxes=boxes, reps=4000, seed=5, distort=1.1)

    def test_full_space_box_scores_zero(self):
        boxes = self.write('b.json', '[{"low": [null, null], "high": [null, null]}]')
        self.call('dip_check', kind='moments', posterior=self.posterior, boxes=boxes, reps=20, seed=1, n_atoms=20, format='json', out=self.path('r.json'))
        report = json.loads(self.read_bytes('r.json'))
        self.assertEqual(report['z_mean'], [0.0])
        self.assertTrue(report['passed'])

    def test_overlapping_boxes(self):
        boxes = self.write('b.json', '[{"low": [0, 0], "high": [1, 1]}, {"low": [0.5, 0.5], "high": [2, 2]}]')
        self.assertExitCode(USAGE_ERROR, 'dip_check', kind='moments', posterior=self.posterior, boxes=boxes, reps=10, seed=1)

    def test_missing_posterior(self):
        self.assertExitCode(IO_ERROR, 'dip_check', kind='moments', posterior=self.path('none.json'), reps=10, seed=1)

    def test_centred_posterior_has_no_invariance_check(self):
        data = self.write('c.csv', 'x\n0.5\n-1\n')
        self.call('dip_fit', alpha=1, base='gauss1d', group='centered', data=data, out=self.path('c.json'))
        self.assertExitCode(USAGE_ERROR, 'dip_check', kind='invariance', posterior=self.path('c.json'), reps=2, seed=1)
