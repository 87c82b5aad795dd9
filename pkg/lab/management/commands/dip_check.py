from django.core.management.base import CommandError

from convergence.lab import check_moments, check_path_invariance, default_grid
from dipsim.rng import make_rng
from lab.base import DipCommand, add_sampler_arguments
from lab.decorators import CHECK_FAILED
from lab.forms import CheckForm
from lab.utils import read_boxes, read_json, write_report
from posterior.serializers import posterior_from_dict


class Command(DipCommand):
    help = 'Check sampled paths of a fitted posterior: Dirichlet moments or group invariance. Exits 1 on failure.'
    form_class = CheckForm

    def add_run_arguments(self, parser):
        parser.add_argument('--kind', help='moments or invariance')
        parser.add_argument('--posterior', help='posterior JSON written by dip_fit')
        parser.add_argument('--reps', help='number of paths')
        parser.add_argument('--seed', help='64-bit unsigned seed')
        parser.add_argument('--boxes', help='JSON list of boxes (disjoint for moments)')
        parser.add_argument('--distort', help='negative control: reweight mass in one box by this factor')
        parser.add_argument('--symmetrize', action='store_true', default=None, help='moments: test symmetrized paths')
        parser.add_argument('--k-sym', help='rotation grid for limit posteriors')
        parser.add_argument('--out', help='report file to write')
        parser.add_argument('--format', help='csv (default) or json')
        add_sampler_arguments(parser)

    def run(self, form):
        data = form.cleaned_data
        posterior = posterior_from_dict(read_json(data['posterior']))
        rng = make_rng(data['seed'])
        boxes = read_boxes(data['boxes']) if data['boxes'] else None

        if data['kind'] == 'moments':
            boxes = boxes or default_grid(posterior.dim, cells=2)
            check = check_moments(
                posterior, boxes, data['reps'], rng, data['sampler_config'],
                symmetrize=data['symmetrize'], distort=data['distort'], seed=data['seed'],
            )
            summary = f'moments over {len(boxes)} boxes and {check.reps} paths: max |z| = {check.max_abs_z:.3f} (threshold {check.threshold:g})'
        else:
            check = check_path_invariance(
                posterior, data['reps'], rng, boxes=boxes, sampler=data['sampler_config'],
                distort=data['distort'], k_sym=data['k_sym'], seed=data['seed'],
            )
            summary = f'invariance over {check.boxes} boxes and {check.reps} paths: max gap = {check.max_gap:.3e} (tolerance {check.tolerance:g})'

        if data['out']:
            write_report(data['out'], check, data['format'])
        self.stdout.write(summary)
        if not check.passed:
            raise CommandError('\n'.join(check.failures()), returncode=CHECK_FAILED)
