from convergence.lab import default_grid, sweep_k, sweep_m
from dipsim.rng import make_rng
from lab.base import DipCommand, add_base_param_arguments, add_sampler_arguments
from lab.forms import ConvergeForm
from lab.utils import read_boxes, read_data_csv, write_report
from posterior.fitting import build_group


class Command(DipCommand):
    help = 'Run a convergence sweep over group orders (k) or sample sizes (m) and write the report.'
    form_class = ConvergeForm

    def add_run_arguments(self, parser):
        parser.add_argument('--mode', help='k (group order sweep) or m (sample size sweep)')
        parser.add_argument('--alpha', help='prior concentration')
        parser.add_argument('--base', help='prior base measure')
        parser.add_argument('--seed', help='64-bit unsigned seed')
        parser.add_argument('--out', help='report file to write')
        parser.add_argument('--format', help='csv (default) or json')
        parser.add_argument('--boxes', help='JSON list of boxes; a default grid otherwise')
        parser.add_argument('--data', help='k-sweep: planar CSV sample')
        parser.add_argument('--k-levels', help='k-sweep: increasing group orders, e.g. 4,16,64,256')
        parser.add_argument('--reps', help='k-sweep: paths per level')
        parser.add_argument('--true', help='m-sweep: law the data are drawn from')
        parser.add_argument('--m-levels', help='m-sweep: increasing sample sizes, e.g. 10,100,1000')
        parser.add_argument('--group', help='m-sweep: finite group (default by dimension)')
        add_base_param_arguments(parser)
        add_sampler_arguments(parser)

    def run(self, form):
        data = form.cleaned_data
        base = form.base_measure('base')
        rng = make_rng(data['seed'])
        boxes = read_boxes(data['boxes']) if data['boxes'] else None

        if data['mode'] == 'k':
            points = read_data_csv(data['data'], 2)
            report = sweep_k(
                data['alpha'], base, points, data['k_levels'], boxes or default_grid(2, cells=4),
                data['reps'], rng, data['sampler_config'], seed=data['seed'],
            )
            lines = [
                f'k={k}: max base gap {gap:.3e}, max KS {ks:.4f}'
                for k, gap, ks in zip(report.levels, report.column('base_gap'), report.column('ks'))
            ]
        else:
            group = build_group(data['group']) if data['group'] else None
            report = sweep_m(
                form.base_measure('true'), data['alpha'], base, data['m_levels'], rng,
                group=group, boxes=boxes, seed=data['seed'],
            )
            lines = [f'm={m}: sup gap {gap:.4f}' for m, gap in zip(report.levels, report.column('sup_gap'))]

        write_report(data['out'], report, data['format'])
        self.stdout.write('\n'.join(lines))
