import numpy as np

from dipsim.rng import make_rng
from lab.base import DipCommand, add_base_param_arguments
from lab.forms import GenForm
from lab.utils import write_data_csv
from measures.measures import sample


class Command(DipCommand):
    help = 'Draw m points from a distribution and write them as CSV.'
    form_class = GenForm

    def add_run_arguments(self, parser):
        parser.add_argument('--dist', help='gauss1d, gauss2d, gauss3d, disk, square, ball3d or a full kind')
        parser.add_argument('--m', help='number of points (0 writes the header only)')
        parser.add_argument('--seed', help='64-bit unsigned seed')
        parser.add_argument('--out', help='CSV file to write')
        add_base_param_arguments(parser)

    def run(self, form):
        data = form.cleaned_data
        dist = form.base_measure('dist')
        rng = make_rng(data['seed'])
        points = sample(dist, data['m'], rng) if data['m'] else np.empty((0, dist.dim))
        write_data_csv(data['out'], points)
        self.stdout.write(f'{data["m"]} points from {dist.kind} written to {data["out"]} (seed {data["seed"]})')
