from lab.base import DipCommand, add_base_param_arguments
from lab.forms import FitForm
from lab.utils import read_data_csv, write_json
from posterior.fitting import fit_described
from posterior.serializers import posterior_to_dict


class Command(DipCommand):
    help = 'Fit the posterior of a Dirichlet invariant process to a CSV sample.'
    form_class = FitForm

    def add_run_arguments(self, parser):
        parser.add_argument('--alpha', help='prior concentration')
        parser.add_argument('--base', help='prior base measure')
        parser.add_argument('--group', help='cyclic2d:K, reflection:MU, cyclic3d:K:AX:AY:AZ, limit or centered')
        parser.add_argument('--data', help='CSV sample (header x, x,y or x,y,z)')
        parser.add_argument('--out', help='posterior JSON to write')
        add_base_param_arguments(parser)

    def run(self, form):
        data = form.cleaned_data
        base = form.base_measure('base')
        points = read_data_csv(data['data'], base.dim)
        posterior = fit_described(data['alpha'], base, points, data['group'])
        write_json(data['out'], posterior_to_dict(posterior))
        atoms = getattr(posterior.discrete, 'size', 0)
        self.stdout.write(f'alpha_star={posterior.alpha_star!r} p_cont={posterior.p_cont!r} atoms={atoms}')
