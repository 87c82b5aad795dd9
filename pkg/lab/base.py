"""
Shared plumbing of the dip_* management commands.

Values come from an optional ``--config`` JSON file, then from the flags
given on the command line, which win. The merged dict is validated by the
command's form and only then handed to ``run``.
"""
from django.core.exceptions import NON_FIELD_ERRORS
from django.core.management.base import BaseCommand, CommandError

from dipsim.exceptions import InputError

from .decorators import USAGE_ERROR, exit_codes
from .utils import read_json


def add_base_param_arguments(parser):
    parser.add_argument('--mu', help='centre of a gauss1d base')
    parser.add_argument('--sigma', help='scale of a Gaussian base')
    parser.add_argument('--radius', help='radius of a disk or ball base')


def add_sampler_arguments(parser):
    parser.add_argument('--sampler', help="'stick-breaking[:EPS]' or 'finite[:N]'")
    parser.add_argument('--n-atoms', help='shorthand for --sampler finite:N')
    parser.add_argument('--eps', help='shorthand for --sampler stick-breaking:EPS')


class DipCommand(BaseCommand):
    form_class = None

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON file mirroring the flags; flags override it')
        self.add_run_arguments(parser)

    def add_run_arguments(self, parser):
        raise NotImplementedError

    def collect(self, options):
        values = {}
        if options.get('config'):
            payload = read_json(options['config'])
            if not isinstance(payload, dict):
                raise InputError(f'{options["config"]}: a config file holds one JSON object', code='format')
            values.update({key.replace('-', '_'): value for key, value in payload.items()})
        for name in self.form_class.base_fields:
            if options.get(name) is not None:
                values[name] = options[name]
        return values

    @exit_codes
    def handle(self, *args, **options):
        form = self.form_class(data=self.collect(options))
        if not form.is_valid():
            problems = '; '.join(
                ' '.join(errors) if field == NON_FIELD_ERRORS else f'--{field.replace("_", "-")}: {" ".join(errors)}'
                for field, errors in form.errors.items()
            )
            raise CommandError(problems, returncode=USAGE_ERROR)
        self.run(form)

    def run(self, form):
        raise NotImplementedError
