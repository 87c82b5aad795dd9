from dipsim.rng import make_rng, replica_rngs
from lab.base import DipCommand, add_sampler_arguments
from lab.forms import SampleForm
from lab.utils import read_json, write_jsonl
from posterior.paths import sample_path
from posterior.serializers import path_to_dict, posterior_from_dict


class Command(DipCommand):
    help = 'Sample paths of a fitted posterior into a JSON-lines file, one path per line.'
    form_class = SampleForm

    def add_run_arguments(self, parser):
        parser.add_argument('--posterior', help='posterior JSON written by dip_fit')
        parser.add_argument('--reps', help='number of paths')
        parser.add_argument('--seed', help='64-bit unsigned seed')
        parser.add_argument('--out', help='JSON-lines file to write')
        parser.add_argument('--k-sym', help='rotation grid for limit posteriors')
        add_sampler_arguments(parser)

    def run(self, form):
        data = form.cleaned_data
        posterior = posterior_from_dict(read_json(data['posterior']))
        config = data['sampler_config']
        rng = make_rng(data['seed'])

        def paths():
            for i, child in enumerate(replica_rngs(rng, data['reps'])):
                payload = path_to_dict(sample_path(posterior, config, child, data['k_sym']))
                payload.update(replica=i, seed=data['seed'])
                yield payload

        count = write_jsonl(data['out'], paths())
        self.stdout.write(f'{count} {config.mode} paths written to {data["out"]} (seed {data["seed"]})')
