"""
Validation of command-line parameters.

Every command collects its flags (and the optional --config file) into a
dict and validates it with one of these forms before any computation runs.
"""
import dataclasses

from django import forms

from dipsim.exceptions import InputError
from dipsim.rng import MAX_SEED
from dirichlet.sampling import FINITE, STICK_BREAKING, SamplerConfig
from measures.measures import BASE_KINDS, make_base
from posterior.fitting import CENTERED, LIMIT

# short names accepted by --base, --dist and --true
BASE_ALIASES = {
    'gauss1d': 'gauss1d-symmetric',
    'gauss2d': 'gauss2d-isotropic',
    'gauss3d': 'gauss3d-isotropic',
    'disk': 'uniform-disk',
    'square': 'uniform-unit-square',
    'ball3d': 'uniform-ball3d',
}
BASE_CHOICES = [(name, name) for name in BASE_ALIASES] + [(kind, kind) for kind in BASE_KINDS]

FORMAT_CHOICES = [('csv', 'csv'), ('json', 'json')]


def parse_group(text):
    """
    Group description from its command-line form.

    ``cyclic2d:K``, ``reflection:MU``, ``cyclic3d:K:AX:AY:AZ``, ``limit`` or
    ``centered``.
    """
    kind, *args = str(text).strip().split(':')
    try:
        if kind == 'cyclic2d' and len(args) == 1:
            return {'kind': kind, 'k': int(args[0])}
        if kind == 'reflection' and len(args) == 1:
            return {'kind': kind, 'mu': float(args[0])}
        if kind == 'cyclic3d' and len(args) == 4:
            return {'kind': kind, 'k': int(args[0]), 'axis': [float(v) for v in args[1:]]}
        if kind in (LIMIT, CENTERED) and not args:
            return {'kind': kind}
    except ValueError:
        pass
    raise InputError(
        f'malformed group {text!r}; use cyclic2d:K, reflection:MU, cyclic3d:K:AX:AY:AZ, limit or centered',
        code='group',
    )


def parse_levels(value):
    """Comma-separated text or a JSON list of integers."""
    if isinstance(value, str):
        value = [v for v in value.replace(' ', '').split(',') if v]
    try:
        levels = [int(v) for v in value]
    except (TypeError, ValueError):
        raise InputError(f'levels must be integers, got {value!r}', code='range')
    if not levels:
        raise InputError('at least one level is needed', code='range')
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise InputError(f'levels must be strictly increasing, got {levels}', code='range')
    return levels


def build_base(name, mu=None, sigma=None, radius=None):
    """Base measure for an alias or full kind; parameters the kind does not take are ignored."""
    kind = BASE_ALIASES.get(name, name)
    accepted = {f.name for f in dataclasses.fields(BASE_KINDS[kind])}
    given = {'mu': mu, 'sigma': sigma, 'radius': radius}
    return make_base(kind, **{k: v for k, v in given.items() if v is not None and k in accepted})


class LevelsField(forms.Field):
    def to_python(self, value):
        if value in self.empty_values:
            return None
        return parse_levels(value)


class SeedField(forms.IntegerField):
    def __init__(self, **kwargs):
        super().__init__(min_value=0, max_value=MAX_SEED, **kwargs)


class AlphaForm(forms.Form):
    alpha = forms.FloatField()

    def clean_alpha(self):
        alpha = self.cleaned_data['alpha']
        if alpha <= 0:
            raise forms.ValidationError('Concentration must be positive.')
        return alpha


class BaseParamsForm(forms.Form):
    """Shared base-measure parameters."""

    mu = forms.FloatField(required=False)
    sigma = forms.FloatField(required=False, min_value=0.0)
    radius = forms.FloatField(required=False, min_value=0.0)

    def base_measure(self, field_name):
        data = self.cleaned_data
        return build_base(data[field_name], mu=data.get('mu'), sigma=data.get('sigma'), radius=data.get('radius'))


class SamplerFieldsMixin(forms.Form):
    """--sampler, or --n-atoms / --eps as shorthand for it."""

    sampler = forms.CharField(required=False)
    n_atoms = forms.IntegerField(required=False, min_value=1)
    eps = forms.FloatField(required=False)

    def clean_sampler_config(self, cleaned_data):
        if cleaned_data.get('n_atoms') is not None:
            return SamplerConfig(FINITE, n_atoms=cleaned_data['n_atoms'])
        if cleaned_data.get('eps') is not None:
            return SamplerConfig(STICK_BREAKING, eps=cleaned_data['eps'])
        if cleaned_data.get('sampler'):
            return SamplerConfig.parse(cleaned_data['sampler'])
        return SamplerConfig()

    def clean(self):
        cleaned_data = super().clean()
        try:
            cleaned_data['sampler_config'] = self.clean_sampler_config(cleaned_data)
        except InputError as e:
            self.add_error('sampler', e)
        return cleaned_data


class GenForm(BaseParamsForm):
    dist = forms.ChoiceField(choices=BASE_CHOICES)
    m = forms.IntegerField(min_value=0)
    seed = SeedField()
    out = forms.CharField()


class FitForm(AlphaForm, BaseParamsForm):
    base = forms.ChoiceField(choices=BASE_CHOICES)
    group = forms.CharField()
    data = forms.CharField()
    out = forms.CharField()

    def clean_group(self):
        return parse_group(self.cleaned_data['group'])


class SampleForm(SamplerFieldsMixin):
    posterior = forms.CharField()
    reps = forms.IntegerField(min_value=1)
    seed = SeedField()
    out = forms.CharField()
    k_sym = forms.IntegerField(required=False, min_value=1)


class ConvergeForm(SamplerFieldsMixin, AlphaForm, BaseParamsForm):
    mode = forms.ChoiceField(choices=[('k', 'k-sweep'), ('m', 'm-sweep')])
    base = forms.ChoiceField(choices=BASE_CHOICES)
    seed = SeedField()
    out = forms.CharField()
    format = forms.ChoiceField(choices=FORMAT_CHOICES, required=False)
    boxes = forms.CharField(required=False)
    # k-sweep
    data = forms.CharField(required=False)
    k_levels = LevelsField(required=False)
    reps = forms.IntegerField(required=False, min_value=1)
    # m-sweep
    true = forms.ChoiceField(choices=BASE_CHOICES, required=False)
    m_levels = LevelsField(required=False)
    group = forms.CharField(required=False)

    def clean_group(self):
        group = self.cleaned_data.get('group')
        if not group:
            return None
        description = parse_group(group)
        if description['kind'] in (LIMIT, CENTERED):
            raise forms.ValidationError('An m-sweep needs a finite group.')
        return description

    def clean(self):
        cleaned_data = super().clean()
        required = {'k': ('data', 'k_levels', 'reps'), 'm': ('true', 'm_levels')}.get(cleaned_data.get('mode'), ())
        for name in required:
            if cleaned_data.get(name) in (None, ''):
                self.add_error(name, f'Required for a {cleaned_data["mode"]}-sweep.')
        if cleaned_data.get('m_levels') and cleaned_data['m_levels'][0] < 0:
            self.add_error('m_levels', 'Sample sizes must be non-negative.')
        if cleaned_data.get('k_levels') and cleaned_data['k_levels'][0] < 1:
            self.add_error('k_levels', 'Group orders must be positive.')
        cleaned_data['format'] = cleaned_data.get('format') or 'csv'
        return cleaned_data


class CheckForm(SamplerFieldsMixin):
    kind = forms.ChoiceField(choices=[('moments', 'moments'), ('invariance', 'invariance')])
    posterior = forms.CharField()
    reps = forms.IntegerField(min_value=1)
    seed = SeedField()
    boxes = forms.CharField(required=False)
    distort = forms.FloatField(required=False)
    symmetrize = forms.BooleanField(required=False)
    k_sym = forms.IntegerField(required=False, min_value=1)
    out = forms.CharField(required=False)
    format = forms.ChoiceField(choices=FORMAT_CHOICES, required=False)

    def clean_distort(self):
        distort = self.cleaned_data.get('distort')
        if distort is not None and distort <= 0:
            raise forms.ValidationError('Distortion factor must be positive.')
        return distort

    def clean(self):
        cleaned_data = super().clean()
        cleaned_data['format'] = cleaned_data.get('format') or 'csv'
        return cleaned_data
