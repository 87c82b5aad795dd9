"""
JSON forms of fitted posteriors and sampled paths.

A posterior is stored by what it was fitted from (alpha, base, group, data)
together with the derived alpha_star, p_cont and the discrete part of its
base (for reading only); loading refits from the inputs, so the loaded
posterior answers every box query exactly as the original did.
"""
import math

from dipsim.exceptions import InputError
from dirichlet.sampling import Truncation, TruncatedPath
from measures.serializers import base_from_dict, discrete_from_dict

from .fitting import fit_described


def posterior_to_dict(posterior):
    return {
        'alpha': posterior.alpha,
        'alpha_star': posterior.alpha_star,
        'p_cont': posterior.p_cont,
        'group': posterior.group_description(),
        'base_continuous': posterior.base.continuous.as_dict(),
        'data': posterior.data.tolist(),
        'discrete': None if posterior.discrete is None else posterior.discrete.as_dict(),
        'warnings': list(posterior.warnings),
    }


def posterior_from_dict(payload):
    """
    Rebuild a posterior from ``posterior_to_dict`` output.

    The invariance spot check is not rerun; stored warnings are carried over.

    Raises:
        InputError: missing fields, or alpha_star inconsistent with alpha and the data.
    """
    try:
        base = base_from_dict(payload['base_continuous'])
        data = payload['data']
        group = dict(payload['group'])
        alpha_star = float(payload['alpha_star'])
        alpha = float(payload['alpha']) if 'alpha' in payload else alpha_star - len(data)
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f'malformed posterior: {e}', code='format')

    posterior = fit_described(alpha, base, data, group, check_invariance=False)
    if not math.isclose(posterior.alpha_star, alpha_star, rel_tol=0.0, abs_tol=1e-12 * max(1.0, alpha_star)):
        raise InputError(f'alpha_star {alpha_star!r} does not equal alpha + m = {posterior.alpha_star!r}', code='format')
    posterior.warnings.extend(payload.get('warnings', []))
    return posterior


def path_to_dict(path):
    return path.as_dict()


def path_from_dict(payload):
    try:
        truncation = Truncation.from_dict(payload['truncation'])
    except (KeyError, TypeError) as e:
        raise InputError(f'malformed path: {e}', code='format')
    return TruncatedPath(discrete_from_dict(payload), truncation)
