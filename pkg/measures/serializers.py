"""
JSON forms of discrete and base measures.

DiscreteMeasure: {"dim": p, "atoms": [{"point": [...], "weight": w}, ...]}.
Floats are written with Python's shortest round-trip repr, so loading a
dumped measure gives bit-identical points and weights.
"""
from dipsim.exceptions import InputError

from .measures import DiscreteMeasure, make_base


def discrete_from_dict(payload):
    try:
        dim = int(payload['dim'])
        atoms = payload['atoms']
        points = [atom['point'] for atom in atoms]
        weights = [atom['weight'] for atom in atoms]
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f'malformed discrete measure: {e}', code='format')
    if any(len(p) != dim for p in points):
        raise InputError(f'atom with dimension other than {dim}', code='dimension')
    return DiscreteMeasure(points, weights)


def base_from_dict(payload):
    try:
        params = dict(payload)
        kind = params.pop('kind')
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f'malformed base measure: {e}', code='format')
    return make_base(kind, **params)
