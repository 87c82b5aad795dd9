"""
Orbit-symmetrized and centred empirical measures.
"""
import math

import numpy as np

from dipsim.exceptions import DimensionMismatch, InputError
from symmetry.groups import as_point, as_points

from .measures import DiscreteMeasure


def symmetrized_dirac(group, x):
    """Uniform measure on the orbit of ``x``: k atoms of weight 1/k."""
    points = group.orbit(as_point(x, group.dim))
    return DiscreteMeasure(points, np.full(group.order, 1.0 / group.order))


def symmetrized_empirical(group, data):
    """
    Average of the symmetrized Diracs of the data points.

    Atoms are ordered datum by datum, each followed by its k images in group
    element order; every atom has weight 1/(k*m).
    """
    points = as_points(data, group.dim)
    m = points.shape[0]
    if m == 0:
        raise InputError('cannot symmetrize an empty sample', code='empty')
    images = group.apply_all(points).transpose(1, 0, 2).reshape(m * group.order, group.dim)
    return DiscreteMeasure(images, np.full(m * group.order, 1.0 / (m * group.order)))


def centered_empirical(data):
    """
    Empirical measure of ``X_i - mean(X)`` for real-valued data.

    The data-driven part of the posterior when the only structural
    assumption is a zero mean.
    """
    values = np.asarray(data, dtype=float).reshape(-1)
    if values.size == 0:
        raise InputError('cannot centre an empty sample', code='empty')
    mean = math.fsum(values) / values.size
    return DiscreteMeasure.uniform((values - mean).reshape(-1, 1))


def orbit_symmetrize_measure(group, measure):
    """
    Replace each atom (x, w) by the k atoms (g_j(x), w/k).

    The result is exactly invariant under ``group``.
    """
    if measure.dim != group.dim:
        raise DimensionMismatch(group.dim, measure.dim)
    k, n = group.order, measure.size
    if k == 1:
        return measure
    images = group.apply_all(measure.points).transpose(1, 0, 2).reshape(n * k, group.dim)
    return DiscreteMeasure(images, np.repeat(measure.weights / k, k))
