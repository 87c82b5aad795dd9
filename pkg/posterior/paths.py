"""
Sample paths of fitted posteriors.

A path is a Dirichlet process draw with the posterior's concentration and
base, made invariant by spreading every atom uniformly over its orbit.
Finite groups give exactly invariant paths; the rotation limit uses an
equally spaced grid of ``DIP_LIMIT_K_SYM`` rotations.
"""
import logging

from dipsim.conf import setting
from dipsim.exceptions import InputError
from dirichlet.sampling import FINITE as FINITE_N, DPParams, SamplerConfig, Truncation, TruncatedPath, finite_weights
from measures.measures import DiscreteMeasure
from measures.orbits import orbit_symmetrize_measure
from symmetry.groups import as_points, make_cyclic_group_2d

from .fitting import CENTERED, FINITE, LIMIT, check_alpha, posterior_base, rotation_grid

logger = logging.getLogger(__name__)


def as_sampler(sampler):
    if sampler is None:
        return SamplerConfig()
    if isinstance(sampler, SamplerConfig):
        return sampler
    return SamplerConfig.parse(sampler)


def draw_dp_path(posterior, sampler, rng):
    """The Dirichlet process draw DP(alpha_star, base) underlying a path, before symmetrization."""
    return as_sampler(sampler).draw(DPParams(posterior.alpha_star, posterior.base), rng)


def symmetrize_path(posterior, path, k_sym=None):
    if posterior.kind == FINITE:
        measure = orbit_symmetrize_measure(posterior.group, path.measure)
    elif posterior.kind == LIMIT:
        measure = orbit_symmetrize_measure(rotation_grid(k_sym or setting('DIP_LIMIT_K_SYM', 360)), path.measure)
    elif posterior.kind == CENTERED:
        measure = path.measure
    else:
        raise InputError(f'unknown posterior kind {posterior.kind!r}', code='group')
    return TruncatedPath(measure, path.truncation)


def sample_path(posterior, sampler, rng, k_sym=None):
    """
    One sample path of ``posterior``.

    Args:
        sampler: a SamplerConfig or its text form ('stick-breaking:EPS', 'finite:N')
        k_sym: rotation grid for limit posteriors (default DIP_LIMIT_K_SYM)
    """
    return symmetrize_path(posterior, draw_dp_path(posterior, sampler, rng), k_sym)


def run_paper_algorithm(alpha, base, data, k, n_atoms, rng):
    """
    Five-step construction of a posterior path under the k planar rotations.

    1. angles 2*pi*j/k, j = 0..k-1
    2. every rotated datum A_j X_i
    3. the equal-weight empirical measure of those k*m points
    4. N draws from the posterior base
    5. Dirichlet(alpha*/N, ...) weights, then orbit symmetrization

    Consumes ``rng`` exactly as ``fit`` followed by ``sample_path`` with the
    'finite:N' sampler, so both give the same path for the same seed.
    """
    alpha = check_alpha(alpha)
    group = make_cyclic_group_2d(k)
    points = as_points(data, 2)
    m = points.shape[0]

    rotated = group.apply_all(points).transpose(1, 0, 2).reshape(group.order * m, 2)
    empirical = DiscreteMeasure.uniform(rotated) if m else None
    mixture = posterior_base(alpha, base, empirical, m)

    config = SamplerConfig(FINITE_N, n_atoms=n_atoms)
    atoms = mixture.sample(config.n_atoms, rng)
    weights = finite_weights(alpha + m, config.n_atoms, rng)
    path = DiscreteMeasure(atoms, weights)
    logger.debug(f'constructed path: k={k}, m={m}, N={config.n_atoms}')
    return TruncatedPath(orbit_symmetrize_measure(group, path), Truncation(config.mode, n_atoms=config.n_atoms))
