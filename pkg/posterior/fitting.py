"""
Posterior fitting for Dirichlet invariant processes.

Given a concentration ``alpha``, a group-invariant base measure H and data
X_1..X_m, the posterior is again a Dirichlet invariant process with
concentration alpha + m and base

    (alpha * H + sum_i (1/k) sum_j delta_{g_j X_i}) / (alpha + m).

Besides finite groups, the rotation limit (k -> infinity) and the
mean-centred relaxation are fitted here.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from dipsim.conf import setting
from dipsim.exceptions import DimensionMismatch, InputError
from measures.measures import MixtureBase, random_boxes
from measures.orbits import centered_empirical, symmetrized_empirical
from symmetry.groups import (
    as_points,
    make_cyclic_group_2d,
    make_cyclic_group_3d,
    make_reflection_group,
)

from .limit import LimitOrbitSampler

logger = logging.getLogger(__name__)

FINITE = 'finite'
LIMIT = 'limit'
CENTERED = 'centered'


@dataclass(frozen=True, eq=False)
class DipPosterior:
    """
    A fitted posterior.

    ``group`` is a FiniteGroup for ``kind == 'finite'`` and None for the
    rotation limit and the mean-centred form. ``data`` is the fitted sample,
    kept so that a serialized posterior can be refitted exactly.
    """

    alpha: float
    alpha_star: float
    base: MixtureBase
    data: np.ndarray
    kind: str = FINITE
    group: object = None
    warnings: list = field(default_factory=list)

    @property
    def p_cont(self):
        return self.base.p_cont

    @property
    def m(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.base.dim

    @property
    def discrete(self):
        return self.base.discrete

    def group_description(self):
        if self.kind == FINITE:
            return self.group.describe()
        return {'kind': self.kind}

    def __repr__(self):
        return f'DipPosterior({self.group_description()}, alpha_star={self.alpha_star!r}, m={self.m})'


def check_alpha(alpha):
    if isinstance(alpha, bool) or not (math.isfinite(alpha) and alpha > 0):
        raise InputError(f'concentration must be positive and finite, got {alpha!r}', code='range')
    return float(alpha)


def posterior_base(alpha, base, empirical, m):
    """MixtureBase with p_cont = alpha/(alpha + m); the prior base alone when m == 0."""
    if m == 0:
        return MixtureBase(1.0, base)
    return MixtureBase(alpha / (alpha + m), base, empirical)


def _snapshot(points):
    points = np.array(points, dtype=float)
    points.flags.writeable = False
    return points


def _spot_elements(group, limit):
    others = [j for j in range(group.order) if j != group.identity_index()]
    if len(others) <= limit:
        return others
    return [others[i] for i in np.linspace(0, len(others) - 1, limit).round().astype(int)]


def check_base_invariance(base, group):
    """
    Monte Carlo spot check that ``base`` is invariant under ``group``.

    For random boxes B and a few non-identity elements g the paired
    difference 1{gX in B} - 1{X in B}, X ~ base, must have mean zero. Uses
    its own seeded generator, so callers' streams are never advanced.

    Returns:
        list of warning messages; empty when the check passes.
    """
    rng = np.random.default_rng(setting('DIP_INVARIANCE_CHECK_SEED', 7))
    n = setting('DIP_INVARIANCE_CHECK_SAMPLES', 20000)
    threshold = setting('DIP_INVARIANCE_Z_THRESHOLD', 3.0)
    boxes = random_boxes(base, setting('DIP_INVARIANCE_CHECK_BOXES', 64), rng)
    draws = base.sample(n, rng)
    inside = np.stack([box.contains(draws) for box in boxes]).astype(float)

    scores = []
    for j in _spot_elements(group, setting('DIP_INVARIANCE_MAX_ELEMENTS', 4)):
        images = draws @ group.matrices[j].T + group.offsets[j]
        for row, box in enumerate(boxes):
            diff = box.contains(images) - inside[row]
            spread = diff.std(ddof=1) if n > 1 else 0.0
            mean = diff.mean()
            if spread == 0.0:
                scores.append(0.0 if mean == 0.0 else math.inf)
            else:
                scores.append(mean / (spread / math.sqrt(n)))
    if not scores:
        return []

    failing = int(np.sum(np.abs(scores) > threshold))
    if failing > 0.05 * len(scores):
        message = (
            f'base measure {base.kind} does not look invariant under the {group.kind} group of order {group.order}: '
            f'{failing} of {len(scores)} box tests exceed |z| > {threshold}'
        )
        logger.warning(message)
        return [message]
    return []


def fit(alpha, base, data, group, check_invariance=True):
    """
    Posterior of a Dirichlet invariant process under a finite group.

    The discrete part of the base is the symmetrized empirical measure of
    the data (k*m atoms of weight 1/(k*m)). A base measure that fails the
    invariance spot check is still used; the failure is recorded in
    ``warnings``.

    Raises:
        InputError: non-positive alpha.
        DimensionMismatch: base, data and group disagree on dimension.
    """
    alpha = check_alpha(alpha)
    if base.dim != group.dim:
        raise DimensionMismatch(group.dim, base.dim)
    points = as_points(data, group.dim)
    m = points.shape[0]
    warnings = check_base_invariance(base, group) if check_invariance else []
    empirical = symmetrized_empirical(group, points) if m else None
    posterior = DipPosterior(
        alpha=alpha,
        alpha_star=alpha + m,
        base=posterior_base(alpha, base, empirical, m),
        data=_snapshot(points),
        kind=FINITE,
        group=group,
        warnings=warnings,
    )
    logger.info(f'fitted {posterior!r}, p_cont={posterior.p_cont!r}')
    return posterior


def fit_univariate_symmetric(alpha, base, data, mu, check_invariance=True):
    """Posterior for a law on the real line symmetric about ``mu``."""
    values = np.asarray(data, dtype=float).reshape(-1, 1)
    return fit(alpha, base, values, make_reflection_group(mu), check_invariance=check_invariance)


@lru_cache(maxsize=4)
def rotation_grid(k_sym):
    """The cyclic group of order ``k_sym`` standing in for all plane rotations."""
    return make_cyclic_group_2d(k_sym)


def fit_limit(alpha, base, data, check_invariance=True):
    """
    Posterior under the full rotation group of the plane.

    The discrete part becomes the circular orbit law of the data, whose box
    probabilities are exact arc fractions.
    """
    alpha = check_alpha(alpha)
    if base.dim != 2:
        raise DimensionMismatch(2, base.dim)
    points = as_points(data, 2)
    m = points.shape[0]
    warnings = check_base_invariance(base, rotation_grid(setting('DIP_LIMIT_K_SYM', 360))) if check_invariance else []
    posterior = DipPosterior(
        alpha=alpha,
        alpha_star=alpha + m,
        base=posterior_base(alpha, base, LimitOrbitSampler(points) if m else None, m),
        data=_snapshot(points),
        kind=LIMIT,
        warnings=warnings,
    )
    logger.info(f'fitted {posterior!r}, p_cont={posterior.p_cont!r}')
    return posterior


def fit_centered(alpha, base, data):
    """
    Posterior when the only assumption on the unknown law is a zero mean.

    The data enter through their centred values X_i - mean(X).
    """
    alpha = check_alpha(alpha)
    if base.dim != 1:
        raise DimensionMismatch(1, base.dim)
    points = as_points(data, 1)
    m = points.shape[0]
    posterior = DipPosterior(
        alpha=alpha,
        alpha_star=alpha + m,
        base=posterior_base(alpha, base, centered_empirical(points) if m else None, m),
        data=_snapshot(points),
        kind=CENTERED,
    )
    logger.info(f'fitted {posterior!r}, p_cont={posterior.p_cont!r}')
    return posterior


def build_group(description):
    """
    FiniteGroup from its JSON description.

    ``{"kind": "cyclic2d", "k": K}``, ``{"kind": "reflection", "mu": MU}`` or
    ``{"kind": "cyclic3d", "k": K, "axis": [ax, ay, az]}``.
    """
    try:
        kind = description['kind']
        if kind == 'cyclic2d':
            return make_cyclic_group_2d(description['k'])
        if kind == 'reflection':
            return make_reflection_group(description['mu'])
        if kind == 'cyclic3d':
            return make_cyclic_group_3d(description['k'], description['axis'])
    except (KeyError, TypeError) as e:
        raise InputError(f'malformed group description {description!r}: {e}', code='group')
    raise InputError(f'unknown group kind {kind!r}', code='group')


def fit_described(alpha, base, data, description, check_invariance=True):
    """Dispatch on a group description, including ``limit`` and ``centered``."""
    kind = description.get('kind')
    if kind == LIMIT:
        return fit_limit(alpha, base, data, check_invariance=check_invariance)
    if kind == CENTERED:
        return fit_centered(alpha, base, data)
    return fit(alpha, base, data, build_group(description), check_invariance=check_invariance)
