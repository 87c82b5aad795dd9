"""
Empirical checks of the posterior's distributional claims.

Box probabilities of sampled paths are compared with their Dirichlet
closed forms (moments), with the same probabilities under group elements
(invariance), and across growing group orders and sample sizes
(convergence sweeps).
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import ks_2samp

from dipsim.conf import setting
from dipsim.exceptions import InputError
from dipsim.rng import replica_rngs
from measures.measures import box_grid, eval_box, eval_box_with_error, pairwise_disjoint, random_boxes
from posterior.fitting import FINITE, LIMIT, fit, fit_limit, rotation_grid
from posterior.paths import as_sampler, draw_dp_path, symmetrize_path
from symmetry.groups import make_cyclic_group_2d, make_cyclic_group_3d, make_reflection_group

from .reports import ConvergenceReport, InvarianceCheck, MomentCheck, Moments

logger = logging.getLogger(__name__)


def _check_reps(reps):
    if isinstance(reps, bool) or int(reps) != reps or reps < 1:
        raise InputError(f'replica count must be a positive integer, got {reps!r}', code='range')
    return int(reps)


def _check_levels(levels, name):
    levels = [int(v) for v in levels]
    if not levels:
        raise InputError(f'{name} must not be empty', code='range')
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise InputError(f'{name} must be strictly increasing, got {levels}', code='range')
    return levels


def finite_dim_sample(posterior, boxes, reps, sampler=None, rng=None, symmetrize=True, distort=None, workers=None):
    """
    Box probabilities of ``reps`` independent sample paths.

    Replica ``i`` uses the i-th generator spawned from ``rng``, so the
    matrix does not depend on ``workers``.

    Args:
        symmetrize: orbit-symmetrize each DP draw (False gives the plain
            DP(alpha_star, base) draw)
        distort: optional factor applied by ``distort_weights`` to the mass
            inside ``boxes[0]`` of every path, for negative controls

    Returns:
        array of shape ``(reps, len(boxes))``; row r holds P_r(B_1), ..., P_r(B_n).
    """
    reps = _check_reps(reps)
    config = as_sampler(sampler)
    for box in boxes:
        if box.dim != posterior.dim:
            raise InputError(f'box of dimension {box.dim} for a posterior of dimension {posterior.dim}', code='dimension')

    def replica(child):
        path = draw_dp_path(posterior, config, child)
        if symmetrize:
            path = symmetrize_path(posterior, path)
        measure = path.measure
        if distort is not None:
            measure = distort_weights(measure, boxes[0], distort)
        return measure.box_probabilities(boxes)

    children = replica_rngs(rng, reps)
    workers = setting('DIP_REPLICA_WORKERS', 1) if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(replica, children))
    else:
        rows = [replica(child) for child in children]
    logger.debug(f'sampled {reps} paths over {len(boxes)} boxes with {config}')
    return np.vstack(rows) if rows else np.empty((0, len(boxes)))


def moment_oracle(alpha_star, base, boxes):
    """
    Closed-form moments of (P(B_1), ..., P(B_n)) under DP(alpha_star, base).

    E P(B_i) = H(B_i), Var P(B_i) = H(B_i)(1 - H(B_i))/(alpha_star + 1), and
    E P(B_i) P(B_j) = alpha_star/(alpha_star + 1) H(B_i) H(B_j) for i != j;
    the diagonal of ``product`` holds E P(B_i)^2.

    Raises:
        InputError: the boxes overlap.
    """
    if not pairwise_disjoint(boxes):
        raise InputError('moment identities need pairwise disjoint boxes', code='overlap')
    h = np.array([eval_box(base, box) for box in boxes])
    variance = h * (1.0 - h) / (alpha_star + 1.0)
    product = alpha_star / (alpha_star + 1.0) * np.outer(h, h)
    np.fill_diagonal(product, variance + h * h)
    return Moments(mean=h, variance=variance, product=product)


def _z(diff, sigma):
    with np.errstate(divide='ignore', invalid='ignore'):
        z = diff / sigma
    z = np.where(sigma > 0, z, np.where(diff == 0, 0.0, np.copysign(np.inf, diff)))
    return z


def moments_from_sample(sample, analytic, threshold, seed=None):
    """MomentCheck of a ``(reps, n)`` matrix of box probabilities against ``analytic``."""
    reps, n = sample.shape
    mean = sample.mean(axis=0)
    centred = sample - mean
    variance = (centred ** 2).mean(axis=0)
    fourth = (centred ** 4).mean(axis=0)
    products = np.einsum('ri,rj->rij', sample, sample)
    product = products.mean(axis=0)

    sigma_mean = np.sqrt(analytic.variance / reps)
    sigma_variance = np.sqrt(np.maximum(fourth - variance ** 2, 0.0) / reps)
    sigma_product = products.std(axis=0) / math.sqrt(reps)

    return MomentCheck(
        boxes=[],
        analytic=analytic,
        empirical=Moments(mean=mean, variance=variance, product=product),
        z_mean=_z(mean - analytic.mean, sigma_mean),
        z_variance=_z(variance - analytic.variance, sigma_variance),
        z_product=_z(product - analytic.product, sigma_product),
        mc_sigma_mean=sigma_mean,
        mc_sigma_variance=sigma_variance,
        mc_sigma_product=sigma_product,
        reps=reps,
        threshold=threshold,
        seed=seed,
    )


def check_moments(posterior, boxes, reps, rng, sampler=None, symmetrize=False, distort=None, seed=None):
    """
    Compare empirical moments of P(B_i) with ``moment_oracle``.

    The Dirichlet identities describe the DP(alpha_star, base) draw, so by
    default paths are not orbit-symmetrized; on group-invariant boxes the
    two coincide and ``symmetrize=True`` tests the symmetrized paths.
    Statistics with |z| above ``DIP_MOMENT_Z_THRESHOLD`` are flagged.
    """
    analytic = moment_oracle(posterior.alpha_star, posterior.base, boxes)
    sample = finite_dim_sample(posterior, boxes, reps, sampler, rng, symmetrize=symmetrize, distort=distort)
    check = moments_from_sample(sample, analytic, setting('DIP_MOMENT_Z_THRESHOLD', 4.0), seed=seed)
    check.boxes = list(boxes)
    if not check.passed:
        logger.warning(f'moment check failed: max |z| = {check.max_abs_z:.2f} over {reps} paths')
    return check


def distort_weights(measure, box, factor=1.1):
    """
    ``measure`` with the weights of atoms inside ``box`` multiplied by
    ``factor`` and all weights renormalized. A negative control: the result
    is no longer a draw from the intended law.
    """
    inside = box.contains(measure.points)
    if not inside.any() or inside.all():
        return measure
    weights = np.where(inside, measure.weights * factor, measure.weights)
    return measure.reweighted(weights / math.fsum(weights))


def invariance_gaps(measure, group, boxes, buffer=None):
    """
    Per-box max over group elements of |P(B) - P(g^-1 B)|.

    P(g^-1 B) is the mass of atoms whose image lies in B. Boxes with an atom
    or an image within ``buffer`` of a face are skipped and left as NaN.
    """
    buffer = setting('DIP_BOUNDARY_BUFFER', 1e-9) if buffer is None else buffer
    gaps = np.full(len(boxes), math.nan)
    images = group.apply_all(measure.points)
    for i, box in enumerate(boxes):
        if box.boundary_distance(measure.points).min() <= buffer or box.boundary_distance(images.reshape(-1, group.dim)).min() <= buffer:
            logger.info(f'skipping box {i}: an atom lies within {buffer} of its boundary')
            continue
        mass = math.fsum(measure.weights[box.contains(measure.points)])
        moved = [math.fsum(measure.weights[box.contains(images[j])]) for j in range(group.order)]
        gaps[i] = max(abs(mass - value) for value in moved)
    return gaps


def invariance_gap(measure, group, boxes, buffer=None):
    """Max of ``invariance_gaps`` over the boxes that were not skipped (0 if none remain)."""
    gaps = invariance_gaps(measure, group, boxes, buffer)
    if np.all(np.isnan(gaps)):
        return 0.0
    return float(np.nanmax(gaps))


def path_group(posterior, k_sym=None):
    """The finite group the sample paths of ``posterior`` are invariant under."""
    if posterior.kind == FINITE:
        return posterior.group
    if posterior.kind == LIMIT:
        return rotation_grid(k_sym or setting('DIP_LIMIT_K_SYM', 360))
    raise InputError(f'{posterior.kind} posteriors have no invariance group', code='group')


def _heaviest_box(measure, boxes):
    masses = measure.box_probabilities(boxes)
    return boxes[int(np.argmax(np.where(masses < 1.0, masses, -1.0)))]


def check_path_invariance(posterior, reps, rng, boxes=None, sampler=None, distort=None, k_sym=None, tolerance=None, seed=None):
    """
    Invariance gaps of ``reps`` symmetrized sample paths.

    Without ``boxes``, ``DIP_PATH_CHECK_BOXES`` random boxes are drawn from
    the posterior base. ``distort`` reweights the heaviest box of every path
    below full mass, which a passing check must detect.
    """
    reps = _check_reps(reps)
    group = path_group(posterior, k_sym)
    config = as_sampler(sampler)
    tolerance = setting('DIP_INVARIANCE_TOLERANCE', 1e-9) if tolerance is None else tolerance
    if not boxes:
        boxes = random_boxes(posterior.base, setting('DIP_PATH_CHECK_BOXES', 200), rng)

    gaps = []
    for child in replica_rngs(rng, reps):
        measure = symmetrize_path(posterior, draw_dp_path(posterior, config, child), k_sym).measure
        if distort is not None:
            measure = distort_weights(measure, _heaviest_box(measure, boxes), distort)
        gaps.append(invariance_gap(measure, group, boxes))

    check = InvarianceCheck(group=group.describe(), gaps=np.array(gaps), tolerance=tolerance, boxes=len(boxes), seed=seed)
    if not check.passed:
        logger.warning(f'invariance check failed: max gap {check.max_gap:.3e} over {reps} paths')
    return check


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    return float(ks_2samp(a, b).statistic)


def ks_noise(reps_a, reps_b):
    """Scale sqrt((n + m)/(n m)) of the KS statistic between two samples of one law."""
    return math.sqrt((reps_a + reps_b) / (reps_a * reps_b))


def _base_gap(left, right, box):
    a, b = eval_box_with_error(left, box), eval_box_with_error(right, box)
    return abs(a.value - b.value), math.hypot(a.stderr, b.stderr)


def sweep_k(alpha, base, data, k_levels, boxes, reps, rng, sampler=None, seed=None):
    """
    Finite rotation groups of growing order against the rotation limit.

    For each k, per box: the base gap |H*_k(B) - H*(B)| (exact when the base
    has a closed form) and the KS distance between P(B) samples of the k-group
    posterior and of the limit posterior.
    """
    k_levels = _check_levels(k_levels, 'k levels')
    reps = _check_reps(reps)
    limit = fit_limit(alpha, base, data)
    limit_sample = finite_dim_sample(limit, boxes, reps, sampler, rng)
    report = ConvergenceReport('k', k_levels, reps=reps, seed=seed, meta={'alpha': alpha, 'm': limit.m, 'boxes': [b.as_dict() for b in boxes]})
    for k in k_levels:
        posterior = fit(alpha, base, data, make_cyclic_group_2d(k), check_invariance=False)
        sample = finite_dim_sample(posterior, boxes, reps, sampler, rng)
        worst = 0.0
        for i, box in enumerate(boxes):
            gap, sigma = _base_gap(posterior.base, limit.base, box)
            worst = max(worst, gap)
            report.add(k, i, 'base_gap', gap, sigma)
            report.add(k, i, 'ks', ks_distance(sample[:, i], limit_sample[:, i]), ks_noise(reps, reps))
        logger.info(f'k={k}: max base gap {worst:.3e}')
    return report


def limit_self_distance(alpha, base, data, boxes, reps, rng, sampler=None):
    """KS distances between two independent P(B) samples of the limit posterior (noise floor)."""
    limit = fit_limit(alpha, base, data)
    first = finite_dim_sample(limit, boxes, reps, sampler, rng)
    second = finite_dim_sample(limit, boxes, reps, sampler, rng)
    return np.array([ks_distance(first[:, i], second[:, i]) for i in range(len(boxes))])


def default_group(measure, k=None):
    """The finite group a sweep over ``measure`` fits with."""
    k = k or setting('DIP_SWEEP_DEFAULT_K', 16)
    if measure.dim == 1:
        return make_reflection_group(getattr(measure, 'mu', 0.0))
    if measure.dim == 2:
        return make_cyclic_group_2d(k)
    return make_cyclic_group_3d(k, (0.0, 0.0, 1.0))


def default_grid(dim, half_width=2.0, cells=None):
    """Equal cells tiling [-half_width, half_width]^dim; 16, 8x8 or 4x4x4 by default."""
    cells = cells or {1: 16, 2: 8, 3: 4}[dim]
    return box_grid((-half_width,) * dim, (half_width,) * dim, cells)


def sweep_m(true_law, alpha, base, m_levels, rng, group=None, boxes=None, seed=None):
    """
    Posterior base against the true law for growing sample sizes.

    At each m, fresh data are drawn from ``true_law`` and fitted; the report
    holds sup_B |H*_m(B) - F(B)| over a fixed box grid, with box_id naming
    the box attaining it.
    """
    m_levels = _check_levels(m_levels, 'm levels')
    if m_levels[0] < 0:
        raise InputError('sample sizes must be non-negative', code='range')
    if base.dim != true_law.dim:
        raise InputError(f'base of dimension {base.dim} for a law of dimension {true_law.dim}', code='dimension')
    group = group or default_group(true_law)
    boxes = boxes or default_grid(true_law.dim)
    truth = [eval_box_with_error(true_law, box) for box in boxes]

    report = ConvergenceReport('m', m_levels, reps=1, seed=seed, meta={'alpha': alpha, 'group': group.describe()})
    for m in m_levels:
        data = true_law.sample(m, rng) if m else np.empty((0, true_law.dim))
        posterior = fit(alpha, base, data, group, check_invariance=False)
        gaps = []
        for box, target in zip(boxes, truth):
            fitted = eval_box_with_error(posterior.base, box)
            gaps.append((abs(fitted.value - target.value), math.hypot(fitted.stderr, target.stderr)))
        worst = int(np.argmax([g for g, _ in gaps]))
        report.add(m, worst, 'sup_gap', *gaps[worst])
        logger.info(f'm={m}: sup gap {gaps[worst][0]:.4f} on box {worst}')
    return report
