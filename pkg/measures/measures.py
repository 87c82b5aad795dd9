"""
Probability measures on R^p queried through half-open boxes.

Three families share one small interface (``dim``, ``box_probability``,
``sample``): discrete measures with explicit atoms, continuous base measures,
and convex mixtures of the two, which is how posterior base measures are held.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.special import ndtr

from dipsim.conf import setting
from dipsim.exceptions import DimensionMismatch, InputError, UnsupportedAnalyticForm
from symmetry.groups import as_points

logger = logging.getLogger(__name__)

EPS_WEIGHT = 1e-9
MERGE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Box:
    """
    Product of half-open intervals (low, high], one per coordinate.

    Infinite bounds are allowed, so ``Box.full_space(p)`` covers R^p.
    """

    low: tuple
    high: tuple

    def __post_init__(self):
        low = tuple(float(v) for v in np.atleast_1d(self.low))
        high = tuple(float(v) for v in np.atleast_1d(self.high))
        if len(low) != len(high) or not low:
            raise InputError(f'box bounds must have one matching entry per coordinate, got {low} and {high}', code='dimension')
        if any(math.isnan(v) for v in low + high):
            raise InputError('box bounds must not be NaN', code='range')
        if not all(lo < hi for lo, hi in zip(low, high)):
            raise InputError(f'box needs low < high in every coordinate, got {low} and {high}', code='range')
        object.__setattr__(self, 'low', low)
        object.__setattr__(self, 'high', high)

    @classmethod
    def full_space(cls, dim):
        return cls((-math.inf,) * dim, (math.inf,) * dim)

    @property
    def dim(self):
        return len(self.low)

    @property
    def is_full_space(self):
        return all(v == -math.inf for v in self.low) and all(v == math.inf for v in self.high)

    def contains(self, points):
        """Boolean mask over the rows of ``points``."""
        pts = as_points(points, self.dim)
        return np.all((pts > np.asarray(self.low)) & (pts <= np.asarray(self.high)), axis=1)

    def boundary_distance(self, points):
        """Distance of each point to the nearest finite face of the box (max-norm per coordinate)."""
        pts = as_points(points, self.dim)
        bounds = np.concatenate([np.asarray(self.low), np.asarray(self.high)])
        finite = np.isfinite(bounds)
        if not finite.any():
            return np.full(len(pts), math.inf)
        doubled = np.concatenate([pts, pts], axis=1)
        gaps = np.abs(doubled[:, finite] - bounds[finite])
        return gaps.min(axis=1)

    def overlaps(self, other):
        if other.dim != self.dim:
            raise DimensionMismatch(self.dim, other.dim)
        return all(lo1 < hi2 and lo2 < hi1 for lo1, hi1, lo2, hi2 in zip(self.low, self.high, other.low, other.high))

    def as_dict(self):
        return {'low': list(self.low), 'high': list(self.high)}


def pairwise_disjoint(boxes):
    return not any(a.overlaps(b) for i, a in enumerate(boxes) for b in boxes[i + 1:])


def box_grid(low, high, cells):
    """
    Partition of the cube [low, high]^p into cells^p equal boxes.

    ``low`` and ``high`` are per-coordinate sequences.
    """
    low, high = np.atleast_1d(np.asarray(low, dtype=float)), np.atleast_1d(np.asarray(high, dtype=float))
    edges = [np.linspace(lo, hi, cells + 1) for lo, hi in zip(low, high)]
    boxes = []
    for index in np.ndindex(*(cells,) * len(edges)):
        boxes.append(Box(
            tuple(e[i] for e, i in zip(edges, index)),
            tuple(e[i + 1] for e, i in zip(edges, index)),
        ))
    return boxes


def random_boxes(measure, n, rng):
    """
    ``n`` boxes whose corners are pairs of draws from ``measure``.

    Keeps the boxes on the scale where the measure puts its mass.
    """
    corners = measure.sample(2 * n, rng).reshape(n, 2, measure.dim)
    low, high = corners.min(axis=1), corners.max(axis=1)
    high = np.where(high > low, high, low + 1e-6)
    return [Box(lo, hi) for lo, hi in zip(low, high)]


class BoxEstimate(NamedTuple):
    value: float
    stderr: float


class DiscreteMeasure:
    """
    Finitely many weighted atoms in R^p.

    Weights are non-negative and sum to one within 1e-9. Arrays are stored
    read-only; duplicate points are kept unless ``merged()`` is called.
    """

    def __init__(self, points, weights):
        points = as_points(points)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if points.shape[0] == 0:
            raise InputError('a discrete measure needs at least one atom', code='empty')
        if weights.shape[0] != points.shape[0]:
            raise InputError(f'{points.shape[0]} points but {weights.shape[0]} weights', code='format')
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InputError('weights must be finite and non-negative', code='range')
        total = math.fsum(weights)
        if abs(total - 1.0) > EPS_WEIGHT:
            raise InputError(f'weights must sum to 1, got {total!r}', code='range')
        points.flags.writeable = False
        weights.flags.writeable = False
        self._points = points
        self._weights = weights

    @classmethod
    def uniform(cls, points):
        points = as_points(points)
        return cls(points, np.full(len(points), 1.0 / max(len(points), 1)))

    @property
    def points(self):
        return self._points

    @property
    def weights(self):
        return self._weights

    @property
    def dim(self):
        return self._points.shape[1]

    @property
    def size(self):
        return self._points.shape[0]

    def __len__(self):
        return self.size

    def __repr__(self):
        return f'DiscreteMeasure(dim={self.dim}, atoms={self.size})'

    def box_probability(self, box):
        if box.dim != self.dim:
            raise DimensionMismatch(self.dim, box.dim)
        inside = box.contains(self._points)
        if inside.all():
            return 1.0
        if not inside.any():
            return 0.0
        return min(math.fsum(self._weights[inside]), 1.0)

    def box_probabilities(self, boxes):
        return np.array([self.box_probability(box) for box in boxes])

    def sample(self, n, rng):
        """``n`` i.i.d. atoms; one ``rng.choice`` call."""
        index = rng.choice(self.size, size=n, p=self._weights / self._weights.sum())
        return self._points[index]

    def mean(self):
        return np.array([math.fsum(self._weights * self._points[:, c]) for c in range(self.dim)])

    def merged(self, tol=MERGE_TOLERANCE):
        """
        Same measure with atoms closer than ``tol`` (max-norm) merged.

        Output atoms are sorted lexicographically by coordinates.
        """
        pairs = cKDTree(self._points).query_pairs(r=tol, p=np.inf, output_type='ndarray')
        n = self.size
        graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        count, labels = connected_components(graph, directed=False)
        points = np.empty((count, self.dim))
        weights = np.zeros(count)
        for label in range(count):
            members = np.flatnonzero(labels == label)
            points[label] = self._points[members[0]]
            weights[label] = math.fsum(self._weights[members])
        order = np.lexsort(points.T[::-1])
        return DiscreteMeasure(points[order], weights[order])

    def reweighted(self, weights):
        return DiscreteMeasure(self._points, weights)

    def as_dict(self):
        return {
            'dim': self.dim,
            'atoms': [{'point': p.tolist(), 'weight': float(w)} for p, w in zip(self._points, self._weights)],
        }


class BaseMeasure:
    """
    Continuous probability measure used as a prior guess H.

    Subclasses provide ``kind``, ``dim``, ``sample`` and, when a closed form
    exists, ``box_probability``. ``invariance`` names the symmetry the
    measure has exactly: 'rotation', 'reflection' or None.
    """

    kind = None
    dim = None
    invariance = None

    def box_probability(self, box):
        raise UnsupportedAnalyticForm(f'{self.kind} has no closed-form box probability')

    def sample(self, n, rng):
        raise NotImplementedError

    def params(self):
        return {}

    def as_dict(self):
        return {'kind': self.kind, **self.params()}


def _interval_gaussian(low, high, mu, sigma):
    return max(float(ndtr((high - mu) / sigma) - ndtr((low - mu) / sigma)), 0.0)


def _check_scale(value, name):
    if not (math.isfinite(value) and value > 0):
        raise InputError(f'{name} must be a positive finite number, got {value!r}', code='range')


@dataclass(frozen=True)
class IsotropicGaussian2D(BaseMeasure):
    sigma: float = 1.0
    kind = 'gauss2d-isotropic'
    dim = 2
    invariance = 'rotation'

    def __post_init__(self):
        _check_scale(self.sigma, 'sigma')

    def box_probability(self, box):
        return math.prod(_interval_gaussian(lo, hi, 0.0, self.sigma) for lo, hi in zip(box.low, box.high))

    def sample(self, n, rng):
        return rng.normal(scale=self.sigma, size=(n, 2))

    def params(self):
        return {'sigma': self.sigma}


@dataclass(frozen=True)
class IsotropicGaussian3D(BaseMeasure):
    sigma: float = 1.0
    kind = 'gauss3d-isotropic'
    dim = 3
    invariance = 'rotation'

    def __post_init__(self):
        _check_scale(self.sigma, 'sigma')

    def box_probability(self, box):
        return math.prod(_interval_gaussian(lo, hi, 0.0, self.sigma) for lo, hi in zip(box.low, box.high))

    def sample(self, n, rng):
        return rng.normal(scale=self.sigma, size=(n, 3))

    def params(self):
        return {'sigma': self.sigma}


@dataclass(frozen=True)
class SymmetricGaussian1D(BaseMeasure):
    mu: float = 0.0
    sigma: float = 1.0
    kind = 'gauss1d-symmetric'
    dim = 1
    invariance = 'reflection'

    def __post_init__(self):
        _check_scale(self.sigma, 'sigma')
        if not math.isfinite(self.mu):
            raise InputError(f'mu must be finite, got {self.mu!r}', code='range')

    def box_probability(self, box):
        return _interval_gaussian(box.low[0], box.high[0], self.mu, self.sigma)

    def sample(self, n, rng):
        return rng.normal(loc=self.mu, scale=self.sigma, size=(n, 1))

    def params(self):
        return {'mu': self.mu, 'sigma': self.sigma}


@dataclass(frozen=True)
class UniformUnitSquare(BaseMeasure):
    """Lebesgue measure on (0, 1]^2; invariant only under quarter turns about (1/2, 1/2)."""

    kind = 'uniform-unit-square'
    dim = 2

    def box_probability(self, box):
        return math.prod(max(min(hi, 1.0) - max(lo, 0.0), 0.0) for lo, hi in zip(box.low, box.high))

    def sample(self, n, rng):
        return rng.random((n, 2))


def _disk_lower_left_area(x, y, r):
    """Area of {(u, v) : u <= x, v <= y, u^2 + v^2 <= r^2}."""
    if x <= -r or y <= -r:
        return 0.0
    upper = min(x, r)

    def primitive(u):
        # antiderivative of sqrt(r^2 - u^2)
        u = min(max(u, -r), r)
        return 0.5 * (u * math.sqrt(max(r * r - u * u, 0.0)) + r * r * math.asin(u / r))

    def half_chord(a, b):
        return primitive(b) - primitive(a)

    if y >= r:
        return 2.0 * half_chord(-r, upper)

    c = math.sqrt(r * r - y * y)
    area = 0.0
    # |u| >= c: the chord lies entirely below y (y > 0) or entirely above it (y < 0)
    if y > 0:
        b = min(upper, -c)
        if b > -r:
            area += 2.0 * half_chord(-r, b)
        if upper > c:
            area += 2.0 * half_chord(c, upper)
    b = min(upper, c)
    if b > -c:
        area += y * (b + c) + half_chord(-c, b)
    return area


@dataclass(frozen=True)
class UniformDisk(BaseMeasure):
    radius: float = 1.0
    kind = 'uniform-disk'
    dim = 2
    invariance = 'rotation'

    def __post_init__(self):
        _check_scale(self.radius, 'radius')

    def box_probability(self, box):
        (x1, y1), (x2, y2) = box.low, box.high
        r = self.radius
        area = (
            _disk_lower_left_area(x2, y2, r)
            - _disk_lower_left_area(x1, y2, r)
            - _disk_lower_left_area(x2, y1, r)
            + _disk_lower_left_area(x1, y1, r)
        )
        return min(max(area / (math.pi * r * r), 0.0), 1.0)

    def sample(self, n, rng):
        u = rng.random((n, 2))
        radius = self.radius * np.sqrt(u[:, 0])
        angle = 2.0 * math.pi * u[:, 1]
        return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])

    def params(self):
        return {'radius': self.radius}


@dataclass(frozen=True)
class UniformBall3D(BaseMeasure):
    """Uniform law on the ball of the given radius; box masses come from Monte Carlo."""

    radius: float = 1.0
    kind = 'uniform-ball3d'
    dim = 3
    invariance = 'rotation'

    def __post_init__(self):
        _check_scale(self.radius, 'radius')

    def sample(self, n, rng):
        direction = rng.normal(size=(n, 3))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return direction * (self.radius * np.cbrt(rng.random(n)))[:, None]

    def params(self):
        return {'radius': self.radius}


BASE_KINDS = {
    cls.kind: cls
    for cls in (IsotropicGaussian2D, IsotropicGaussian3D, SymmetricGaussian1D, UniformUnitSquare, UniformDisk, UniformBall3D)
}


def make_base(kind, **params):
    try:
        cls = BASE_KINDS[kind]
    except KeyError:
        raise InputError(f'unknown base measure kind {kind!r}; choose from {sorted(BASE_KINDS)}', code='format')
    return cls(**params)


@dataclass(frozen=True, eq=False)
class MixtureBase:
    """
    ``p_cont * continuous + (1 - p_cont) * discrete``.

    ``discrete`` is any measure with the shared interface (a DiscreteMeasure,
    or the angular orbit law of the rotation limit); it may be None only when
    p_cont is 1.
    """

    p_cont: float
    continuous: BaseMeasure
    discrete: object = field(default=None)

    def __post_init__(self):
        p = float(self.p_cont)
        if not 0.0 <= p <= 1.0:
            raise InputError(f'p_cont must lie in [0, 1], got {p!r}', code='range')
        if self.discrete is None and p != 1.0:
            raise InputError('a mixture with p_cont < 1 needs a discrete part', code='empty')
        if self.discrete is not None and self.discrete.dim != self.continuous.dim:
            raise DimensionMismatch(self.continuous.dim, self.discrete.dim)
        object.__setattr__(self, 'p_cont', p)

    @property
    def dim(self):
        return self.continuous.dim

    def box_probability(self, box):
        return self.box_probability_with_error(box).value

    def box_probability_with_error(self, box):
        """The continuous part's standard error, scaled by ``p_cont``."""
        if box.dim != self.dim:
            raise DimensionMismatch(self.dim, box.dim)
        if box.is_full_space:
            return BoxEstimate(1.0, 0.0)
        value, stderr = 0.0, 0.0
        if self.p_cont > 0.0:
            cont = eval_box_with_error(self.continuous, box)
            value += self.p_cont * cont.value
            stderr = self.p_cont * cont.stderr
        if self.p_cont < 1.0:
            value += (1.0 - self.p_cont) * self.discrete.box_probability(box)
        return BoxEstimate(min(value, 1.0), stderr)

    def sample(self, n, rng):
        """
        Draw order: ``n`` uniforms choosing the component, then the
        continuous draws, then the discrete draws.
        """
        choose = rng.random(n) < self.p_cont
        out = np.empty((n, self.dim))
        n_cont = int(choose.sum())
        if n_cont:
            out[choose] = self.continuous.sample(n_cont, rng)
        if n - n_cont:
            out[~choose] = self.discrete.sample(n - n_cont, rng)
        return out


@lru_cache(maxsize=4)
def _fallback_draws(measure, n, seed):
    return measure.sample(n, np.random.default_rng(seed))


def estimate_box(measure, box, n, seed):
    """Monte Carlo estimate of a box probability with its standard error."""
    q = float(box.contains(_fallback_draws(measure, n, seed)).mean())
    return BoxEstimate(q, math.sqrt(q * (1.0 - q) / n))


def eval_box_with_error(measure, box):
    """
    Box probability and its standard error (zero when exact).

    Base measures without a closed form are estimated from a fixed, seeded
    set of ``DIP_MC_FALLBACK_SAMPLES`` draws.
    """
    if box.dim != measure.dim:
        raise DimensionMismatch(measure.dim, box.dim)
    if isinstance(measure, MixtureBase):
        return measure.box_probability_with_error(box)
    try:
        return BoxEstimate(measure.box_probability(box), 0.0)
    except UnsupportedAnalyticForm:
        n = setting('DIP_MC_FALLBACK_SAMPLES', 10**6)
        estimate = estimate_box(measure, box, n, setting('DIP_MC_FALLBACK_SEED', 20240611))
        logger.warning(
            f'{measure.kind}: no closed form, box probability {estimate.value:.6f} '
            f'estimated from {n} draws (s.e. {estimate.stderr:.2e})'
        )
        return estimate


def eval_box(measure, box):
    """Probability mass of ``box`` under a discrete, base or mixture measure."""
    return eval_box_with_error(measure, box).value


def sample(measure, n, rng):
    """``n >= 1`` i.i.d. draws from ``measure`` as an ``(n, dim)`` array."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InputError(f'sample size must be a positive integer, got {n!r}', code='range')
    return measure.sample(int(n), rng)
