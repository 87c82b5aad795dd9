"""
Orbit law of the continuous rotation group acting on planar data.

As the order of the cyclic group grows, the symmetrized empirical measure of
the data converges to the average over data points of the uniform law on the
circle through each point. That law has a closed-form box probability: the
fraction of the circle's arc lying inside the box.
"""
import math

import numpy as np

from dipsim.exceptions import DimensionMismatch
from symmetry.groups import TWO_PI, as_points


def _critical_angles(r, box):
    """Angles in [0, 2*pi) where the circle of radius ``r`` meets a face of ``box``."""
    angles = []
    for c in box.low[:1] + box.high[:1]:
        if math.isfinite(c) and abs(c) <= r:
            phi = math.acos(c / r)
            angles += [phi, TWO_PI - phi]
    for c in box.low[1:] + box.high[1:]:
        if math.isfinite(c) and abs(c) <= r:
            phi = math.asin(c / r)
            angles += [phi % TWO_PI, math.pi - phi]
    return angles


def arc_fraction(r, box):
    """
    Fraction of the circle of radius ``r`` about the origin inside ``box``.

    The circle is cut at every angle where it crosses a face of the box; each
    piece lies wholly inside or outside, decided at its midpoint.
    """
    if r == 0.0:
        return float(box.contains([[0.0, 0.0]])[0])
    cuts = np.unique(np.concatenate([[0.0, TWO_PI], np.clip(_critical_angles(r, box), 0.0, TWO_PI)]))
    middles = 0.5 * (cuts[:-1] + cuts[1:])
    inside = box.contains(np.column_stack([r * np.cos(middles), r * np.sin(middles)]))
    return min(math.fsum(np.diff(cuts)[inside]) / TWO_PI, 1.0)


class LimitOrbitSampler:
    """
    Average of the uniform laws on the circles through the data points.

    A draw picks a data point uniformly, then an angle uniformly in
    [0, 2*pi), and returns the point rotated by that angle. Every emitted
    point has the norm of the datum it came from.
    """

    dim = 2

    def __init__(self, data):
        points = as_points(data, 2)
        if points.shape[1] != 2:
            raise DimensionMismatch(2, points.shape[1])
        points.flags.writeable = False
        self._points = points
        self._radii = np.hypot(points[:, 0], points[:, 1])

    @property
    def points(self):
        return self._points

    @property
    def radii(self):
        return self._radii

    @property
    def size(self):
        return self._points.shape[0]

    def __repr__(self):
        return f'LimitOrbitSampler(data={self.size})'

    def box_probability(self, box):
        if box.dim != 2:
            raise DimensionMismatch(2, box.dim)
        if box.is_full_space:
            return 1.0
        # data on a shared circle contribute the same arc
        radii, counts = np.unique(self._radii, return_counts=True)
        total = math.fsum(count * arc_fraction(float(r), box) for r, count in zip(radii, counts))
        return min(total / self.size, 1.0)

    def sample(self, n, rng):
        """Draw order: ``n`` data indices, then ``n`` angles."""
        index = rng.integers(self.size, size=n)
        theta = TWO_PI * rng.random(n)
        cos, sin = np.cos(theta), np.sin(theta)
        x, y = self._points[index, 0], self._points[index, 1]
        return np.column_stack([cos * x - sin * y, sin * x + cos * y])

    def as_dict(self):
        return {'kind': 'limit-orbit', 'data': self._points.tolist()}
