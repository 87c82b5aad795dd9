"""
Finite transformation groups acting on points of R^p, p in {1, 2, 3}.

Every element is exposed in affine form ``x -> A x + b`` so that a group can
apply, compose and verify all of its elements with stacked arrays.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from dipsim.conf import setting
from dipsim.exceptions import DimensionMismatch, InputError

logger = logging.getLogger(__name__)

EPS_MAT = 1e-12
TWO_PI = 2.0 * math.pi
AXIS_NORM_TOLERANCE = 1e-9

_QUARTER_TURNS = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0), 3: (0.0, -1.0)}


def cos_sin(theta):
    """
    Cosine and sine of ``theta``, exact at multiples of pi/2.
    """
    quarters = theta / (math.pi / 2.0)
    nearest = round(quarters)
    if abs(quarters - nearest) <= 1e-14 * max(1.0, abs(quarters)):
        return _QUARTER_TURNS[nearest % 4]
    return math.cos(theta), math.sin(theta)


def canonical_angle(theta):
    """Map an angle in radians to [0, 2*pi); 2*pi itself maps to 0."""
    if not math.isfinite(theta):
        raise InputError(f'angle must be finite, got {theta!r}', code='range')
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta >= TWO_PI or TWO_PI - theta < 1e-15:
        theta = 0.0
    return theta


def as_point(x, dim):
    """
    Coerce ``x`` to a finite float vector of length ``dim``.

    Raises:
        DimensionMismatch: when the length differs from ``dim``.
        InputError: on NaN or infinite coordinates.
    """
    point = np.asarray(x, dtype=float).reshape(-1)
    if point.size != dim:
        raise DimensionMismatch(dim, point.size)
    if not np.all(np.isfinite(point)):
        raise InputError(f'point coordinates must be finite, got {point.tolist()}', code='range')
    return point


def as_points(xs, dim=None):
    """
    Coerce a collection of points to an ``(n, dim)`` float array.

    Scalars in a flat list are read as 1-D points.
    """
    arr = np.asarray(xs, dtype=float)
    if arr.size == 0:
        return np.empty((0, dim or 1))
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InputError(f'expected a list of points, got array of shape {arr.shape}', code='format')
    if dim is not None and arr.shape[0] and arr.shape[1] != dim:
        raise DimensionMismatch(dim, arr.shape[1])
    if not np.all(np.isfinite(arr)):
        raise InputError('point coordinates must be finite', code='range')
    return arr


class GroupElement:
    """Common behaviour of the transformation types."""

    dim = None

    def affine(self):
        """Return ``(A, b)`` with ``g(x) = A @ x + b``."""
        raise NotImplementedError

    def apply(self, x):
        matrix, offset = self.affine()
        return matrix @ as_point(x, self.dim) + offset

    def compose(self, other):
        """The element ``self o other`` (``other`` acts first)."""
        raise NotImplementedError

    def inverse(self):
        raise NotImplementedError

    def is_close(self, other, tol=EPS_MAT):
        if self.dim != other.dim:
            return False
        a1, b1 = self.affine()
        a2, b2 = other.affine()
        return bool(np.max(np.abs(a1 - a2)) <= tol and np.max(np.abs(b1 - b2)) <= tol * (1.0 + np.max(np.abs(b1))))


@dataclass(frozen=True)
class Rotation2(GroupElement):
    """Counterclockwise rotation of the plane by ``theta`` radians."""

    theta: float
    dim = 2

    def __post_init__(self):
        object.__setattr__(self, 'theta', canonical_angle(float(self.theta)))

    @property
    def matrix(self):
        c, s = cos_sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def affine(self):
        return self.matrix, np.zeros(2)

    def compose(self, other):
        if not isinstance(other, Rotation2):
            raise InputError('can only compose Rotation2 with Rotation2', code='group')
        return Rotation2(self.theta + other.theta)

    def inverse(self):
        return Rotation2(-self.theta)


@dataclass(frozen=True)
class Reflection1(GroupElement):
    """Identity or the reflection ``x -> 2*center - x`` of the real line."""

    center: float
    reflect: bool = True
    dim = 1

    def __post_init__(self):
        if not math.isfinite(self.center):
            raise InputError(f'center of symmetry must be finite, got {self.center!r}', code='range')
        object.__setattr__(self, 'center', float(self.center))

    def affine(self):
        if self.reflect:
            return np.array([[-1.0]]), np.array([2.0 * self.center])
        return np.array([[1.0]]), np.zeros(1)

    def apply(self, x):
        value = as_point(x, 1)
        return 2.0 * self.center - value if self.reflect else value.copy()

    def compose(self, other):
        if not isinstance(other, Reflection1) or other.center != self.center:
            raise InputError('reflections compose only about a common center', code='group')
        return Reflection1(self.center, self.reflect != other.reflect)

    def inverse(self):
        return self


@dataclass(frozen=True, eq=False)
class Rotation3(GroupElement):
    """
    Rotation of R^3 stored as its orthogonal 3x3 matrix.

    ``euler`` recovers (theta_x, theta_y, theta_z) such that
    ``matrix = A_x(theta_x) @ A_y(theta_y) @ A_z(theta_z)``.
    """

    matrix: np.ndarray = field(repr=False)
    dim = 3

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.shape != (3, 3):
            raise InputError(f'rotation matrix must be 3x3, got {matrix.shape}', code='dimension')
        matrix.flags.writeable = False
        object.__setattr__(self, 'matrix', matrix)

    def affine(self):
        return self.matrix, np.zeros(3)

    def compose(self, other):
        if not isinstance(other, Rotation3):
            raise InputError('can only compose Rotation3 with Rotation3', code='group')
        return Rotation3(self.matrix @ other.matrix)

    def inverse(self):
        return Rotation3(self.matrix.T)

    @property
    def euler(self):
        m = self.matrix
        sin_y = float(np.clip(m[0, 2], -1.0, 1.0))
        cos_y = math.hypot(m[0, 0], m[0, 1])
        if cos_y > 1e-12:
            theta_x = math.atan2(-m[1, 2], m[2, 2])
            theta_y = math.atan2(sin_y, cos_y)
            theta_z = math.atan2(-m[0, 1], m[0, 0])
        else:
            # gimbal lock: only theta_x + theta_z (or its difference) is defined
            theta_x = 0.0
            theta_y = math.copysign(math.pi / 2.0, sin_y)
            theta_z = math.atan2(m[1, 0], m[1, 1])
        return tuple(canonical_angle(t) for t in (theta_x, theta_y, theta_z))

    def __repr__(self):
        return f'Rotation3(euler={self.euler})'


def basic_rotation(axis, theta):
    """
    One of the three elementary rotations about the x, y or z axis.

    Args:
        axis: 'x', 'y' or 'z'
        theta: counterclockwise angle in radians
    """
    c, s = cos_sin(canonical_angle(theta))
    if axis == 'x':
        matrix = [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
    elif axis == 'y':
        matrix = [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
    elif axis == 'z':
        matrix = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    else:
        raise InputError(f"axis must be 'x', 'y' or 'z', got {axis!r}", code='range')
    return Rotation3(matrix)


def euler_rotation(theta_x, theta_y, theta_z):
    """
    The rotation ``A_x(theta_x) A_y(theta_y) A_z(theta_z)`` in closed form.
    """
    cx, sx = cos_sin(canonical_angle(theta_x))
    cy, sy = cos_sin(canonical_angle(theta_y))
    cz, sz = cos_sin(canonical_angle(theta_z))
    return Rotation3([
        [cy * cz, -cy * sz, sy],
        [cx * sz + sx * sy * cz, cx * cz - sx * sy * sz, -sx * cy],
        [sx * sz - cx * sy * cz, sx * cz + cx * sy * sz, cx * cy],
    ])


def apply(g, x):
    """Apply the group element ``g`` to the point ``x``."""
    return g.apply(x)


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """
    Ordered, homogeneous list of group elements.

    ``kind`` is one of 'cyclic2d', 'reflection', 'cyclic3d'; ``params``
    holds what is needed to rebuild the group (k, mu, axis).
    """

    elements: tuple
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise InputError('a group needs at least one element', code='group')
        kinds = {type(g) for g in elements}
        if len(kinds) != 1:
            raise InputError(f'group elements must share one type, got {sorted(k.__name__ for k in kinds)}', code='group')
        object.__setattr__(self, 'elements', elements)

    @property
    def order(self):
        return len(self.elements)

    k = order

    @property
    def dim(self):
        return self.elements[0].dim

    @cached_property
    def matrices(self):
        stacked = np.stack([g.affine()[0] for g in self.elements])
        stacked.flags.writeable = False
        return stacked

    @cached_property
    def offsets(self):
        stacked = np.stack([g.affine()[1] for g in self.elements])
        stacked.flags.writeable = False
        return stacked

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return self.order

    def __getitem__(self, index):
        return self.elements[index]

    def apply_all(self, points):
        """
        Images of every point under every element.

        Returns:
            array of shape ``(k, n, dim)``; ``[j, i]`` is ``g_j(x_i)``.
        """
        pts = as_points(points, self.dim)
        return np.einsum('kij,nj->kni', self.matrices, pts) + self.offsets[:, None, :]

    def orbit(self, x):
        """``[g_1(x), ..., g_k(x)]`` in element order, duplicates kept."""
        return self.apply_all(as_point(x, self.dim)[None, :])[:, 0, :]

    def identity_index(self):
        eye = np.eye(self.dim)
        for j in range(self.order):
            if np.max(np.abs(self.matrices[j] - eye)) <= EPS_MAT and np.max(np.abs(self.offsets[j])) <= EPS_MAT:
                return j
        return None

    def inverse_index(self, j):
        """Index of the inverse of element ``j``."""
        target = self.elements[j].inverse()
        for i, g in enumerate(self.elements):
            if g.is_close(target):
                return i
        raise InputError(f'element {j} has no listed inverse', code='group')

    def verify(self, tol=EPS_MAT):
        """
        Check identity membership, closure and inverses exhaustively.

        Composite affine maps are matched to listed elements with a k-d tree
        under the max-norm.

        Raises:
            InputError: with code 'group' naming the violated axiom.
        """
        k, p = self.order, self.dim
        identity = self.identity_index()
        if identity is None:
            raise InputError(f'{self.kind} group does not contain the identity', code='group')

        a, b = self.matrices, self.offsets
        scale = 1.0 + float(np.max(np.abs(b)))
        keys = np.concatenate([a.reshape(k, p * p), b / scale], axis=1)
        composite_a = np.einsum('iab,jbc->ijac', a, a).reshape(k * k, p * p)
        composite_b = (np.einsum('iab,jb->ija', a, b) + b[:, None, :]).reshape(k * k, p)
        queries = np.concatenate([composite_a, composite_b / scale], axis=1)

        distance, match = cKDTree(keys).query(queries, p=np.inf, distance_upper_bound=tol * 10)
        if not np.all(distance <= tol):
            worst = int(np.argmax(distance))
            raise InputError(
                f'{self.kind} group is not closed: composite of elements {worst // k} and {worst % k} is not listed',
                code='group',
            )
        table = match.reshape(k, k)
        has_inverse = np.any(table == identity, axis=1)
        if not np.all(has_inverse):
            raise InputError(f'element {int(np.argmin(has_inverse))} has no listed inverse', code='group')
        return table

    def describe(self):
        """JSON-ready description used by the posterior serializer."""
        description = {'kind': self.kind, 'k': self.order}
        description.update(self.params)
        return description


def _checked(group):
    limit = setting('DIP_GROUP_VERIFY_MAX_ORDER', 512)
    if group.order <= limit:
        group.verify()
    else:
        logger.debug(f'Skipping exhaustive axiom check for {group.kind} group of order {group.order} (> {limit})')
    return group


def _check_order(k):
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise InputError(f'group order must be a positive integer, got {k!r}', code='range')
    return int(k)


def make_cyclic_group_2d(k):
    """
    The k rotations of the plane by 2*pi*j/k, j = 0, ..., k-1.
    """
    k = _check_order(k)
    return _checked(FiniteGroup(
        tuple(Rotation2(TWO_PI * j / k) for j in range(k)),
        kind='cyclic2d',
    ))


def make_reflection_group(mu):
    """The group {x, 2*mu - x} of the real line."""
    mu = float(mu)
    return _checked(FiniteGroup(
        (Reflection1(mu, reflect=False), Reflection1(mu, reflect=True)),
        kind='reflection',
        params={'mu': mu},
    ))


def _axis_frame(axis):
    """
    Rotation R = A_x(tx) A_y(ty) with R e_z = axis (axis not along +-x).
    """
    ax, ay, az = axis
    theta_y = math.atan2(ax, math.hypot(ay, az))
    theta_x = math.atan2(-ay, az)
    return basic_rotation('x', theta_x).compose(basic_rotation('y', theta_y))


def make_cyclic_group_3d(k, axis):
    """
    The k rotations by 2*pi*j/k about ``axis``.

    Coordinate axes use the elementary rotations directly; any other axis
    conjugates the z-axis rotations, R A_z R^T, with R taking e_z to ``axis``.

    Args:
        k: group order, k >= 1
        axis: unit 3-vector (norm 1 within 1e-9)
    """
    k = _check_order(k)
    axis = as_point(axis, 3)
    norm = float(np.linalg.norm(axis))
    if norm == 0.0:
        raise InputError('rotation axis must be non-zero', code='range')
    if abs(norm - 1.0) > AXIS_NORM_TOLERANCE:
        raise InputError(f'rotation axis must be a unit vector, got norm {norm!r}', code='range')

    angles = [TWO_PI * j / k for j in range(k)]
    nonzero = np.flatnonzero(axis)
    if nonzero.size == 1:
        index = int(nonzero[0])
        sign = 1.0 if axis[index] > 0 else -1.0
        name = 'xyz'[index]
        elements = tuple(basic_rotation(name, sign * theta) for theta in angles)
    else:
        frame = _axis_frame(axis)
        back = frame.inverse()
        elements = tuple(frame.compose(basic_rotation('z', theta)).compose(back) for theta in angles)
    return _checked(FiniteGroup(elements, kind='cyclic3d', params={'axis': axis.tolist()}))


def orbit(group, x):
    """Orbit of ``x`` under ``group`` as a ``(k, dim)`` array, one row per element."""
    return group.orbit(x)
