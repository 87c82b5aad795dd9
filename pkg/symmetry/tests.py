import math

import numpy as np
from django.test import SimpleTestCase

from dipsim.exceptions import DimensionMismatch, InputError

from .groups import (
    Reflection1,
    Rotation2,
    Rotation3,
    apply,
    basic_rotation,
    euler_rotation,
    make_cyclic_group_2d,
    make_cyclic_group_3d,
    make_reflection_group,
    orbit,
)


class ApplyTests(SimpleTestCase):

    def test_quarter_turn(self):
        np.testing.assert_array_equal(apply(Rotation2(math.pi / 2), (1, 0)), [0.0, 1.0])

    def test_zero_rotation_is_identity(self):
        np.testing.assert_array_equal(apply(Rotation2(0.0), (3.5, -2.0)), [3.5, -2.0])

    def test_reflection_about_center(self):
        np.testing.assert_array_equal(apply(Reflection1(2.0), 3.0), [1.0])

    def test_reflection_is_involution(self):
        g = Reflection1(2.0)
        np.testing.assert_array_equal(g.apply(g.apply(3.0)), [3.0])
        self.assertFalse(g.compose(g).reflect)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            apply(Rotation2(1.0), (1.0, 2.0, 3.0))

    def test_non_finite_point_rejected(self):
        with self.assertRaises(InputError):
            apply(Rotation2(1.0), (float('nan'), 0.0))

    def test_rotations_preserve_norm(self):
        rng = np.random.default_rng(0)
        for theta in rng.uniform(-10, 10, size=50):
            x = rng.normal(size=2) * 100
            y = Rotation2(theta).apply(x)
            self.assertLessEqual(abs(np.linalg.norm(y) - np.linalg.norm(x)), 1e-10 * (1 + np.linalg.norm(x)))

    def test_angle_canonicalized(self):
        self.assertEqual(Rotation2(2 * math.pi).theta, 0.0)
        self.assertAlmostEqual(Rotation2(-math.pi / 2).theta, 3 * math.pi / 2)

    def test_rotation2_composition_is_additive_and_commutative(self):
        a, b = Rotation2(5.0), Rotation2(2.5)
        self.assertTrue(a.compose(b).is_close(b.compose(a)))
        self.assertAlmostEqual(a.compose(b).theta, math.fmod(7.5, 2 * math.pi))


class CyclicGroup2DTests(SimpleTestCase):

    def test_order_one_is_identity(self):
        group = make_cyclic_group_2d(1)
        self.assertEqual(group.order, 1)
        self.assertEqual(group[0].theta, 0.0)

    def test_equally_spaced_angles(self):
        group = make_cyclic_group_2d(4)
        np.testing.assert_allclose([g.theta for g in group], [0, math.pi / 2, math.pi, 3 * math.pi / 2])

    def test_closure_example(self):
        group = make_cyclic_group_2d(3)
        self.assertTrue(group[1].compose(group[1]).is_close(group[2]))

    def test_zero_order_rejected(self):
        with self.assertRaises(InputError):
            make_cyclic_group_2d(0)

    def test_axioms_hold_up_to_512(self):
        for k in (1, 2, 7, 64, 512):
            table = make_cyclic_group_2d(k).verify()
            self.assertEqual(table.shape, (k, k))
            if k > 1:
                self.assertEqual(table[1, k - 1], 0)

    def test_inverse_index(self):
        group = make_cyclic_group_2d(8)
        self.assertEqual(group.inverse_index(3), 5)
        self.assertEqual(group.inverse_index(0), 0)


class ReflectionGroupTests(SimpleTestCase):

    def test_reflection_about_zero(self):
        group = make_reflection_group(0.0)
        np.testing.assert_array_equal(orbit(group, 5.0).ravel(), [5.0, -5.0])

    def test_orbit_about_two(self):
        np.testing.assert_array_equal(orbit(make_reflection_group(2.0), 3.0).ravel(), [3.0, 1.0])

    def test_non_finite_center_rejected(self):
        with self.assertRaises(InputError):
            make_reflection_group(float('inf'))

    def test_describe(self):
        self.assertEqual(make_reflection_group(1.5).describe(), {'kind': 'reflection', 'k': 2, 'mu': 1.5})


class Rotation3Tests(SimpleTestCase):

    def test_euler_zero_is_identity(self):
        np.testing.assert_array_equal(euler_rotation(0, 0, 0).matrix, np.eye(3))

    def test_euler_top_right_entry(self):
        self.assertEqual(euler_rotation(0, math.pi / 2, 0).matrix[0, 2], 1.0)

    def test_closed_form_matches_product_of_basic_rotations(self):
        rng = np.random.default_rng(1)
        for tx, ty, tz in rng.uniform(0, 2 * math.pi, size=(100, 3)):
            product = basic_rotation('x', tx).matrix @ basic_rotation('y', ty).matrix @ basic_rotation('z', tz).matrix
            np.testing.assert_allclose(euler_rotation(tx, ty, tz).matrix, product, atol=1e-12, rtol=0)

    def test_rotation_matrix_is_orthogonal(self):
        m = euler_rotation(0.3, 1.1, 2.9).matrix
        np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-12)
        self.assertAlmostEqual(np.linalg.det(m), 1.0, delta=1e-12)

    def test_euler_round_trip(self):
        angles = (0.4, 1.2, 5.0)
        recovered = euler_rotation(*angles).euler
        np.testing.assert_allclose(recovered, angles, atol=1e-10)

    def test_inverse_is_transpose(self):
        g = euler_rotation(0.2, 0.5, 0.9)
        np.testing.assert_allclose(g.compose(g.inverse()).matrix, np.eye(3), atol=1e-12)

    def test_bad_axis_name(self):
        with self.assertRaises(InputError):
            basic_rotation('w', 1.0)

    def test_matrix_shape_checked(self):
        with self.assertRaises(InputError):
            Rotation3(np.eye(2))


class CyclicGroup3DTests(SimpleTestCase):

    def test_order_one(self):
        group = make_cyclic_group_3d(1, (0, 0, 1))
        np.testing.assert_array_equal(group[0].matrix, np.eye(3))

    def test_y_axis_quarter_turn(self):
        group = make_cyclic_group_3d(4, (0, 1, 0))
        np.testing.assert_array_equal(group[1].apply((0, 0, 1)), [1.0, 0.0, 0.0])

    def test_z_axis_orbit(self):
        points = orbit(make_cyclic_group_3d(4, (0, 0, 1)), (1, 0, 0))
        np.testing.assert_array_equal(points, [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]])

    def test_general_axis_fixes_axis_and_is_a_group(self):
        axis = np.array([1.0, 2.0, 2.0]) / 3.0
        group = make_cyclic_group_3d(6, axis)
        group.verify()
        np.testing.assert_allclose(group.orbit(axis), np.tile(axis, (6, 1)), atol=1e-12)
        for g in group:
            m = g.matrix
            np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-12)

    def test_negative_axis_rotates_clockwise(self):
        group = make_cyclic_group_3d(4, (0, 0, -1))
        np.testing.assert_array_equal(group[1].apply((1, 0, 0)), [0.0, -1.0, 0.0])

    def test_zero_axis_rejected(self):
        with self.assertRaises(InputError):
            make_cyclic_group_3d(4, (0, 0, 0))

    def test_non_unit_axis_rejected(self):
        with self.assertRaises(InputError):
            make_cyclic_group_3d(4, (0, 0, 2))


class OrbitTests(SimpleTestCase):

    def test_quarter_turn_orbit(self):
        np.testing.assert_array_equal(
            orbit(make_cyclic_group_2d(4), (1, 0)),
            [[1, 0], [0, 1], [-1, 0], [0, -1]],
        )

    def test_fixed_point_repeated(self):
        np.testing.assert_array_equal(orbit(make_cyclic_group_2d(5), (0, 0)), np.zeros((5, 2)))

    def test_orbit_is_permuted_by_every_element(self):
        group = make_cyclic_group_2d(6)
        points = orbit(group, (0.3, 1.7))
        for g in group:
            moved = np.array([g.apply(p) for p in points])
            for p in moved:
                self.assertLessEqual(np.min(np.max(np.abs(points - p), axis=1)), 1e-12)

    def test_orbit_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            orbit(make_reflection_group(0.0), (1.0, 2.0))
