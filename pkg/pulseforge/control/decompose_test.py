"""Tests for the x-z-x decomposition and five-piece pulses."""
import unittest
import warnings

import numpy as np
from numpy import testing as npt

from pulseforge.control import decompose
from pulseforge.control import pulsesim
from pulseforge.util import su2

FIG2_TARGET = su2.AxisAngle(-np.pi / 4, 2 * np.pi / 3, np.pi / 2)


def _random_target(rng):
    return su2.AxisAngle(rng.uniform(-np.pi, 0), rng.uniform(0, np.pi),
                         rng.uniform(0, 2 * np.pi))


def _periodic_distance(a, b, period=4 * np.pi):
    diff = np.mod(np.asarray(a) - np.asarray(b), period)
    return np.minimum(diff, period - diff)


class TestSolveXZX(unittest.TestCase):
    def test_random_targets_reconstruct(self):
        rng = np.random.default_rng(1000)
        for _ in range(1000):
            target = _random_target(rng)
            solution = decompose.solve_xzx_with_flag(target)
            self.assertLess(solution.error, 1e-10)
            pulse = decompose.expand_five_piece(
                solution.angles).as_pulse_sequence()
            self.assertLess(
                su2.gate_error(pulsesim.evolve_sequence(pulse),
                               target.unitary()), 1e-10)

    def test_angles_are_canonical(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            angles = decompose.solve_xzx(_random_target(rng)).as_array()
            self.assertTrue(np.all(angles >= 0))
            self.assertTrue(np.all(angles < 4 * np.pi))

    def test_literature_target(self):
        angles = decompose.solve_xzx(FIG2_TARGET)
        self.assertLess(
            su2.gate_error(decompose.reconstruct(angles),
                           FIG2_TARGET.unitary()), 1e-10)
        _, exchanges = decompose.expand_five_piece(
            angles).as_pulse_sequence().profile()
        npt.assert_array_equal(exchanges, [0, 1, 0, 1, 0])

    def test_pure_z_target(self):
        for theta in [0.3, 1.0, 2.5]:
            target = su2.AxisAngle(-1.0, 0.0, theta)
            angles = decompose.solve_xzx(target)
            npt.assert_allclose(
                _periodic_distance([angles.phi_a, angles.phi_c], [0, 0]),
                [0, 0],
                atol=1e-12)
            self.assertAlmostEqual(angles.phi_b, theta, places=12)

    def test_accepts_unitary_targets(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            target = _random_target(rng)
            u = target.unitary().with_phase(rng.uniform(0, 6))
            self.assertLess(
                su2.gate_error(decompose.reconstruct(decompose.solve_xzx(u)),
                               u), 1e-10)

    def test_zero_rotation_is_flagged(self):
        solution = decompose.solve_xzx_with_flag(su2.AxisAngle(-1, 1, 0))
        self.assertTrue(solution.singular)
        self.assertLess(solution.error, 1e-10)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            decompose.solve_xzx(su2.AxisAngle(-1, 1, 2 * np.pi))
        self.assertEqual(len(caught), 1)

    def test_half_turn_about_y_is_flagged(self):
        # w = x = 0 leaves (phi_a + phi_c) free
        solution = decompose.solve_xzx_with_flag(
            su2.AxisAngle(-np.pi / 2, np.pi / 2, np.pi))
        self.assertTrue(solution.singular)
        self.assertLess(solution.error, 1e-10)

    def test_regular_target_not_flagged(self):
        self.assertFalse(decompose.solve_xzx_with_flag(FIG2_TARGET).singular)

    def test_continuity_along_slices(self):
        slices = [
            [su2.AxisAngle(-1.0, 1.0, t) for t in np.linspace(0.2, 6.08, 300)],
            [su2.AxisAngle(a, 1.0, 2.0) for a in np.linspace(-1.5, -0.1, 300)],
            [su2.AxisAngle(-1.0, b, 2.0) for b in np.linspace(0.1, 3.0, 300)],
        ]
        for path in slices:
            values = np.array([
                decompose.signed_angles(decompose.solve_xzx(target))
                for target in path
            ])
            coords = np.array([[t.alpha, t.beta, t.theta] for t in path])
            spacing = np.linalg.norm(np.diff(coords, axis=0), axis=1)
            jumps = np.linalg.norm(np.diff(values, axis=0), axis=1)
            self.assertTrue(np.all(jumps < 10 * spacing))

    def test_numeric_solver_agrees(self):
        rng = np.random.default_rng(44)
        for _ in range(10):
            target = _random_target(rng)
            numeric = decompose.solve_xzx_numeric(target, rng=rng)
            closed = decompose.solve_xzx(target)
            self.assertLess(numeric.error, 1e-10)
            self.assertLess(
                su2.gate_error(decompose.reconstruct(numeric.angles),
                               decompose.reconstruct(closed)), 1e-8)


class TestFivePiece(unittest.TestCase):
    def test_zero_angles_give_minus_identity(self):
        pulse = decompose.expand_five_piece(decompose.XZXAngles(0, 0, 0))
        npt.assert_allclose(
            pulsesim.evolve_sequence(pulse.as_pulse_sequence()).matrix,
            -su2.IDENTITY,
            atol=1e-14)

    def test_matches_three_rotation_product(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            angles = decompose.XZXAngles.from_array(
                rng.uniform(0, 4 * np.pi, size=3))
            pulse = decompose.expand_five_piece(angles).as_pulse_sequence()
            npt.assert_allclose(pulsesim.evolve_sequence(pulse).matrix,
                                -decompose.reconstruct(angles).matrix,
                                atol=1e-12)

    def test_durations(self):
        angles = decompose.XZXAngles(1.0, 2.0, 3.0)
        pulse = decompose.expand_five_piece(angles)
        npt.assert_allclose(
            pulse.durations,
            [1.0, np.pi / np.sqrt(2), 2.0, np.pi / np.sqrt(2), 3.0])
        self.assertAlmostEqual(pulse.total_duration,
                               6.0 + np.pi * np.sqrt(2))

    def test_rejects_wrong_pattern(self):
        with self.assertRaises(ValueError):
            decompose.FivePieceSequence(
                ((decompose.AxisTag.X, 1.0), ) * 5)


class TestAngles(unittest.TestCase):
    def test_canonicalize(self):
        self.assertAlmostEqual(decompose.canonicalize(-1.0), 4 * np.pi - 1.0)
        self.assertAlmostEqual(decompose.canonicalize(5 * np.pi), np.pi)
        self.assertEqual(decompose.canonicalize(-1e-300), 0.0)

    def test_signed_representative(self):
        angles = decompose.XZXAngles(-0.5, 1.0, 3 * np.pi)
        npt.assert_allclose(decompose.signed_angles(angles),
                            [-0.5, 1.0, -np.pi])

    def test_quaternion_of_unitary_matches_axis_angle(self):
        target = su2.AxisAngle(-2.0, 1.2, 0.7)
        q_axis = decompose.target_quaternion(target)
        q_matrix = decompose.target_quaternion(target.unitary().with_phase(0.4))
        self.assertAlmostEqual(abs(np.dot(q_axis, q_matrix)), 1.0, places=12)


if __name__ == '__main__':
    unittest.main()
