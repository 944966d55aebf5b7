"""Tests for corrected-sequence synthesis."""
import unittest

import numpy as np
from numpy import testing as npt

from pulseforge.control import decompose
from pulseforge.control import pulsesim
from pulseforge.control import supcode
from pulseforge.util import finite_difference
from pulseforge.util import su2

HALF_TURN_TARGET = decompose.XZXAngles(0, np.pi, np.pi)


def _random_params(rng, jmax=3.0):
    return supcode.SupcodeParams.from_array(
        np.concatenate([rng.uniform(0, jmax, size=5),
                        rng.uniform(-np.pi, np.pi, size=1)]))


class TestCorrectedSequence(unittest.TestCase):
    def setUp(self):
        self.params = supcode.SupcodeParams(1.5, 0.5, 2.0, 0.7, 3.0, 0.4)
        self.target = decompose.XZXAngles(0.3, 1.2, 2.2)

    def test_piece_pattern(self):
        pieces = supcode.expand_corrected(self.params, self.target).pieces
        self.assertEqual(len(pieces), supcode.N_PIECES)
        exchanges = [piece.J for piece in pieces]
        npt.assert_allclose(exchanges[2:15],
                            [3.0, 0.7, 0, 2.0, 0, 0.5, 1.5, 0.5, 0, 2.0, 0,
                             0.7, 3.0])
        self.assertEqual(exchanges[2:15], exchanges[2:15][::-1])
        self.assertEqual(exchanges[:2] + exchanges[15:], [0, 1, 0, 1, 0])
        angles = [piece.phi for piece in pieces]
        self.assertAlmostEqual(angles[8], 4 * np.pi)
        self.assertAlmostEqual(angles[2], np.pi - 0.4)
        self.assertAlmostEqual(angles[14], np.pi + 0.4)

    def test_symmetric_pair_when_phi6_is_zero(self):
        params = supcode.SupcodeParams(1, 1, 1, 1, 1, 0.0)
        pieces = supcode.expand_corrected(params, self.target).pieces
        self.assertEqual(pieces[2], pieces[14])

    def test_durations(self):
        sequence = supcode.expand_corrected(
            self.params, self.target).as_pulse_sequence()
        npt.assert_allclose(sequence.durations,
                            sequence.angles / np.sqrt(1 + sequence.exchanges**2))

    def test_inserted_block_is_identity(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            params = _random_params(rng, jmax=30.0)
            sequence = supcode.expand_corrected(params, self.target)
            self.assertLess(
                su2.gate_error(
                    pulsesim.evolve_sequence(sequence.as_pulse_sequence()),
                    decompose.reconstruct(self.target)), 1e-12)

    def test_phi6_outside_box_rejected(self):
        with self.assertRaises(pulsesim.InvalidSequenceError):
            supcode.expand_corrected(
                supcode.SupcodeParams(1, 1, 1, 1, 1, 4.0), self.target)

    def test_negative_exchange_rejected(self):
        with self.assertRaises(ValueError):
            supcode.SupcodeParams(-1, 1, 1, 1, 1, 0.0)

    def test_in_box(self):
        self.assertTrue(self.params.in_box(30.0))
        self.assertFalse(self.params.in_box(2.5))


class TestResiduals(unittest.TestCase):
    def test_shape_and_zero_noise_mismatch(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            values = supcode.residuals(_random_params(rng),
                                       decompose.XZXAngles(1.0, 2.0, 0.5))
            self.assertEqual(values.shape, (9, ))
            npt.assert_allclose(values[:3], np.zeros(3), atol=1e-12)

    def test_richardson_agrees_with_exact(self):
        rng = np.random.default_rng(9)
        target = decompose.XZXAngles(0.4, 2.1, 1.3)
        for _ in range(5):
            params = _random_params(rng)
            exact = supcode.residuals(params, target)
            numeric = supcode.residuals(
                params, target, method=supcode.DerivativeMethod.RICHARDSON)
            npt.assert_allclose(numeric, exact, atol=1e-7)

    def test_finite_difference_convergence_order(self):
        params = supcode.SupcodeParams(1.5, 0.5, 2.0, 0.7, 3.0, 0.4)
        sequence = supcode.expand_corrected(
            params, HALF_TURN_TARGET).as_pulse_sequence()
        exchanges, angles = sequence.exchanges, sequence.angles
        w0 = pulsesim.sequence_matrix(exchanges, angles)
        g = pulsesim.sequence_derivatives(exchanges, angles)[0]
        exact = w0 @ (-0.5j * np.einsum("k,kij->ij", g, su2.PAULIS))
        order = finite_difference.convergence_order(
            lambda step: pulsesim.sequence_matrix(
                exchanges, angles, pulsesim.NoisePoint(dh=step)), exact)
        self.assertAlmostEqual(order, 2.0, delta=0.2)


class TestSynthesize(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.config = supcode.SynthesisConfig(seed=5)
        cls.params = supcode.synthesize(HALF_TURN_TARGET, config=cls.config)

    def test_converges_inside_box(self):
        values = supcode.residuals(self.params, HALF_TURN_TARGET)
        self.assertLess(np.max(np.abs(values)), 1e-9)
        self.assertTrue(self.params.in_box(self.config.jmax))

    def test_zero_noise_gate_is_naive_gate(self):
        sequence = supcode.expand_corrected(self.params, HALF_TURN_TARGET)
        self.assertLess(
            su2.gate_error(
                pulsesim.evolve_sequence(sequence.as_pulse_sequence()),
                decompose.reconstruct(HALF_TURN_TARGET)), 1e-9)

    def test_first_order_flat(self):
        report = supcode.robustness_report(self.params, HALF_TURN_TARGET)
        for axis in pulsesim.NoiseAxis:
            self.assertAlmostEqual(report.slopes[axis], 4.0, delta=0.4)
            self.assertAlmostEqual(report.naive_slopes[axis], 2.0, delta=0.3)

    def test_perturbed_exchange_breaks_cancellation(self):
        values = self.params.as_array()
        values[1] += 0.01
        perturbed = supcode.residuals(
            supcode.SupcodeParams.from_array(values), HALF_TURN_TARGET)
        self.assertGreater(np.max(np.abs(perturbed[3:])), 1e-6)
        npt.assert_allclose(perturbed[:3], np.zeros(3), atol=1e-12)

    def test_seeded_from_solution(self):
        params = supcode.synthesize(
            HALF_TURN_TARGET, [self.params],
            supcode.SynthesisConfig(n_starts=0))
        npt.assert_allclose(params.as_array(), self.params.as_array(),
                            atol=1e-6)

    def test_deterministic(self):
        again = supcode.synthesize(HALF_TURN_TARGET, config=self.config)
        npt.assert_array_equal(again.as_array(), self.params.as_array())


class TestRepresentatives(unittest.TestCase):
    def test_insertion_sensitivities_undo_naive_pieces(self):
        naive = decompose.XZXAngles(0.4, 2.1, 1.3)
        angles = np.array([naive.phi_a, np.pi, naive.phi_b, np.pi,
                           naive.phi_c])
        before = pulsesim.sequence_matrix(supcode.NAIVE_EXCHANGES[2:],
                                          angles[2:])
        moved = supcode.insertion_sensitivities(naive)
        for row, expected in zip(
                moved,
                pulsesim.sequence_derivatives(supcode.NAIVE_EXCHANGES,
                                              angles)):
            back = before.conj().T @ np.einsum(
                "k,kij->ij", row, su2.PAULIS) @ before
            npt.assert_allclose(
                np.real(np.einsum("ij,kji->k", back, su2.PAULIS)) / 2,
                expected,
                atol=1e-12)

    def test_half_turn_needs_shifted_representative(self):
        self.assertIsNone(supcode.block_seed(HALF_TURN_TARGET))
        seeds = supcode.block_seeds(HALF_TURN_TARGET,
                                    supcode.SynthesisConfig())
        self.assertNotIn(HALF_TURN_TARGET, [seed.naive for seed in seeds])
        self.assertTrue(
            any(abs(seed.j6 - (np.sqrt(2) - 1)) < 1e-6 for seed in seeds))
        self.assertTrue(all(len(seed.phi6) == 4 for seed in seeds))

    def test_block_seeds_are_feasible(self):
        config = supcode.SynthesisConfig()
        seeds = supcode.block_seeds(HALF_TURN_TARGET, config)
        self.assertTrue(seeds)
        for seed in seeds:
            self.assertTrue(0 <= seed.j6 <= config.jmax)
            self.assertTrue(all(-np.pi <= phi <= np.pi for phi in seed.phi6))

    def test_every_representative_is_the_same_gate(self):
        target = decompose.XZXAngles(0.3, 1.2, 2.2)
        representatives = decompose.representatives(target)
        self.assertEqual(len(set(representatives)), 8)
        self.assertEqual(representatives[0], target)
        for naive in representatives:
            self.assertLess(
                su2.gate_error(decompose.reconstruct(naive),
                               decompose.reconstruct(target)), 1e-12)

    def test_expansion_ignores_which_representative_is_passed(self):
        params = supcode.SupcodeParams(1.5, 0.5, 2.0, 0.7, 3.0, 0.4)
        target = decompose.XZXAngles(0.3, 1.2, 2.2)
        shifted = decompose.XZXAngles(0.3 + 2 * np.pi, 1.2, 2.2 + 2 * np.pi)
        expected = supcode.expand_corrected(params,
                                            target).as_pulse_sequence()
        actual = supcode.expand_corrected(params,
                                          shifted).as_pulse_sequence()
        npt.assert_allclose(actual.angles, expected.angles, atol=1e-12)
        npt.assert_array_equal(actual.exchanges, expected.exchanges)


class TestSynthesizeComparisonRotation(unittest.TestCase):
    def test_converges_on_second_comparison_rotation(self):
        target = decompose.solve_xzx(su2.AxisAngle(-2.0, 2.0, 2.0))
        params = supcode.synthesize(target,
                                    config=supcode.SynthesisConfig(seed=5))
        self.assertLess(np.max(np.abs(supcode.residuals(params, target))),
                        1e-9)
        sequence = supcode.expand_corrected(params, target)
        self.assertLess(
            su2.gate_error(
                pulsesim.evolve_sequence(sequence.as_pulse_sequence()),
                decompose.reconstruct(target)), 1e-9)
        self.assertIn(sequence.naive, decompose.representatives(target))


class TestSynthesisFailure(unittest.TestCase):
    def test_failure_carries_best_residual(self):
        seed = supcode.SupcodeParams(10, 10, 10, 10, 10, 1.0)
        config = supcode.SynthesisConfig(n_starts=0, max_nfev=1)
        with self.assertRaises(supcode.SynthesisFailedError) as context:
            supcode.synthesize(HALF_TURN_TARGET, [seed], config)
        self.assertGreater(context.exception.best_residual, config.tol)
        self.assertIsNotNone(context.exception.best_params)

    def test_needs_a_seed(self):
        with self.assertRaises(ValueError):
            supcode.synthesize(HALF_TURN_TARGET, (),
                               supcode.SynthesisConfig(n_starts=0))


if __name__ == '__main__':
    unittest.main()
