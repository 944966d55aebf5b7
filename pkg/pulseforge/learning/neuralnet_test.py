"""Tests for the tanh network, its training loop and checkpoints."""
import os
import tempfile
import unittest
import warnings

import numpy as np
from numpy import testing as npt

from pulseforge.control import decompose
from pulseforge.learning import dataset
from pulseforge.learning import neuralnet
from pulseforge.util import finite_difference
from pulseforge.util import su2


def _small_model(seed, sizes=(3, 5, 4, 3)):
    return neuralnet.MLPModel.initialize(sizes, seed)


def _naive_records(n, seed):
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(n):
        target = su2.AxisAngle(rng.uniform(-1.4, -0.2), rng.uniform(0.2, 2.9),
                               rng.uniform(0.2, 3.0))
        records.append(dataset._naive_record(target, 30.0))
    return records


def _per_neuron_forward(model, x):
    activations = list(x)
    for w, b in zip(model.weights, model.biases):
        activations = [
            np.tanh(sum(w[j][k] * activations[k]
                        for k in range(len(activations))) + b[j])
            for j in range(len(b))
        ]
    return np.array(activations)


class TestForward(unittest.TestCase):
    def test_zero_parameters_give_zero_output(self):
        model = _small_model(0)
        model.weights = [np.zeros_like(w) for w in model.weights]
        model.biases = [np.zeros_like(b) for b in model.biases]
        output, _ = neuralnet.forward(model, [0.1, -0.5, 0.9])
        npt.assert_array_equal(output, np.zeros(3))

    def test_single_neuron(self):
        model = neuralnet.MLPModel((1, 1), [np.array([[1.0]])],
                                   [np.array([0.0])])
        output, _ = neuralnet.forward(model, [0.5])
        self.assertAlmostEqual(output[0], 0.4621171572600098, places=15)

    def test_matches_per_neuron_evaluation(self):
        rng = np.random.default_rng(1)
        for seed in range(5):
            model = _small_model(seed, (3, 7, 6, 6))
            x = rng.uniform(-1, 1, size=3)
            output, (zs, activations) = neuralnet.forward(model, x)
            npt.assert_allclose(output, _per_neuron_forward(model, x),
                                atol=1e-12)
            self.assertEqual(len(zs), 3)
            self.assertEqual(len(activations), 4)

    def test_shape_mismatch(self):
        with self.assertRaises(neuralnet.ShapeMismatchError):
            neuralnet.forward(_small_model(0), [0.1, 0.2])

    def test_inconsistent_parameters_rejected(self):
        with self.assertRaises(neuralnet.ShapeMismatchError):
            neuralnet.MLPModel((3, 2), [np.zeros((3, 2))], [np.zeros(2)])


class TestBackprop(unittest.TestCase):
    def test_zero_at_perfect_fit(self):
        model = _small_model(2)
        x = np.array([0.2, -0.3, 0.4])
        output, _ = neuralnet.forward(model, x)
        grad_w, grad_b = neuralnet.backprop(model, x, output)
        for grad in grad_w + grad_b:
            npt.assert_array_equal(grad, np.zeros_like(grad))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(20)
        for seed in range(20):
            model = _small_model(seed)
            x = rng.uniform(-1, 1, size=3)
            y = rng.uniform(-1, 1, size=3)
            grad_w, grad_b = neuralnet.backprop(model, x, y)

            def cost_with(parameters, layer, kind):
                trial = model.copy()
                getattr(trial, kind)[layer] = parameters
                output, _ = neuralnet.forward(trial, x)
                return 0.5 * np.sum((y - output)**2)

            for layer in range(3):
                for kind, exact in (("weights", grad_w[layer]),
                                    ("biases", grad_b[layer])):
                    numeric = finite_difference.gradient(
                        lambda p: cost_with(p, layer, kind),
                        getattr(model, kind)[layer])
                    npt.assert_allclose(exact, numeric, rtol=1e-6,
                                        atol=1e-9)

    def test_output_layer_in_linear_regime(self):
        model = _small_model(4)
        model.weights = [w * 1e-4 for w in model.weights]
        x, y = np.array([0.5, -0.5, 0.1]), np.array([0.3, 0.0, -0.2])
        output, (zs, activations) = neuralnet.forward(model, x)
        grad_w, grad_b = neuralnet.backprop(model, x, y)
        delta = (output - y) * (1 - np.tanh(zs[-1])**2)
        npt.assert_allclose(grad_w[-1], np.outer(delta, activations[-2]),
                            atol=1e-15)
        npt.assert_allclose(grad_b[-1], delta, atol=1e-15)


class TestTrain(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.records = _naive_records(40, seed=3)

    def test_full_bin_steps_on_averaged_example(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 6, seed=1)
        config = neuralnet.TrainConfig(learning_rate=0.1, epochs=1,
                                       bin_size=len(self.records),
                                       eval_epochs=[])
        trained, curve = neuralnet.train(model, self.records, config)
        self.assertEqual(curve.rows, [])

        inputs, targets = dataset.as_arrays(self.records)
        grad_w, grad_b = neuralnet.backprop(model, inputs.mean(axis=0),
                                            targets.mean(axis=0))
        for layer in range(3):
            npt.assert_allclose(trained.weights[layer],
                                model.weights[layer] - 0.1 * grad_w[layer],
                                atol=1e-12)
            npt.assert_allclose(trained.biases[layer],
                                model.biases[layer] - 0.1 * grad_b[layer],
                                atol=1e-12)

    def test_averaged_example_differs_from_mean_gradient(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 6, seed=1)
        inputs, targets = dataset.as_arrays(self.records)
        stepped = model.copy()
        neuralnet.sgd_step(stepped, inputs, targets, 0.1)
        grads = [neuralnet.backprop(model, x, y)
                 for x, y in zip(inputs, targets)]
        mean_w = np.mean([g[0][0] for g in grads], axis=0)
        self.assertGreater(
            np.max(np.abs(stepped.weights[0] -
                          (model.weights[0] - 0.1 * mean_w))), 1e-8)

    def test_single_record_bin_is_plain_backprop(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 6, seed=1)
        inputs, targets = dataset.as_arrays(self.records[:1])
        stepped = model.copy()
        neuralnet.sgd_step(stepped, inputs, targets, 0.1)
        grad_w, _ = neuralnet.backprop(model, inputs[0], targets[0])
        npt.assert_allclose(stepped.weights[1],
                            model.weights[1] - 0.1 * grad_w[1], atol=1e-15)

    def test_input_model_untouched(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 6, seed=1)
        before = [w.copy() for w in model.weights]
        trained, _ = neuralnet.train(
            model, self.records,
            neuralnet.TrainConfig(epochs=2, eval_epochs=[]))
        for old, new in zip(before, model.weights):
            npt.assert_array_equal(old, new)
        self.assertEqual(trained.epochs_trained, 2)

    def test_cost_decreases(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 10, seed=2)
        inputs, targets = dataset.as_arrays(self.records)
        initial = neuralnet.cost(model, inputs, targets)
        trained, curve = neuralnet.train(
            model, self.records,
            neuralnet.TrainConfig(learning_rate=0.05, epochs=60,
                                  eval_epochs=[60], slice_points=10))
        self.assertLess(curve.rows[-1][2], initial)
        self.assertAlmostEqual(curve.rows[-1][2],
                               neuralnet.cost(trained, inputs, targets))

    def test_deterministic(self):
        config = neuralnet.TrainConfig(epochs=3, eval_every=1,
                                       slice_points=11)
        model = neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 5, seed=8)
        _, first = neuralnet.train(model, self.records, config)
        _, second = neuralnet.train(model, self.records, config)
        self.assertEqual(first.rows, second.rows)
        self.assertEqual([row[0] for row in first.rows], [1, 2, 3])

    def test_divergence_reports_epoch(self):
        records = self.records + [
            dataset.TrainingRecord(dataset.Task.NAIVE,
                                   (float("nan"), 0.0, 0.0), (0.0, 0.0, 0.0))
        ]
        with self.assertRaises(neuralnet.TrainingDivergedError) as context:
            neuralnet.train(
                neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 5, seed=0),
                records, neuralnet.TrainConfig(epochs=3, eval_epochs=[]))
        self.assertEqual(context.exception.epoch, 1)

    def test_task_mismatch(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.CORRECTED, 5, seed=0)
        with self.assertRaises(neuralnet.TaskMismatchError):
            neuralnet.train(model, self.records,
                            neuralnet.TrainConfig(epochs=1))

    def test_invalid_config(self):
        with self.assertRaises(ValueError):
            neuralnet.TrainConfig(learning_rate=0.0)
        with self.assertRaises(ValueError):
            neuralnet.TrainConfig(bin_size=0)

    def test_studies(self):
        config = neuralnet.TrainConfig(epochs=2, slice_points=5)
        rates = neuralnet.learning_rate_study(self.records, [0.01, 0.1],
                                              seeds=[0, 1], config=config,
                                              neurons=4)
        self.assertEqual(sorted(rates), [0.01, 0.1])
        self.assertEqual(len(rates[0.1].finals), 2)
        capacity = neuralnet.capacity_study(self.records, [3, 6], seeds=[0],
                                            config=config)
        self.assertEqual(sorted(capacity), [3, 6])
        self.assertTrue(np.isfinite(capacity[3].mean))
        self.assertEqual(capacity[6].spread, 0.0)


class TestPredict(unittest.TestCase):
    def test_naive_prediction_is_canonical(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 5, seed=0)
        angles = neuralnet.predict_naive(model, su2.AxisAngle(-1, 1, 2))
        self.assertIsInstance(angles, decompose.XZXAngles)
        self.assertTrue(np.all(angles.as_array() < 4 * np.pi))

    def test_non_finite_outputs_rejected(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 5, seed=0)
        model.weights[-1][0, 0] = np.nan
        with self.assertRaises(neuralnet.OutputRangeError):
            neuralnet.predict_naive(model, su2.AxisAngle(-1, 1, 2))

    def test_wrong_task(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 5, seed=0)
        with self.assertRaises(neuralnet.TaskMismatchError):
            neuralnet.predict_corrected(model,
                                        decompose.XZXAngles(0, np.pi, np.pi))

    def test_corrected_prediction_clamped(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.CORRECTED, 5, seed=0)
        model.biases[-1] = np.array([-50.0, 0, 0, 0, 0, 50.0])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            params = neuralnet.predict_corrected(
                model, decompose.XZXAngles(0, np.pi, np.pi))
        self.assertEqual(len(caught), 1)
        self.assertEqual(params.j0, 0.0)
        self.assertEqual(params.phi6, np.pi)

    def test_evaluate_slices(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.NAIVE, 5, seed=0)
        errors = neuralnet.evaluate_slices(model, n_points=100)
        for value in (errors.alpha, errors.beta, errors.theta,
                      errors.alpha_window):
            self.assertTrue(0 <= value <= 2 / 3)

    def test_evaluate_corrected_slices(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.CORRECTED, 4, seed=0)
        errors = neuralnet.evaluate_slices(model, n_points=6)
        self.assertTrue(0 <= errors.mean <= 2 / 3)


class TestFiles(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_checkpoint_round_trip(self):
        model = neuralnet.MLPModel.for_task(dataset.Task.CORRECTED, 5, seed=3,
                                            jmax=20.0)
        model.epochs_trained = 7
        path = neuralnet.save_checkpoint(
            os.path.join(self.tmp.name, "model.json"), model)
        loaded = neuralnet.load_checkpoint(path)
        self.assertEqual(loaded.sizes, (3, 5, 5, 6))
        self.assertEqual(loaded.task, dataset.Task.CORRECTED)
        self.assertEqual(loaded.jmax, 20.0)
        self.assertEqual(loaded.epochs_trained, 7)
        for a, b in zip(model.weights + model.biases,
                        loaded.weights + loaded.biases):
            npt.assert_array_equal(a, b)

    def test_bad_checkpoint(self):
        path = os.path.join(self.tmp.name, "bad.json")
        with open(path, "w") as handle:
            handle.write('{"format": "something-else"}')
        with self.assertRaises(neuralnet.CheckpointFormatError):
            neuralnet.load_checkpoint(path)
        with open(path, "w") as handle:
            handle.write("not json")
        with self.assertRaises(neuralnet.CheckpointFormatError):
            neuralnet.load_checkpoint(path)

    def test_curve_round_trip(self):
        curve = neuralnet.LearningCurve()
        curve.append(10, neuralnet.SliceErrors(0.1, 0.2, 0.3, 0.4), 0.5)
        curve.append(20, neuralnet.SliceErrors(0.01, 0.02, 0.03, 0.04), 0.05)
        path = curve.write_csv(os.path.join(self.tmp.name, "curve.csv"))
        loaded = neuralnet.read_curve_csv(path)
        self.assertEqual(loaded.rows, curve.rows)
        self.assertAlmostEqual(loaded.at(20).mean, 0.02)


if __name__ == '__main__':
    unittest.main()
