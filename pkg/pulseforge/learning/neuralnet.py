"""Two-hidden-layer tanh network trained by plain SGD on a quadratic cost.

Layer l computes a^l = tanh(w^l a^{l-1} + b^l); the output layer is tanh as
well, so raw predictions live in (-1, 1) and are mapped back to physical
units with the corpus normalization.
"""

import csv
from dataclasses import dataclass, field, replace
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
import warnings

import numpy as np

from pulseforge.control import decompose
from pulseforge.control import pulsesim
from pulseforge.control import supcode
from pulseforge.learning import dataset
from pulseforge.util import su2

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "pulseforge-mlp"
CHECKPOINT_VERSION = 1

CURVE_FIELDS = ("epoch", "alpha", "beta", "theta", "alpha_window", "cost")

# Half-width of the window around alpha = -pi/2 reported separately
SINGULAR_WINDOW = 0.05

# Fixed coordinates of the three evaluation slices
SLICE_BETA, SLICE_THETA, SLICE_ALPHA = 1.0, 2.0, -1.0


class ShapeMismatchError(ValueError):
    """Raised when an input or parameter does not match the layer sizes."""


class TrainingDivergedError(ArithmeticError):
    """Raised when a parameter becomes non-finite during training."""

    def __init__(self, epoch: int):
        super().__init__(
            "Training diverged: non-finite parameters after epoch {}".format(
                epoch))
        self.epoch = epoch


class OutputRangeError(ArithmeticError):
    """Raised when network outputs leave [-1, 1] or are not finite."""


class TaskMismatchError(ValueError):
    """Raised when a model is used for the other regression task."""


class CheckpointFormatError(ValueError):
    """Raised when a checkpoint file cannot be parsed."""


@dataclass
class MLPModel:
    """Weights w[l] of shape (n_l, n_{l-1}) and biases b[l] of shape (n_l,)
    for every layer after the input layer."""
    sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    task: dataset.Task = dataset.Task.NAIVE
    jmax: float = supcode.SynthesisConfig.jmax
    seed: Optional[int] = None
    epochs_trained: int = 0
    activation: str = "tanh"

    def __post_init__(self):
        self.sizes = tuple(int(n) for n in self.sizes)
        if len(self.weights) != len(self.sizes) - 1 or len(
                self.biases) != len(self.sizes) - 1:
            raise ShapeMismatchError("Expected {} layers of parameters".format(
                len(self.sizes) - 1))
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.sizes[layer + 1], self.sizes[layer])
            if w.shape != expected or b.shape != (expected[0], ):
                raise ShapeMismatchError(
                    "Layer {}: weights {} and biases {}, expected {}".format(
                        layer + 1, w.shape, b.shape, expected))

    @classmethod
    def initialize(cls,
                   sizes: Sequence[int],
                   seed: int,
                   task: dataset.Task = dataset.Task.NAIVE,
                   jmax: float = supcode.SynthesisConfig.jmax) -> "MLPModel":
        """Weights and biases uniform in +-1/sqrt(fan_in)."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(tuple(sizes), weights, biases, task, jmax, seed)

    @classmethod
    def for_task(cls, task: dataset.Task, neurons: int, seed: int,
                 jmax: float = supcode.SynthesisConfig.jmax) -> "MLPModel":
        return cls.initialize((3, neurons, neurons, len(task.target_fields)),
                              seed, task, jmax)

    def copy(self) -> "MLPModel":
        return MLPModel(self.sizes, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.task, self.jmax,
                        self.seed, self.epochs_trained, self.activation)

    def is_finite(self) -> bool:
        return all(
            np.all(np.isfinite(p)) for p in self.weights + self.biases)


def _forward_batch(model: MLPModel, inputs: np.ndarray
                   ) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Returns (z per layer, activations including the input layer)."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[1] != model.sizes[0]:
        raise ShapeMismatchError("Expected inputs of length {}, got {}".format(
            model.sizes[0], inputs.shape[1]))
    zs, activations = [], [inputs]
    for w, b in zip(model.weights, model.biases):
        z = activations[-1] @ w.T + b
        zs.append(z)
        activations.append(np.tanh(z))
    return zs, activations


def forward(model: MLPModel, x: Sequence[float]
            ) -> Tuple[np.ndarray, Tuple[List[np.ndarray], List[np.ndarray]]]:
    """Output for a single normalized input, plus the (z, a) cache.

    Raises:
        ShapeMismatchError: if `x` does not have `model.sizes[0]` entries.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeMismatchError("forward takes one input vector, got shape "
                                 "{}".format(x.shape))
    zs, activations = _forward_batch(model, x)
    cache = ([z[0] for z in zs], [a[0] for a in activations])
    return activations[-1][0], cache


def predict_batch(model: MLPModel, inputs: np.ndarray) -> np.ndarray:
    """Raw (normalized) outputs for a matrix of inputs, one row each."""
    return _forward_batch(model, inputs)[1][-1]


def _mean_gradients(model: MLPModel, inputs: np.ndarray, targets: np.ndarray
                    ) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    _, activations = _forward_batch(model, inputs)
    targets = np.atleast_2d(targets)
    if targets.shape[1] != model.sizes[-1]:
        raise ShapeMismatchError("Expected targets of length {}, got {}".format(
            model.sizes[-1], targets.shape[1]))
    n = activations[0].shape[0]
    # dC/da^L f'(z^L) with C = 1/2 sum (y - a)^2 and tanh' = 1 - a^2
    delta = (activations[-1] - targets) * (1 - activations[-1]**2)
    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.weights)
    for layer in range(len(model.weights) - 1, -1, -1):
        grad_w[layer] = delta.T @ activations[layer] / n
        grad_b[layer] = delta.mean(axis=0)
        if layer:
            delta = (delta @ model.weights[layer]) * (
                1 - activations[layer]**2)
    return grad_w, grad_b


def backprop(model: MLPModel, x: Sequence[float], y: Sequence[float]
             ) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Gradients of C_x = 1/2 sum_j (y_j - a_j^L)^2 for one example.

    Returns:
        (dC/dw, dC/db) per layer, with dC/db^l = delta^l and
        dC/dw^l_jk = a^{l-1}_k delta^l_j.
    """
    return _mean_gradients(model, np.asarray(x, dtype=float)[None, :],
                           np.asarray(y, dtype=float)[None, :])


def cost(model: MLPModel, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean quadratic cost over a set of examples."""
    outputs = predict_batch(model, inputs)
    return float(np.mean(0.5 * np.sum((targets - outputs)**2, axis=1)))


def sgd_step(model: MLPModel, inputs: np.ndarray, targets: np.ndarray,
             learning_rate: float) -> None:
    """In-place w -> w - eta dC/dw for one bin.

    The bin's inputs and targets are averaged into a single example and the
    step follows that example's gradient.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    grad_w, grad_b = backprop(model, inputs.mean(axis=0),
                              targets.mean(axis=0))
    for layer in range(len(model.weights)):
        model.weights[layer] -= learning_rate * grad_w[layer]
        model.biases[layer] -= learning_rate * grad_b[layer]


@dataclass
class TrainConfig:
    """SGD options.

    Attributes:
        learning_rate: eta in w -> w - eta dC/dw.
        epochs: Passes over the shuffled corpus.
        bin_size: Records per bin; each bin is averaged into one example
            and one SGD step is taken on it.
        seed: Seed of the per-epoch shuffles.
        eval_epochs: Epochs after which the slices are evaluated; None means
            every `eval_every` epochs and the last one.
        eval_every: Evaluation period when `eval_epochs` is None.
        slice_points: Points per evaluation slice.
        scoring_noise: Static noise (dh = de) at which corrected-task
            predictions are scored.
        verbosity: Log every evaluation at INFO.
    """
    learning_rate: float = 0.005
    epochs: int = 500
    bin_size: int = 1
    seed: int = 0
    eval_epochs: Optional[Sequence[int]] = None
    eval_every: int = 10
    slice_points: int = 100
    scoring_noise: float = 0.01
    verbosity: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.bin_size < 1:
            raise ValueError("epochs and bin_size must be at least 1")

    def evaluates_at(self, epoch: int) -> bool:
        if self.eval_epochs is not None:
            return epoch in self.eval_epochs
        return epoch % self.eval_every == 0 or epoch == self.epochs


@dataclass(frozen=True)
class SliceErrors:
    """Mean gate errors over the three evaluation slices.

    `alpha` excludes the window around alpha = -pi/2, whose mean is
    `alpha_window`.
    """
    alpha: float
    beta: float
    theta: float
    alpha_window: float

    @property
    def mean(self) -> float:
        return (self.alpha + self.beta + self.theta) / 3


@dataclass
class LearningCurve:
    rows: List[Tuple[int, SliceErrors, float]] = field(default_factory=list)

    def append(self, epoch: int, errors: SliceErrors, cost_value: float):
        self.rows.append((epoch, errors, cost_value))

    def at(self, epoch: int) -> SliceErrors:
        for row_epoch, errors, _ in self.rows:
            if row_epoch == epoch:
                return errors
        raise KeyError("No evaluation at epoch {}".format(epoch))

    @property
    def final(self) -> SliceErrors:
        return self.rows[-1][1]

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CURVE_FIELDS)
            for epoch, errors, cost_value in self.rows:
                writer.writerow([
                    epoch,
                    repr(errors.alpha),
                    repr(errors.beta),
                    repr(errors.theta),
                    repr(errors.alpha_window),
                    repr(cost_value)
                ])
        return path


def read_curve_csv(path: Union[str, Path]) -> LearningCurve:
    curve = LearningCurve()
    with Path(path).open(newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != CURVE_FIELDS:
            raise ValueError("{}: expected header {}".format(
                path, ",".join(CURVE_FIELDS)))
        for line_number, row in enumerate(reader, start=2):
            try:
                curve.append(
                    int(row["epoch"]),
                    SliceErrors(float(row["alpha"]), float(row["beta"]),
                                float(row["theta"]),
                                float(row["alpha_window"])),
                    float(row["cost"]))
            except (TypeError, ValueError):
                raise ValueError("{}:{}: malformed row".format(
                    path, line_number))
    return curve


def _check_task(model: MLPModel, task: dataset.Task):
    if model.task is not task:
        raise TaskMismatchError("Model was trained for the {} task, not "
                                "{}".format(model.task.value, task.value))


def _raw_outputs(model: MLPModel, inputs: np.ndarray) -> np.ndarray:
    outputs = predict_batch(model, inputs)
    if not np.all(np.abs(outputs) <= 1):
        raise OutputRangeError(
            "Network outputs left [-1, 1]: {}".format(
                outputs[~(np.abs(outputs) <= 1)]))
    return outputs


def predict_naive_batch(model: MLPModel,
                        targets: Sequence[su2.AxisAngle]
                        ) -> List[decompose.XZXAngles]:
    _check_task(model, dataset.Task.NAIVE)
    inputs = np.array([
        dataset.normalize_inputs(dataset.Task.NAIVE,
                                 (t.alpha, t.beta, t.theta), model.jmax)
        for t in targets
    ])
    outputs = _raw_outputs(model, inputs)
    return [
        decompose.XZXAngles.from_array(
            dataset.denormalize_targets(dataset.Task.NAIVE, row, model.jmax))
        for row in outputs
    ]


def predict_naive(model: MLPModel,
                  target: su2.AxisAngle) -> decompose.XZXAngles:
    """x-z-x angles predicted for a target rotation.

    Raises:
        TaskMismatchError: for a corrected-task model.
        OutputRangeError: if an output is outside [-1, 1] or not finite.
    """
    return predict_naive_batch(model, [target])[0]


def _clamp_params(raw: np.ndarray) -> Tuple[supcode.SupcodeParams, bool]:
    clamped = raw.copy()
    clamped[:5] = np.maximum(clamped[:5], 0.0)
    clamped[5] = np.clip(clamped[5], -np.pi, np.pi)
    return supcode.SupcodeParams.from_array(clamped), bool(
        np.any(clamped != raw))


def predict_corrected_batch(model: MLPModel,
                            angles: Sequence[decompose.XZXAngles]
                            ) -> List[Tuple[supcode.SupcodeParams, bool]]:
    _check_task(model, dataset.Task.CORRECTED)
    inputs = np.array([
        dataset.normalize_inputs(dataset.Task.CORRECTED,
                                 dataset.wrap_angles(a.as_array()),
                                 model.jmax) for a in angles
    ])
    outputs = _raw_outputs(model, inputs)
    return [
        _clamp_params(
            dataset.denormalize_targets(dataset.Task.CORRECTED, row,
                                        model.jmax)) for row in outputs
    ]


def predict_corrected(model: MLPModel,
                      angles: decompose.XZXAngles) -> supcode.SupcodeParams:
    """Corrected-sequence parameters predicted for x-z-x angles.

    Exchanges are clamped to j >= 0 and phi6 to [-pi, pi]; a warning is
    issued when that changes the prediction.

    Raises:
        TaskMismatchError: for a naive-task model.
        OutputRangeError: if an output is outside [-1, 1] or not finite.
    """
    params, clamped = predict_corrected_batch(model, [angles])[0]
    if clamped:
        warnings.warn("Prediction for {} clamped into the feasible box: "
                      "{}".format(angles, params))
    return params


def slice_targets(n_points: int = 100
                  ) -> Dict[str, List[su2.AxisAngle]]:
    """The alpha, beta and theta evaluation sweeps."""
    return {
        "alpha": [
            su2.AxisAngle(a, SLICE_BETA, SLICE_THETA)
            for a in np.linspace(-np.pi, 0, n_points)
        ],
        "beta": [
            su2.AxisAngle(SLICE_ALPHA, b, SLICE_THETA)
            for b in np.linspace(0, np.pi, n_points)
        ],
        "theta": [
            su2.AxisAngle(SLICE_ALPHA, SLICE_BETA, t)
            for t in np.linspace(0, 2 * np.pi, n_points)
        ],
    }


def _naive_errors(model: MLPModel,
                  targets: Sequence[su2.AxisAngle]) -> np.ndarray:
    predictions = predict_naive_batch(model, targets)
    return np.array([
        su2.gate_error(decompose.reconstruct(angles), target.unitary())
        for angles, target in zip(predictions, targets)
    ])


def _corrected_errors(model: MLPModel, targets: Sequence[su2.AxisAngle],
                      scoring_noise: float) -> np.ndarray:
    angles = [
        decompose.XZXAngles.from_array(
            dataset.wrap_angles(
                decompose.solve_xzx_with_flag(t).angles.as_array()))
        for t in targets
    ]
    noise = pulsesim.NoisePoint(scoring_noise, scoring_noise)
    errors = []
    for xzx, (params, _) in zip(angles,
                                predict_corrected_batch(model, angles)):
        sequence = supcode.expand_corrected(params, xzx).as_pulse_sequence()
        errors.append(
            su2.gate_error(pulsesim.evolve_sequence(sequence, noise),
                           decompose.reconstruct(xzx)))
    return np.array(errors)


def evaluate_slices(model: MLPModel,
                    n_points: int = 100,
                    scoring_noise: float = 0.01) -> SliceErrors:
    """Mean gate errors of the model's sequences along the three slices.

    Naive models are scored at zero noise; corrected models at the static
    scoring noise dh = de = `scoring_noise`.
    """
    slices = slice_targets(n_points)
    means = {}
    window_mean = float("nan")
    for name, targets in slices.items():
        if model.task is dataset.Task.NAIVE:
            errors = _naive_errors(model, targets)
        else:
            errors = _corrected_errors(model, targets, scoring_noise)
        if name == "alpha":
            alphas = np.array([t.alpha for t in targets])
            inside = np.abs(alphas + np.pi / 2) < SINGULAR_WINDOW
            if np.any(inside):
                window_mean = float(errors[inside].mean())
            errors = errors[~inside]
        means[name] = float(errors.mean())
    return SliceErrors(means["alpha"], means["beta"], means["theta"],
                       window_mean)


def train(model: MLPModel,
          records: Sequence[dataset.TrainingRecord],
          config: Optional[TrainConfig] = None
          ) -> Tuple[MLPModel, LearningCurve]:
    """Trains a copy of `model`; the argument is left untouched.

    Each epoch shuffles the corpus, cuts it into bins of `bin_size` records
    and takes one SGD step per bin on the bin's averaged example.

    Raises:
        TaskMismatchError: if the records belong to the other task.
        TrainingDivergedError: as soon as a parameter is non-finite.
    """
    config = config if config is not None else TrainConfig()
    if records and records[0].task is not model.task:
        raise TaskMismatchError("Corpus task {} does not match model task "
                                "{}".format(records[0].task.value,
                                            model.task.value))
    inputs, targets = dataset.as_arrays(records)
    model = model.copy()
    rng = np.random.default_rng(config.seed)
    curve = LearningCurve()
    n = len(inputs)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.bin_size):
            batch = order[start:start + config.bin_size]
            sgd_step(model, inputs[batch], targets[batch],
                     config.learning_rate)
        model.epochs_trained += 1
        if not model.is_finite():
            raise TrainingDivergedError(epoch)
        if config.evaluates_at(epoch):
            errors = evaluate_slices(model, config.slice_points,
                                     config.scoring_noise)
            cost_value = cost(model, inputs, targets)
            curve.append(epoch, errors, cost_value)
            if config.verbosity:
                logger.info(
                    "epoch %d: slice errors %.3e/%.3e/%.3e (window %.3e), "
                    "cost %.3e", epoch, errors.alpha, errors.beta,
                    errors.theta, errors.alpha_window, cost_value)
    return model, curve


def save_checkpoint(path: Union[str, Path], model: MLPModel,
                    extra: Optional[dict] = None) -> Path:
    """Writes the model as sorted-key JSON."""
    document = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "sizes": list(model.sizes),
        "activation": model.activation,
        "task": model.task.value,
        "jmax": model.jmax,
        "seed": model.seed,
        "epochs": model.epochs_trained,
        "init": "uniform(+-1/sqrt(fan_in))",
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    document.update(extra or {})
    path = Path(path)
    path.write_text(json.dumps(document, sort_keys=True) + "\n")
    return path


def load_checkpoint(path: Union[str, Path]) -> MLPModel:
    """Reads a model written by `save_checkpoint`.

    Raises:
        CheckpointFormatError: if the file is not a valid checkpoint.
    """
    try:
        document = json.loads(Path(path).read_text())
    except ValueError as err:
        raise CheckpointFormatError("{}: not JSON: {}".format(path, err))
    if not isinstance(document, dict) or document.get(
            "format") != CHECKPOINT_FORMAT:
        raise CheckpointFormatError("{}: not a {} checkpoint".format(
            path, CHECKPOINT_FORMAT))
    try:
        model = MLPModel(
            tuple(document["sizes"]),
            [np.array(w, dtype=float) for w in document["weights"]],
            [np.array(b, dtype=float) for b in document["biases"]],
            dataset.Task(document["task"]), float(document["jmax"]),
            document["seed"], int(document["epochs"]),
            document.get("activation", "tanh"))
    except (KeyError, TypeError, ValueError) as err:
        raise CheckpointFormatError("{}: {}".format(path, err))
    if model.activation != "tanh":
        raise CheckpointFormatError("{}: unsupported activation {}".format(
            path, model.activation))
    if not model.is_finite():
        raise CheckpointFormatError("{}: non-finite parameters".format(path))
    return model


@dataclass(frozen=True)
class StudyResult:
    """Final slice-averaged error per seed, with mean and spread."""
    finals: Tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.finals))

    @property
    def spread(self) -> float:
        return float(np.std(self.finals))


def _final_errors(records: Sequence[dataset.TrainingRecord], neurons: int,
                  seeds: Sequence[int], config: TrainConfig) -> StudyResult:
    task = records[0].task
    finals = []
    for seed in seeds:
        model = MLPModel.for_task(task, neurons, seed, records[0].jmax)
        run_config = replace(config, seed=seed, eval_epochs=[config.epochs])
        try:
            _, curve = train(model, records, run_config)
            finals.append(curve.final.mean)
        except TrainingDivergedError as err:
            logger.warning("Seed %d diverged at epoch %d", seed, err.epoch)
            finals.append(math.inf)
    return StudyResult(tuple(finals))


def learning_rate_study(records: Sequence[dataset.TrainingRecord],
                        learning_rates: Sequence[float],
                        seeds: Sequence[int],
                        config: Optional[TrainConfig] = None,
                        neurons: int = 100) -> Dict[float, StudyResult]:
    """Final slice error against learning rate, each over the same seeds."""
    config = config if config is not None else TrainConfig()
    results = {}
    for eta in learning_rates:
        run_config = replace(config, learning_rate=eta)
        results[eta] = _final_errors(records, neurons, seeds, run_config)
        logger.info("eta=%g: %.3e +- %.3e", eta, results[eta].mean,
                    results[eta].spread)
    return results


def capacity_study(records: Sequence[dataset.TrainingRecord],
                   neuron_counts: Sequence[int],
                   seeds: Sequence[int],
                   config: Optional[TrainConfig] = None
                   ) -> Dict[int, StudyResult]:
    """Final slice error against hidden-layer width, over the same seeds."""
    config = config if config is not None else TrainConfig()
    results = {}
    for neurons in neuron_counts:
        results[neurons] = _final_errors(records, neurons, seeds, config)
        logger.info("Nn=%d: %.3e +- %.3e", neurons, results[neurons].mean,
                    results[neurons].spread)
    return results
