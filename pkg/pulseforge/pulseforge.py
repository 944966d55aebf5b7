'''
pulseforge: pulse sequences for singlet-triplet qubit gates

-----

Naive five-piece sequences come from the closed-form x-z-x decomposition,
noise-corrected sequences from bounded least squares, and both can be
learned by a small tanh network trained on a generated corpus.

-----

'''
from dataclasses import dataclass
import json
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union
import warnings

import numpy as np

from pulseforge.control import decompose
from pulseforge.control import pulsesim
from pulseforge.control import supcode
from pulseforge.learning import dataset
from pulseforge.learning import neuralnet
from pulseforge.util import su2

from pulseforge.control.decompose import XZXAngles
from pulseforge.control.pulsesim import NoiseAxis, NoisePoint, PulseSequence
from pulseforge.control.supcode import SupcodeParams, SynthesisConfig
from pulseforge.learning.dataset import Task
from pulseforge.util.su2 import AxisAngle

SEQUENCE_FORMAT = "pulseforge-sequence"

# Rotations used for the naive-vs-corrected noise comparison
COMPARISON_ROTATIONS = (AxisAngle(-1.0, 2.0, 1.0), AxisAngle(-2.0, 2.0, 2.0))


class SequenceFileError(ValueError):
    """Raised when a sequence file cannot be parsed."""


'''
=================
Functions for solving a single gate
=================
'''


@dataclass(frozen=True)
class GateSolution:
    """
    A pulse sequence together with what it is meant to implement

    Parameters
    ----------
    kind : str
        "naive" or "corrected"
    angles : XZXAngles
        The x-z-x angles of the gate; the gate itself is R(x, a)R(z, b)R(x, c)
    sequence : PulseSequence
        The pieces to play, listed with the first-acting piece last
    target : AxisAngle, optional
        The rotation the angles were solved for, when there is one
    singular : bool
        Whether the decomposition sat on its singular set
    params : SupcodeParams, optional
        Corrected-sequence parameters
    gate_error : float
        Zero-noise gate error of `sequence` against the gate

    """
    kind: str
    angles: XZXAngles
    sequence: PulseSequence
    target: Optional[AxisAngle] = None
    singular: bool = False
    params: Optional[SupcodeParams] = None
    gate_error: float = 0.0

    @property
    def gate(self) -> su2.Unitary2:
        return decompose.reconstruct(self.angles)


def _zero_noise_error(sequence: PulseSequence, angles: XZXAngles) -> float:
    return su2.gate_error(pulsesim.evolve_sequence(sequence),
                          decompose.reconstruct(angles))


def _corrected_solution(angles: XZXAngles,
                        params: SupcodeParams,
                        target: Optional[AxisAngle] = None,
                        singular: bool = False) -> GateSolution:
    sequence = supcode.expand_corrected(params, angles).as_pulse_sequence()
    return GateSolution("corrected", angles, sequence, target, singular,
                        params, _zero_noise_error(sequence, angles))


def solve_angles(angles: XZXAngles,
                 corrected: bool = False,
                 config: Optional[SynthesisConfig] = None,
                 target: Optional[AxisAngle] = None,
                 singular: bool = False) -> GateSolution:
    """
    Pulse sequence for a gate given by its x-z-x angles

    Parameters
    ----------
    angles : XZXAngles
        The gate
    corrected : bool
        Synthesize the noise-corrected sequence instead of the naive one
    config : SynthesisConfig, optional
        Solver options for the corrected sequence

    Returns
    -------
    solution : GateSolution

    Raises
    ------
    SynthesisFailedError
        If no corrected sequence converges

    """
    if corrected:
        params = supcode.synthesize(angles, config=config)
        return _corrected_solution(angles, params, target, singular)
    sequence = decompose.expand_five_piece(angles).as_pulse_sequence()
    return GateSolution("naive", angles, sequence, target, singular, None,
                        _zero_noise_error(sequence, angles))


def solve_rotation(alpha: float,
                   beta: float,
                   theta: float,
                   corrected: bool = False,
                   config: Optional[SynthesisConfig] = None) -> GateSolution:
    """
    Pulse sequence for the rotation by `theta` about the axis at polar angle
    `beta` and azimuth `alpha`

    Examples
    --------

    >>> solution = solve_rotation(-np.pi / 4, 2 * np.pi / 3, np.pi / 2)
    >>> [piece.J for piece in solution.sequence.pieces]
    [0.0, 1.0, 0.0, 1.0, 0.0]

    """
    target = AxisAngle(alpha, beta, theta)
    if not target.in_sampling_domain():
        warnings.warn("{} lies outside the sampled domain".format(target))
    solution = decompose.solve_xzx_with_flag(target)
    if solution.singular:
        warnings.warn("{} is a singular point of the decomposition".format(
            target))
    return solve_angles(solution.angles, corrected, config, target,
                        solution.singular)


def predict_gate(model: neuralnet.MLPModel,
                 target: AxisAngle) -> GateSolution:
    """Sequence proposed by a trained network for `target`.

    Corrected-task models are fed the x-z-x angles of the target.
    """
    if model.task is Task.NAIVE:
        angles = neuralnet.predict_naive(model, target)
        sequence = decompose.expand_five_piece(angles).as_pulse_sequence()
        error = su2.gate_error(pulsesim.evolve_sequence(sequence),
                               target.unitary())
        return GateSolution("naive", angles, sequence, target, False, None,
                            error)
    exact = decompose.solve_xzx_with_flag(target)
    angles = XZXAngles.from_array(dataset.wrap_angles(
        exact.angles.as_array()))
    params = neuralnet.predict_corrected(model, angles)
    return _corrected_solution(angles, params, target, exact.singular)


'''
=================
Functions for noise comparisons
=================
'''


def compare_noise(target: Union[AxisAngle, XZXAngles],
                  config: Optional[SynthesisConfig] = None,
                  grid: Sequence[float] = supcode.ROBUSTNESS_GRID
                  ) -> Tuple[GateSolution, supcode.RobustnessReport]:
    """
    Synthesizes the corrected sequence for `target` and sweeps it, and the
    naive sequence, along both static noise axes

    Returns
    -------
    solution : GateSolution
        The corrected sequence
    report : RobustnessReport
        Slopes, crossovers and the raw sweeps keyed by noise axis

    """
    config = config if config is not None else SynthesisConfig()
    if isinstance(target, AxisAngle):
        solution = solve_rotation(target.alpha, target.beta, target.theta,
                                  True, config)
    else:
        solution = solve_angles(target, True, config)
    report = supcode.robustness_report(solution.params, solution.angles,
                                       config.coupling, grid)
    return solution, report


'''
=================
Sequence files
=================
'''


def sequence_document(solution: GateSolution) -> dict:
    """JSON-ready description of a solution; angles in radians, exchanges in
    units of h."""
    document = {
        "format": SEQUENCE_FORMAT,
        "kind": solution.kind,
        "target": None,
        "angles": dict(zip(dataset.NAIVE_TARGET_FIELDS,
                           solution.angles.as_array().tolist())),
        "singular": solution.singular,
        "params": None,
        "gate_error": solution.gate_error,
        "total_duration": solution.sequence.total_duration,
        "pieces": [{
            "J": piece.J,
            "phi": piece.phi,
            "duration": piece.duration
        } for piece in solution.sequence.pieces],
    }
    if solution.target is not None:
        document["target"] = {
            "alpha": solution.target.alpha,
            "beta": solution.target.beta,
            "theta": solution.target.theta
        }
    if solution.params is not None:
        document["params"] = dict(
            zip(supcode.PARAM_NAMES, solution.params.as_array().tolist()))
    return document


def write_sequence_file(path: Union[str, Path],
                        solution: GateSolution) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps(sequence_document(solution), indent=2, sort_keys=True) +
        "\n")
    return path


def read_sequence_file(path: Union[str, Path]) -> GateSolution:
    """
    Reads a file written by `write_sequence_file`

    Raises
    ------
    SequenceFileError
        If the file is not JSON or misses a required field

    """
    try:
        document = json.loads(Path(path).read_text())
    except ValueError as err:
        raise SequenceFileError("{}: not JSON: {}".format(path, err))
    if not isinstance(document, dict) or document.get(
            "format") != SEQUENCE_FORMAT:
        raise SequenceFileError("{}: not a {} file".format(
            path, SEQUENCE_FORMAT))
    try:
        angles = XZXAngles(**document["angles"])
        sequence = pulsesim.PulseSequence(
            tuple(pulsesim.Piece(float(p["J"]), float(p["phi"]))
                  for p in document["pieces"]), document["kind"])
        target = (AxisAngle(**document["target"])
                  if document.get("target") else None)
        params = (SupcodeParams(**document["params"])
                  if document.get("params") else None)
        return GateSolution(document["kind"], angles, sequence, target,
                            bool(document.get("singular", False)), params,
                            float(document.get("gate_error", 0.0)))
    except (KeyError, TypeError, ValueError) as err:
        raise SequenceFileError("{}: {}".format(path, err))


def sweep_solution(solution: GateSolution,
                   axis: NoiseAxis,
                   grid: Sequence[float] = supcode.ROBUSTNESS_GRID,
                   coupling: pulsesim.ChargeCoupling = pulsesim.
                   ChargeCoupling.PROPORTIONAL):
    """Gate error of a solution's sequence against its gate along one axis."""
    return pulsesim.noise_sweep(solution.sequence, axis, np.asarray(grid),
                                solution.gate, coupling)
