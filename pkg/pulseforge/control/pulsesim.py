"""Evolution of piecewise-constant exchange pulses under static noise.

A piece (J, phi) evolves for phi / sqrt(1 + J^2) (units of 1/h, h = 1) under
H = (1 + dh) sigma_x / 2 + (J + dJ) sigma_z / 2, where dh is the hyperfine
(Overhauser) shift and dJ the exchange shift produced by a detuning error de.

Sequences are listed in operator notation: the rightmost piece acts first,
so the evolution operator is the left-to-right matrix product of the pieces.
"""

import csv
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from pulseforge.util import su2

logger = logging.getLogger(__name__)

SWEEP_CSV_FIELDS = ("noise_value", "gate_error", "sequence_id")

# Default decade used to read off log-log slopes of gate error vs noise.
SLOPE_WINDOW = (1e-3, 1e-2)


class NoiseAxis(Enum):
    """Which static noise a sweep varies."""
    HYPERFINE = "dh"
    CHARGE = "de"


class ChargeCoupling(Enum):
    """How a detuning error de shifts the exchange of a piece.

    PROPORTIONAL follows from an exponential J(epsilon): dJ = J de, so pieces
    with J = 0 carry no charge noise. CONSTANT applies dJ = de to every piece
    with J > 0.
    """
    PROPORTIONAL = "proportional"
    CONSTANT = "constant"


class InvalidSequenceError(ValueError):
    """Raised when a pulse piece has a negative or non-finite parameter."""


@dataclass(frozen=True)
class NoisePoint:
    dh: float = 0.0
    de: float = 0.0

    @classmethod
    def along(cls, axis: NoiseAxis, value: float) -> "NoisePoint":
        if axis is NoiseAxis.HYPERFINE:
            return cls(dh=value)
        return cls(de=value)


ZERO_NOISE = NoisePoint()


@dataclass(frozen=True)
class Piece:
    """One square exchange pulse: exchange `J` (units of h) and nominal
    rotation angle `phi` (rad)."""
    J: float
    phi: float

    @property
    def duration(self) -> float:
        return self.phi / np.sqrt(1 + self.J**2)


@dataclass(frozen=True)
class PulseSequence:
    pieces: Tuple[Piece, ...]
    # Free-form identifier carried into sweep CSVs
    label: str = ""

    def __post_init__(self):
        pieces = tuple(self.pieces)
        for index, piece in enumerate(pieces):
            if not (np.isfinite(piece.J) and np.isfinite(piece.phi)):
                raise InvalidSequenceError(
                    "Piece {} is not finite: {}".format(index, piece))
            if piece.J < 0 or piece.phi < 0:
                raise InvalidSequenceError(
                    "Piece {} has negative exchange or angle: {}".format(
                        index, piece))
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def from_arrays(cls,
                    exchanges: Sequence[float],
                    angles: Sequence[float],
                    label: str = "") -> "PulseSequence":
        return cls(tuple(
            Piece(float(j), float(phi)) for j, phi in zip(exchanges, angles)),
                   label=label)

    def __len__(self):
        return len(self.pieces)

    @property
    def exchanges(self) -> np.ndarray:
        return np.array([piece.J for piece in self.pieces], dtype=float)

    @property
    def angles(self) -> np.ndarray:
        return np.array([piece.phi for piece in self.pieces], dtype=float)

    @property
    def durations(self) -> np.ndarray:
        return self.angles / np.sqrt(1 + self.exchanges**2)

    @property
    def total_duration(self) -> float:
        return float(self.durations.sum())

    def concat(self, other: "PulseSequence") -> "PulseSequence":
        """Operator product self * other: `other` is applied first."""
        return PulseSequence(self.pieces + other.pieces, label=self.label)

    def profile(self) -> Tuple[np.ndarray, np.ndarray]:
        """Time-ordered step profile J(t).

        Returns:
            (edges, exchanges): `edges` has one more entry than `exchanges`;
            piece k occupies [edges[k], edges[k+1]).
        """
        in_time_order = self.pieces[::-1]
        durations = np.array([piece.duration for piece in in_time_order])
        edges = np.concatenate([[0.0], np.cumsum(durations)])
        return edges, np.array([piece.J for piece in in_time_order])


def _charge_couplings(exchanges: np.ndarray,
                      coupling: ChargeCoupling) -> np.ndarray:
    if coupling is ChargeCoupling.PROPORTIONAL:
        return exchanges
    return (exchanges > 0).astype(float)


def _generator_vectors(exchanges: np.ndarray, angles: np.ndarray,
                       noise: NoisePoint,
                       coupling: ChargeCoupling) -> np.ndarray:
    durations = angles / np.sqrt(1 + exchanges**2)
    vectors = np.zeros(exchanges.shape + (3, ))
    vectors[..., 0] = durations * (1 + noise.dh)
    vectors[..., 2] = durations * (
        exchanges + _charge_couplings(exchanges, coupling) * noise.de)
    return vectors


def _ordered_product(matrices: np.ndarray) -> np.ndarray:
    result = np.eye(2, dtype=complex)
    for matrix in matrices:
        result = result @ matrix
    return result


def piece_matrices(exchanges: np.ndarray,
                   angles: np.ndarray,
                   noise: NoisePoint = ZERO_NOISE,
                   coupling: ChargeCoupling = ChargeCoupling.PROPORTIONAL
                   ) -> np.ndarray:
    """Unvalidated, vectorized piece propagators, shape (n, 2, 2)."""
    return su2.exp_pauli(
        _generator_vectors(np.asarray(exchanges, dtype=float),
                           np.asarray(angles, dtype=float), noise, coupling))


def sequence_matrix(exchanges: np.ndarray,
                    angles: np.ndarray,
                    noise: NoisePoint = ZERO_NOISE,
                    coupling: ChargeCoupling = ChargeCoupling.PROPORTIONAL
                    ) -> np.ndarray:
    """Raw 2x2 evolution of a piece list, for inner loops."""
    return _ordered_product(piece_matrices(exchanges, angles, noise, coupling))


def evolve_piece(J: float,
                 phi: float,
                 noise: NoisePoint = ZERO_NOISE,
                 coupling: ChargeCoupling = ChargeCoupling.PROPORTIONAL
                 ) -> su2.Unitary2:
    """Evolution operator of a single square pulse."""
    if J < 0 or phi < 0:
        raise InvalidSequenceError(
            "Exchange and angle must be non-negative, got J={}, phi={}".format(
                J, phi))
    return su2.Unitary2(
        piece_matrices(np.array([J]), np.array([phi]), noise, coupling)[0])


def evolve_sequence(seq: PulseSequence,
                    noise: NoisePoint = ZERO_NOISE,
                    coupling: ChargeCoupling = ChargeCoupling.PROPORTIONAL
                    ) -> su2.Unitary2:
    """Evolution operator of the whole sequence (empty sequence -> I)."""
    if not len(seq):
        return su2.Unitary2.identity()
    return su2.Unitary2(
        sequence_matrix(seq.exchanges, seq.angles, noise, coupling))


def sequence_derivatives(exchanges: np.ndarray,
                         angles: np.ndarray,
                         coupling: ChargeCoupling = ChargeCoupling.PROPORTIONAL
                         ) -> np.ndarray:
    """Exact first-order noise sensitivities at zero noise.

    For W = P_0 P_1 ... P_{n-1}, returns the Pauli coordinates g of
    W^dag dW/d(noise) = -i g.sigma / 2 for dh (row 0) and de (row 1).
    The product rule reduces to sum_i R_i^dag P_i^dag dP_i R_i with
    R_i = P_{i+1} ... P_{n-1}.
    """
    exchanges = np.asarray(exchanges, dtype=float)
    angles = np.asarray(angles, dtype=float)
    vectors = _generator_vectors(exchanges, angles, ZERO_NOISE, coupling)
    pieces = su2.exp_pauli(vectors)
    partials = su2.exp_pauli_derivative(vectors)
    durations = angles / np.sqrt(1 + exchanges**2)
    charge = _charge_couplings(exchanges, coupling)

    # dP_i/d(dh) = dU/dv_x t_i ; dP_i/d(de) = dU/dv_z t_i c_i
    d_pieces = np.stack([
        partials[:, 0] * durations[:, None, None],
        partials[:, 2] * (durations * charge)[:, None, None],
    ])

    generators = np.zeros((2, 2, 2), dtype=complex)
    suffix = np.eye(2, dtype=complex)
    for i in range(len(exchanges) - 1, -1, -1):
        local = pieces[i].conj().T @ d_pieces[:, i]
        generators += suffix.conj().T @ local @ suffix
        suffix = pieces[i] @ suffix
    return np.real(1j * np.einsum("nij,kji->nk", generators, su2.PAULIS))


def noise_sweep(seq: PulseSequence,
                axis: NoiseAxis,
                grid: Iterable[float],
                target: Union[su2.Unitary2, np.ndarray],
                coupling: ChargeCoupling = ChargeCoupling.PROPORTIONAL
                ) -> List[Tuple[float, float]]:
    """Gate error against `target` along one noise axis, the other held at 0.
    """
    target_matrix = target.matrix if isinstance(target,
                                                su2.Unitary2) else target
    exchanges, angles = seq.exchanges, seq.angles
    results = []
    for value in grid:
        realized = sequence_matrix(exchanges, angles,
                                   NoisePoint.along(axis, float(value)),
                                   coupling)
        results.append((float(value), su2.gate_error(realized,
                                                     target_matrix)))
    return results


def log_grid(low: float = 1e-3, high: float = 1e-1, num: int = 21) -> np.ndarray:
    return np.logspace(np.log10(low), np.log10(high), num)


def loglog_slope(points: Sequence[Tuple[float, float]],
                 window: Tuple[float, float] = SLOPE_WINDOW) -> float:
    """Least-squares slope of log(gate error) vs log(|noise|) inside `window`.
    """
    selected = [(abs(noise), error) for noise, error in points
                if window[0] <= abs(noise) <= window[1] and error > 0]
    if len(selected) < 2:
        raise ValueError("Need at least two positive points inside {} to fit "
                         "a slope, got {}".format(window, len(selected)))
    log_noise, log_error = np.log10(np.array(selected)).T
    slope, _ = np.polyfit(log_noise, log_error, 1)
    return float(slope)


def crossover_amplitude(corrected: Sequence[Tuple[float, float]],
                        naive: Sequence[Tuple[float, float]]
                        ) -> Optional[float]:
    """Smallest |noise| on a shared grid where the corrected sequence stops
    beating the naive one. None if it wins everywhere on the grid."""
    naive_lookup = dict(naive)
    for noise, error in sorted(corrected, key=lambda item: abs(item[0])):
        if noise in naive_lookup and error >= naive_lookup[noise]:
            return abs(noise)
    return None


def write_sweep_csv(path: Union[str, Path],
                    sweeps: Dict[str, Sequence[Tuple[float, float]]]) -> Path:
    """Writes sweeps keyed by sequence id to one CSV."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_CSV_FIELDS)
        for sequence_id, points in sweeps.items():
            for noise, error in points:
                writer.writerow([repr(float(noise)), repr(float(error)),
                                 sequence_id])
    return path


def read_sweep_csv(path: Union[str, Path]
                   ) -> Dict[str, List[Tuple[float, float]]]:
    sweeps: Dict[str, List[Tuple[float, float]]] = OrderedDict()
    with Path(path).open(newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != SWEEP_CSV_FIELDS:
            raise ValueError("{}: expected header {}, got {}".format(
                path, ",".join(SWEEP_CSV_FIELDS), reader.fieldnames))
        for line_number, row in enumerate(reader, start=2):
            try:
                point = (float(row["noise_value"]), float(row["gate_error"]))
            except (TypeError, ValueError):
                raise ValueError("{}:{}: malformed row {}".format(
                    path, line_number, row))
            sweeps.setdefault(row["sequence_id"], []).append(point)
    return sweeps
