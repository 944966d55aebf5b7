"""x-z-x decomposition of arbitrary rotations into five-piece exchange pulses.

A target rotation is written as R(x, phi_a) R(z, phi_b) R(x, phi_c) up to a
global phase. Since R(z, phi) = -R(x+z, pi) R(x, phi) R(x+z, pi), the same
operator is produced by the five square pulses

    (J=0, phi_a) (J=1, pi) (J=0, phi_b) (J=1, pi) (J=0, phi_c)

with the rightmost piece acting first.
"""

from dataclasses import dataclass
from enum import Enum
import itertools
import logging
from typing import List, Optional, Sequence, Tuple, Union
import warnings

import numpy as np
from scipy.optimize import least_squares

from pulseforge.control import pulsesim
from pulseforge.util import su2

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
FOUR_PI = 4 * np.pi

# sin(phi_b/2) or cos(phi_b/2) below this leaves a half-angle undetermined
SINGULAR_ATOL = 1e-12

RECONSTRUCTION_TOL = 1e-10

Target = Union[su2.AxisAngle, su2.Unitary2, np.ndarray]


def canonicalize(angle: float) -> float:
    """Reduces an angle into [0, 4 pi). Exact on operators: R(n, 4 pi) = I."""
    reduced = float(np.mod(angle, FOUR_PI))
    if reduced >= FOUR_PI:
        # np.mod of a tiny negative number rounds up to 4 pi
        reduced = 0.0
    return reduced


def to_signed(angle: float) -> float:
    """Representative of a [0, 4 pi) angle in (-2 pi, 2 pi]."""
    angle = canonicalize(angle)
    return angle - FOUR_PI if angle > TWO_PI else angle


def wrap_angles(angles: Sequence[float]) -> np.ndarray:
    """Angles reduced into [0, 2 pi). Exact up to sign: R(n, 2 pi) = -I."""
    wrapped = np.mod(np.asarray(angles, dtype=float), TWO_PI)
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


@dataclass(frozen=True)
class XZXAngles:
    """Auxiliary angles of the x-z-x decomposition, each kept in [0, 4 pi)."""
    phi_a: float
    phi_b: float
    phi_c: float

    def __post_init__(self):
        for name in ("phi_a", "phi_b", "phi_c"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError("{} must be finite, got {}".format(
                    name, value))
            object.__setattr__(self, name, canonicalize(value))

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "XZXAngles":
        phi_a, phi_b, phi_c = (float(v) for v in values)
        return cls(phi_a, phi_b, phi_c)

    def as_array(self) -> np.ndarray:
        return np.array([self.phi_a, self.phi_b, self.phi_c])


def representatives(angles: XZXAngles) -> List[XZXAngles]:
    """The eight angle triples equal to `angles` up to global sign.

    Each angle is wrapped into [0, 2 pi) and then optionally shifted by
    2 pi. All of them reconstruct the same gate, but the J = 0 pieces last
    longer after a shift, so their hyperfine sensitivity differs. The
    unshifted triple comes first.
    """
    base = wrap_angles(angles.as_array())
    return [
        XZXAngles.from_array(base + TWO_PI * np.array(shift))
        for shift in itertools.product((0, 1), repeat=3)
    ]


@dataclass(frozen=True)
class XZXSolution:
    angles: XZXAngles
    # True when one half-angle was free and pinned to zero
    singular: bool = False
    # Gate error of the five-piece reconstruction against the target
    error: float = 0.0


class AxisTag(Enum):
    """Rotation axis of a five-piece pulse element and the exchange it needs.
    """
    X = "x"
    X_PLUS_Z = "x+z"

    @property
    def exchange(self) -> float:
        return 0.0 if self is AxisTag.X else 1.0


@dataclass(frozen=True)
class FivePieceSequence:
    pieces: Tuple[Tuple[AxisTag, float], ...]

    def __post_init__(self):
        tags = tuple(tag for tag, _ in self.pieces)
        if tags != FIVE_PIECE_PATTERN:
            raise ValueError("Five-piece pulses follow the axis pattern {}, "
                             "got {}".format(FIVE_PIECE_PATTERN, tags))

    @property
    def durations(self) -> np.ndarray:
        return self.as_pulse_sequence().durations

    @property
    def total_duration(self) -> float:
        return self.as_pulse_sequence().total_duration

    def as_pulse_sequence(self, label: str = "naive") -> pulsesim.PulseSequence:
        return pulsesim.PulseSequence.from_arrays(
            [tag.exchange for tag, _ in self.pieces],
            [phi for _, phi in self.pieces],
            label=label)


FIVE_PIECE_PATTERN = (AxisTag.X, AxisTag.X_PLUS_Z, AxisTag.X,
                      AxisTag.X_PLUS_Z, AxisTag.X)


def target_quaternion(target: Target) -> np.ndarray:
    """(w, x, y, z) with target = e^{i chi} (w I - i (x, y, z).sigma).

    An `AxisAngle` maps to (cos(theta/2), sin(theta/2) n) without any sign
    flip, so the quaternion is continuous in (alpha, beta, theta).
    """
    if isinstance(target, su2.AxisAngle):
        half = target.theta / 2
        return np.concatenate([[np.cos(half)], np.sin(half) * target.axis])
    matrix = target.matrix if isinstance(target, su2.Unitary2) else np.asarray(
        target, dtype=complex)
    special = matrix / np.sqrt(np.linalg.det(matrix))
    return np.array([
        special[0, 0].real,
        -special[0, 1].imag,
        special[1, 0].real,
        -special[0, 0].imag,
    ])


def _target_matrix(target: Target) -> np.ndarray:
    if isinstance(target, su2.AxisAngle):
        return target.unitary().matrix
    if isinstance(target, su2.Unitary2):
        return target.matrix
    return np.asarray(target, dtype=complex)


def reconstruct(angles: XZXAngles) -> su2.Unitary2:
    """R(x, phi_a) R(z, phi_b) R(x, phi_c)."""
    x_axis, z_axis = np.array([1.0, 0, 0]), np.array([0, 0, 1.0])
    return (su2.rotation(x_axis, angles.phi_a) @
            su2.rotation(z_axis, angles.phi_b) @
            su2.rotation(x_axis, angles.phi_c))


def solve_xzx_with_flag(target: Target) -> XZXSolution:
    """Closed-form x-z-x angles together with the singularity flag.

    With half-angles B = phi_b/2, S = (phi_a + phi_c)/2 and
    D = (phi_a - phi_c)/2 the product has quaternion
    (cos B cos S, cos B sin S, -sin B sin D, sin B cos D), which is inverted
    on the branch B in [0, pi/2].
    """
    w, x, y, z = target_quaternion(target)
    cos_b, sin_b = np.hypot(w, x), np.hypot(y, z)
    half_b = np.arctan2(sin_b, cos_b)
    half_s = np.arctan2(x, w)
    half_d = np.arctan2(-y, z)

    singular = False
    if sin_b < SINGULAR_ATOL:
        half_d, singular = 0.0, True
    if cos_b < SINGULAR_ATOL:
        half_s, singular = 0.0, True

    angles = XZXAngles(half_s + half_d, 2 * half_b, half_s - half_d)
    error = su2.gate_error(reconstruct(angles), _target_matrix(target))
    if singular:
        logger.debug("Singular decomposition for %s, free angle set to 0",
                     target)
    return XZXSolution(angles, singular=singular, error=error)


def solve_xzx(target: Target) -> XZXAngles:
    """Returns the x-z-x angles of `target`.

    Args:
        target: an `AxisAngle` or any 2x2 unitary.

    Returns:
        The canonical (each angle in [0, 4 pi)) angles. At a singular target
        the free half-angle is set to 0 and a warning is issued; use
        `solve_xzx_with_flag` to get the flag programmatically.
    """
    solution = solve_xzx_with_flag(target)
    if solution.singular:
        warnings.warn("Target {} is a singular point of the x-z-x "
                      "decomposition; returning the canonical "
                      "representative".format(target))
    return solution.angles


def _five_piece_matrix(params: np.ndarray) -> np.ndarray:
    phi_a, phi_b, phi_c = params
    return pulsesim.sequence_matrix(
        np.array([0.0, 1.0, 0.0, 1.0, 0.0]),
        np.array([phi_a, np.pi, phi_b, np.pi, phi_c]))


def solve_xzx_numeric(target: Target,
                      n_starts: int = 20,
                      rng: Optional[np.random.Generator] = None,
                      tol: float = 1e-12) -> XZXSolution:
    """Least-squares solve of the five-piece pulse equations themselves.

    Matches the (0,0), (0,1) and (1,0) entries of the five-piece evolution to
    the target with no global phase freedom (six real equations), from
    random starts in [0, 4 pi)^3. Used to cross-check the closed form.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    target_matrix = su2.strip_phase(_target_matrix(target))
    entries = [(0, 0), (0, 1), (1, 0)]

    def residual(params):
        diff = _five_piece_matrix(params) - target_matrix
        values = np.array([diff[i, j] for i, j in entries])
        return np.concatenate([values.real, values.imag])

    best = None
    for start in range(n_starts):
        fit = least_squares(residual,
                            rng.uniform(0, FOUR_PI, size=3),
                            bounds=(0, FOUR_PI),
                            method="trf",
                            xtol=1e-15,
                            ftol=1e-15,
                            gtol=1e-15)
        if best is None or fit.cost < best.cost:
            best = fit
        if np.max(np.abs(fit.fun)) < tol:
            logger.debug("Numeric x-z-x solve converged after %d starts",
                         start + 1)
            break

    angles = XZXAngles.from_array(best.x)
    return XZXSolution(angles,
                       singular=False,
                       error=su2.gate_error(_five_piece_matrix(best.x),
                                            target_matrix))


def expand_five_piece(angles: XZXAngles) -> FivePieceSequence:
    return FivePieceSequence((
        (AxisTag.X, angles.phi_a),
        (AxisTag.X_PLUS_Z, np.pi),
        (AxisTag.X, angles.phi_b),
        (AxisTag.X_PLUS_Z, np.pi),
        (AxisTag.X, angles.phi_c),
    ))


def signed_angles(angles: XZXAngles) -> np.ndarray:
    """The angles as representatives in (-2 pi, 2 pi].

    For targets solved by `solve_xzx` these are S + D, 2 B and S - D
    themselves, which vary continuously over the sampling domain away from
    the singular set. This is the form a regression model learns.
    """
    return np.array([to_signed(value) for value in angles.as_array()])


def naive_sequence(target: Target) -> pulsesim.PulseSequence:
    """Five-piece pulse realizing `target`."""
    return expand_five_piece(solve_xzx(target)).as_pulse_sequence()
