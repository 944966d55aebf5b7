"""Exact 2x2 complex linear algebra for single-qubit control.

Rotations follow the convention R(n, angle) = exp(-i angle n.sigma / 2), so
that h and J enter the control Hamiltonian as coefficients of +sigma_x and
+sigma_z. Global phases are never meaningful here: every comparison between
two operators is projective.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

IDENTITY = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([PAULI_X, PAULI_Y, PAULI_Z])

UNITARY_ATOL = 1e-12
AXIS_NORM_ATOL = 1e-9


class NonUnitAxisError(ValueError):
    """Raised when a rotation axis does not have unit norm."""


class NotUnitaryError(ValueError):
    """Raised when a matrix handed to `Unitary2` is not unitary."""


@dataclass(frozen=True)
class Unitary2:
    """A 2x2 unitary operator, immutable after construction."""
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (2, 2):
            raise NotUnitaryError("Expected a 2x2 matrix, got shape {}".format(
                matrix.shape))
        if not np.allclose(matrix.conj().T @ matrix, IDENTITY, rtol=0,
                           atol=UNITARY_ATOL):
            raise NotUnitaryError("Matrix is not unitary: {}".format(matrix))
        if abs(abs(np.linalg.det(matrix)) - 1) > UNITARY_ATOL:
            raise NotUnitaryError("|det U| != 1 for {}".format(matrix))
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def identity(cls) -> "Unitary2":
        return cls(IDENTITY)

    def dagger(self) -> "Unitary2":
        return Unitary2(self.matrix.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    def with_phase(self, phase: float) -> "Unitary2":
        return Unitary2(np.exp(1j * phase) * self.matrix)

    def __matmul__(self, other: "Unitary2") -> "Unitary2":
        return Unitary2(self.matrix @ other.matrix)

    def __eq__(self, other):
        if not isinstance(other, Unitary2):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    __hash__ = None  # type: ignore


@dataclass(frozen=True)
class AxisAngle:
    """Target rotation on the Bloch sphere.

    `alpha` and `beta` place the axis at
    (cos(alpha) sin(beta), sin(alpha) sin(beta), cos(beta)) and `theta` is the
    rotation angle. The sampling domain is alpha in [-pi, 0],
    beta in [0, pi] and theta in [0, 2 pi].
    """
    alpha: float
    beta: float
    theta: float

    @property
    def axis(self) -> np.ndarray:
        return axis_from_angles(self.alpha, self.beta)

    def in_sampling_domain(self, atol: float = 1e-12) -> bool:
        return (-np.pi - atol <= self.alpha <= atol
                and -atol <= self.beta <= np.pi + atol
                and -atol <= self.theta <= 2 * np.pi + atol)

    def unitary(self) -> Unitary2:
        return rotation(self.axis, self.theta)


def axis_from_angles(alpha: float, beta: float) -> np.ndarray:
    return np.array([
        np.cos(alpha) * np.sin(beta),
        np.sin(alpha) * np.sin(beta),
        np.cos(beta),
    ])


def exp_pauli(vector: np.ndarray) -> np.ndarray:
    """Closed-form exp(-i v.sigma / 2) for real 3-vectors.

    Vectorized over any leading axes: an input of shape (..., 3) returns an
    array of shape (..., 2, 2). The rotation angle is |v| and the axis v/|v|;
    v = 0 gives the identity.
    """
    vector = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(vector, axis=-1)
    half = norm / 2
    # sin(|v|/2)/|v| with its finite limit 1/2 at v = 0
    safe = np.where(norm > 0, norm, 1.0)
    sinc = np.where(norm > 0, np.sin(half) / safe, 0.5)
    cos = np.cos(half)
    vx, vy, vz = vector[..., 0], vector[..., 1], vector[..., 2]
    out = np.empty(vector.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = cos - 1j * sinc * vz
    out[..., 0, 1] = -sinc * vy - 1j * sinc * vx
    out[..., 1, 0] = sinc * vy - 1j * sinc * vx
    out[..., 1, 1] = cos + 1j * sinc * vz
    return out


def exp_pauli_derivative(vector: np.ndarray) -> np.ndarray:
    """Exact partial derivatives of `exp_pauli` with respect to v_k.

    Returns shape (..., 3, 2, 2) where index k of the third-from-last axis
    holds d exp(-i v.sigma/2) / d v_k.
    """
    vector = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(vector, axis=-1)
    safe = np.where(norm > 0, norm, 1.0)
    half = norm / 2
    cos = np.cos(half)
    # s(r) = sin(r/2)/r and its radial derivative divided by r,
    # (cos(r/2)/2 - s) / r**2, both with their r -> 0 limits.
    s = np.where(norm > 0, np.sin(half) / safe, 0.5)
    ds_over_r = np.where(norm > 1e-4, (cos / 2 - s) / safe**2,
                         -1.0 / 24 + norm**2 / 960)
    # U = cos(r/2) I - i s(r) v.sigma
    # dU/dv_k = -(s v_k / 2) I - i (ds_over_r v_k) v.sigma - i s sigma_k
    v_sigma = np.einsum("...i,ijk->...jk", vector, PAULIS)
    out = np.empty(vector.shape[:-1] + (3, 2, 2), dtype=complex)
    for k in range(3):
        vk = vector[..., k][..., None, None]
        out[..., k, :, :] = (-(s[..., None, None] * vk / 2) * IDENTITY
                             - 1j * ds_over_r[..., None, None] * vk * v_sigma
                             - 1j * s[..., None, None] * PAULIS[k])
    return out


def rotation(axis: np.ndarray, angle: float) -> Unitary2:
    """Returns R(axis, angle) = exp(-i angle axis.sigma / 2).

    Raises:
        NonUnitAxisError: if |axis| differs from 1 by more than 1e-9.
    """
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1) > AXIS_NORM_ATOL:
        raise NonUnitAxisError("Rotation axis must be a unit 3-vector, got "
                               "{}".format(axis))
    return Unitary2(exp_pauli(angle * axis))


def _as_matrix(u: Union[Unitary2, np.ndarray]) -> np.ndarray:
    return u.matrix if isinstance(u, Unitary2) else np.asarray(u)


def gate_error(u: Union[Unitary2, np.ndarray],
               v: Union[Unitary2, np.ndarray]) -> float:
    """Bloch-sphere averaged gate error between the realized `u` and target `v`.

    Closed form of 1 - mean |<psi|V^dag U|psi>|^2 over uniformly distributed
    pure states: 1 - (|Tr(V^dag U)|^2 + 2) / 6. Lies in [0, 2/3].
    """
    overlap = _as_matrix(v).conj().T @ _as_matrix(u)
    special = overlap / np.sqrt(np.linalg.det(overlap))
    # 4 - |Tr|^2 = 4 sin^2(angle/2), taken from the Pauli part so that tiny
    # errors keep full relative precision
    sin_axis = np.real(0.5j * np.einsum("ij,kji->k", special, PAULIS))
    return float(min(max(2 * np.dot(sin_axis, sin_axis) / 3, 0.0), 2 / 3))


def random_bloch_states(n_states: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure qubit states, shape (n_states, 2)."""
    raw = rng.normal(size=(n_states, 2)) + 1j * rng.normal(size=(n_states, 2))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def gate_error_monte_carlo(u: Union[Unitary2, np.ndarray],
                           v: Union[Unitary2, np.ndarray],
                           n_states: int = 100000,
                           rng: Optional[np.random.Generator] = None
                           ) -> Tuple[float, float]:
    """Direct state-averaged estimate of the gate error.

    Returns:
        (estimate, standard error of the estimate)
    """
    rng = rng if rng is not None else np.random.default_rng()
    states = random_bloch_states(n_states, rng)
    overlap_op = _as_matrix(v).conj().T @ _as_matrix(u)
    amplitudes = np.einsum("ni,ij,nj->n", states.conj(), overlap_op, states)
    infidelities = 1 - np.abs(amplitudes)**2
    return (float(infidelities.mean()),
            float(infidelities.std(ddof=1) / np.sqrt(n_states)))


def strip_phase(u: Union[Unitary2, np.ndarray]) -> np.ndarray:
    """Rescales `u` to determinant one, choosing the root with Re Tr >= 0."""
    matrix = _as_matrix(u)
    special = matrix / np.sqrt(np.linalg.det(matrix))
    if np.trace(special).real < 0:
        special = -special
    return special


def su2_log_components(u: Union[Unitary2, np.ndarray],
                       return_branch_flag: bool = False
                       ) -> Union[np.ndarray, Tuple[np.ndarray, bool]]:
    """Pauli coordinates c of the minimal-norm logarithm of `u`.

    `u` = e^{i chi} exp(-i c.sigma / 2) with |c| in [0, pi]. The vector is zero
    iff `u` is proportional to the identity, -I included.

    When |c| = pi, c and -c describe the same operator up to phase. The axis is
    then oriented so its first non-negligible component is positive and the
    branch flag is raised.

    Args:
        u: a unitary operator.
        return_branch_flag: If True, returns (components, ambiguous) instead.
    """
    special = strip_phase(u)
    cos_half = min(float(np.trace(special).real) / 2, 1.0)
    # sin(angle/2) n_k = Re(i Tr(U sigma_k) / 2)
    sin_axis = np.real(0.5j * np.einsum("ij,kji->k", special, PAULIS))
    sin_half = float(np.linalg.norm(sin_axis))
    angle = 2 * np.arctan2(sin_half, cos_half)

    ambiguous = cos_half < 1e-12
    if sin_half == 0:
        # strip_phase maps -I to I
        components = np.zeros(3)
    else:
        axis = sin_axis / sin_half
        if ambiguous:
            leading = axis[np.flatnonzero(np.abs(axis) > 1e-12)[0]]
            axis = axis * np.sign(leading)
        components = angle * axis

    if return_branch_flag:
        return components, bool(ambiguous)
    return components


def phase_equivalent(u: Union[Unitary2, np.ndarray],
                     v: Union[Unitary2, np.ndarray],
                     atol: float = 1e-10) -> bool:
    """True when `u` and `v` differ at most by a global phase."""
    return gate_error(u, v) < atol
