"""Noise-correcting 18-piece sequences built on the x-z-x decomposition.

The naive five-piece pulse is supplemented with an engineered identity,

    U(0,phi_a) U(1,pi) U(j6,pi-phi6) U(j5,pi) U(0,pi) U(j3,pi) U(0,pi)
    U(j1,pi) U(j0,4pi) U(j1,pi) U(0,pi) U(j3,pi) U(0,pi) U(j5,pi)
    U(j6,pi+phi6) U(0,phi_b) U(1,pi) U(0,phi_c),

and the six parameters {j0, j1, j3, j5, j6, phi6} are solved for so that
the first-order sensitivities of the whole sequence to static hyperfine and
charge noise vanish.

The inserted block is exactly the identity at zero noise for any parameter
values, so the zero-noise gate is always the naive one and the search is over
the six first-order conditions only.

Adding 2 pi to a naive angle flips the sign of the gate but lengthens a
J = 0 piece, which changes the hyperfine error the block has to undo. For a
given target only some of the eight such representatives admit a solution
with j6 >= 0, so the solver picks the representative along with the
parameters, and `expand_corrected` recovers it from the parameters.
"""

from dataclasses import dataclass, field
from enum import Enum
import logging
from typing import Dict, List, Optional, Sequence, Tuple
import warnings

import numpy as np
from scipy.optimize import least_squares

from pulseforge.control import decompose
from pulseforge.control import pulsesim
from pulseforge.util import finite_difference
from pulseforge.util import su2

logger = logging.getLogger(__name__)

PARAM_NAMES = ("j0", "j1", "j3", "j5", "j6", "phi6")

N_PIECES = 18

# Default noise amplitudes (units of h) for the robustness comparison; spans
# the slope window and the crossover region.
ROBUSTNESS_GRID = np.logspace(-3, 0, 31)

# Below this the two noise channels leave j6 unconstrained
DEGENERATE_ATOL = 1e-9

NAIVE_EXCHANGES = np.array([0.0, 1.0, 0.0, 1.0, 0.0])


class DerivativeMethod(Enum):
    """How residual components 4-9 (noise sensitivities) are evaluated."""
    EXACT = "exact"
    RICHARDSON = "richardson"


class SynthesisFailedError(Exception):
    """Raised when no multistart seed reaches the residual tolerance."""

    def __init__(self, message: str, best_residual: float,
                 best_params: Optional["SupcodeParams"]):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_params = best_params


@dataclass(frozen=True)
class SupcodeParams:
    """Exchange values (units of h) and the angle phi6 (rad) of the
    corrected sequence."""
    j0: float
    j1: float
    j3: float
    j5: float
    j6: float
    phi6: float

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise ValueError("Parameters must be finite: {}".format(self))
        if np.any(values[:5] < 0):
            raise ValueError("Exchange values must be non-negative: {}".format(
                self))

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "SupcodeParams":
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES])

    @property
    def exchanges(self) -> np.ndarray:
        return self.as_array()[:5]

    def in_box(self, jmax: float) -> bool:
        """Whether the parameters lie in the solver's feasible box."""
        return bool(
            np.all(self.exchanges <= jmax) and -np.pi <= self.phi6 <= np.pi)


@dataclass
class SynthesisConfig:
    """Options for `synthesize`.

    Attributes:
        jmax: Exchange ceiling, also the normalization constant of
            corrected-task training targets.
        tol: Required infinity norm of the residual vector.
        max_nfev: Function evaluations allowed per least-squares run.
        n_starts: Random multistart seeds tried after the caller's seeds.
        n_candidates: Stop after this many converged solutions and keep the
            one with the smallest peak exchange (then the shortest duration).
        seed: Seed of the multistart generator.
        coupling: Charge-noise coupling model.
        derivative: How the noise sensitivities are evaluated.
        verbosity: Log per-target summaries at INFO.
    """
    jmax: float = 30.0
    tol: float = 1e-9
    max_nfev: int = 300
    n_starts: int = 64
    n_candidates: int = 1
    seed: int = 0
    min_seed_exchange: float = 0.05
    coupling: pulsesim.ChargeCoupling = pulsesim.ChargeCoupling.PROPORTIONAL
    derivative: DerivativeMethod = DerivativeMethod.EXACT
    verbosity: bool = False


def _piece_arrays(values: np.ndarray,
                  naive: decompose.XZXAngles) -> Tuple[np.ndarray, np.ndarray]:
    j0, j1, j3, j5, j6, phi6 = values
    pi = np.pi
    exchanges = np.array([
        0.0, 1.0, j6, j5, 0.0, j3, 0.0, j1, j0, j1, 0.0, j3, 0.0, j5, j6, 0.0,
        1.0, 0.0
    ])
    angles = np.array([
        naive.phi_a, pi, pi - phi6, pi, pi, pi, pi, pi, 4 * pi, pi, pi, pi,
        pi, pi, pi + phi6, naive.phi_b, pi, naive.phi_c
    ])
    return exchanges, angles


@dataclass(frozen=True)
class CorrectedSequence:
    params: SupcodeParams
    # Naive angles actually played: a 2 pi representative of the target
    naive: decompose.XZXAngles

    def as_pulse_sequence(self, label: str = "corrected"
                          ) -> pulsesim.PulseSequence:
        exchanges, angles = _piece_arrays(self.params.as_array(), self.naive)
        return pulsesim.PulseSequence.from_arrays(exchanges, angles, label)

    @property
    def pieces(self) -> Tuple[pulsesim.Piece, ...]:
        return self.as_pulse_sequence().pieces

    @property
    def total_duration(self) -> float:
        return self.as_pulse_sequence().total_duration


def _hyperfine_norm(values: np.ndarray, naive: decompose.XZXAngles) -> float:
    exchanges, angles = _piece_arrays(values, naive)
    return float(
        np.linalg.norm(pulsesim.sequence_derivatives(exchanges, angles)[0]))


def select_representative(params: SupcodeParams,
                          target: decompose.XZXAngles) -> decompose.XZXAngles:
    """The 2 pi representative of `target` whose naive pieces `params`
    protect best.

    Only J = 0 pieces change between representatives and they carry no
    charge noise, so the choice is made on the hyperfine channel alone. Ties
    go to the first representative in `decompose.representatives` order.
    """
    values = params.as_array()
    best, best_norm = None, np.inf
    for naive in decompose.representatives(target):
        norm = _hyperfine_norm(values, naive)
        if norm < best_norm:
            best, best_norm = naive, norm
    return best


def expand_corrected(params: SupcodeParams,
                     target: decompose.XZXAngles) -> CorrectedSequence:
    """The 18-piece sequence for `params`, with j2 = j4 = 0.

    The naive pieces use `select_representative(params, target)`, which
    reconstructs `target` up to global sign.

    Raises:
        pulsesim.InvalidSequenceError: if |phi6| > pi makes a piece angle
            negative.
    """
    sequence = CorrectedSequence(params, select_representative(params, target))
    sequence.as_pulse_sequence()
    return sequence


def insertion_sensitivities(naive: decompose.XZXAngles,
                            coupling: pulsesim.ChargeCoupling = pulsesim.
                            ChargeCoupling.PROPORTIONAL) -> np.ndarray:
    """First-order noise sensitivities of the naive five-piece pulse, moved
    to the point where the identity block is inserted.

    Returns:
        (2, 3) Pauli coordinates for dh (row 0) and de (row 1). The block
        cancels the naive errors exactly when it contributes minus these.
    """
    angles = np.array([naive.phi_a, np.pi, naive.phi_b, np.pi, naive.phi_c])
    generators = pulsesim.sequence_derivatives(NAIVE_EXCHANGES, angles,
                                               coupling)
    # pieces (0, phi_b) (1, pi) (0, phi_c) act before the block
    before = pulsesim.sequence_matrix(NAIVE_EXCHANGES[2:],
                                      angles[2:],
                                      coupling=coupling)
    rows = []
    for g in generators:
        moved = before @ np.einsum("k,kij->ij", g,
                                   su2.PAULIS) @ before.conj().T
        rows.append(np.real(np.einsum("ij,kji->k", moved, su2.PAULIS)) / 2)
    return np.array(rows)


@dataclass(frozen=True)
class BlockSeed:
    """Starting values of the multistart for one naive representative.

    `j6` is None when the representative leaves it unconstrained; `phi6`
    holds candidate starting angles, empty for random ones.
    """
    naive: decompose.XZXAngles
    j6: Optional[float] = None
    phi6: Tuple[float, ...] = ()


def block_seed(naive: decompose.XZXAngles,
               coupling: pulsesim.ChargeCoupling = pulsesim.ChargeCoupling.
               PROPORTIONAL,
               jmax: float = SynthesisConfig.jmax) -> Optional[BlockSeed]:
    """The j6 a solution must have for the `naive` representative.

    Mirrored pieces of the block cancel each other's transverse terms, so for
    either noise the block contributes a vector along the j6 axis plus an
    x-z plane vector turned by pi + phi6 about that axis. Both noises must
    then leave the same ratio between their y component and their in-plane
    component normal to the j6 axis, which is linear in j6. phi6 follows from
    that ratio up to sign conventions, so four candidates are returned.

    Returns:
        None when the forced j6 lies outside [0, jmax].
    """
    hyperfine, charge = insertion_sensitivities(naive, coupling)
    numerator = hyperfine[1] * charge[2] - hyperfine[2] * charge[1]
    denominator = hyperfine[1] * charge[0] - hyperfine[0] * charge[1]
    if abs(denominator) < DEGENERATE_ATOL:
        if abs(numerator) < DEGENERATE_ATOL:
            return BlockSeed(naive)
        return None
    j6 = numerator / denominator
    if not 0 <= j6 <= jmax:
        return None

    normal = np.array([-j6, 0.0, 1.0]) / np.hypot(1.0, j6)
    strongest = max((hyperfine, charge),
                    key=lambda s: np.hypot(s @ normal, s[1]))
    psi = np.arctan2(strongest[1], strongest @ normal)
    phi6 = tuple(
        float(np.angle(np.exp(1j * value)))
        for value in (psi, psi + np.pi, -psi, np.pi - psi))
    return BlockSeed(naive, float(j6), phi6)


def block_seeds(target: decompose.XZXAngles,
                config: SynthesisConfig) -> List[BlockSeed]:
    """Seeds of every representative with a feasible j6, in
    `decompose.representatives` order; unconstrained seeds for all eight if
    none is feasible."""
    seeds = [
        seed for seed in (block_seed(naive, config.coupling, config.jmax)
                          for naive in decompose.representatives(target))
        if seed is not None
    ]
    if not seeds:
        logger.debug("No representative of %s forces a feasible j6", target)
        seeds = [BlockSeed(naive)
                 for naive in decompose.representatives(target)]
    return seeds


def _sensitivities(exchanges: np.ndarray, angles: np.ndarray,
                   w0: np.ndarray, coupling: pulsesim.ChargeCoupling,
                   method: DerivativeMethod) -> np.ndarray:
    if method is DerivativeMethod.EXACT:
        return pulsesim.sequence_derivatives(exchanges, angles, coupling)
    rows = []
    for axis in pulsesim.NoiseAxis:
        d_w = finite_difference.richardson_derivative(
            lambda step: pulsesim.sequence_matrix(
                exchanges, angles, pulsesim.NoisePoint.along(axis, step),
                coupling))
        generator = w0.conj().T @ d_w
        rows.append(np.real(1j * np.einsum("ij,kji->k", generator,
                                           su2.PAULIS)))
    return np.array(rows)


def _residual_vector(values: np.ndarray, naive: decompose.XZXAngles,
                     target_dagger: np.ndarray,
                     coupling: pulsesim.ChargeCoupling,
                     method: DerivativeMethod) -> np.ndarray:
    exchanges, angles = _piece_arrays(values, naive)
    w0 = pulsesim.sequence_matrix(exchanges, angles, coupling=coupling)
    mismatch = su2.su2_log_components(target_dagger @ w0)
    sensitivities = _sensitivities(exchanges, angles, w0, coupling, method)
    return np.concatenate([mismatch, sensitivities.reshape(-1)])


def residuals(params: SupcodeParams,
              target: decompose.XZXAngles,
              coupling: pulsesim.ChargeCoupling = pulsesim.ChargeCoupling.
              PROPORTIONAL,
              method: DerivativeMethod = DerivativeMethod.EXACT) -> np.ndarray:
    """Nine real conditions that vanish for a noise-correcting sequence.

    The naive pieces are those of `expand_corrected(params, target)`.

    Returns:
        Components 0-2: Pauli coordinates of log(V^dag W0) where V is the
        x-z-x target and W0 the zero-noise evolution. Components 3-5 and 6-8:
        Pauli coordinates g of W0^dag dW/d(dh) = -i g.sigma / 2, then the same
        for d/d(de).
    """
    target_dagger = decompose.reconstruct(target).matrix.conj().T
    return _residual_vector(params.as_array(),
                            select_representative(params, target),
                            target_dagger, coupling, method)


def _random_seeds(rng: np.random.Generator, count: int,
                  config: SynthesisConfig) -> np.ndarray:
    low, high = np.log(config.min_seed_exchange), np.log(config.jmax)
    exchanges = np.exp(rng.uniform(low, high, size=(count, 5)))
    phi6 = rng.uniform(-np.pi, np.pi, size=(count, 1))
    return np.hstack([exchanges, phi6])


def _candidate_key(values: np.ndarray,
                   naive: decompose.XZXAngles) -> Tuple[float, float]:
    exchanges, angles = _piece_arrays(values, naive)
    duration = float(np.sum(angles / np.sqrt(1 + exchanges**2)))
    return float(np.max(values[:5])), duration


def synthesize(target: decompose.XZXAngles,
               seeds: Sequence[SupcodeParams] = (),
               config: Optional[SynthesisConfig] = None) -> SupcodeParams:
    """Solves for noise-correcting parameters by bounded multistart
    least squares.

    The caller's `seeds` are tried first (in order), each on the naive
    representative it protects best. Then `config.n_starts` random seeds
    cycle through the representatives that admit a feasible j6, starting
    from that j6 and its phi6 candidates. Residuals never look at a noise
    amplitude: only derivatives at zero noise enter.

    Args:
        target: x-z-x angles of the gate to protect.
        seeds: Starting points, e.g. the solution of a neighbouring target.
        config: Solver options; defaults to `SynthesisConfig()`.

    Returns:
        Parameters within the feasible box whose residual infinity norm is
        below `config.tol`.

    Raises:
        SynthesisFailedError: no start converged; carries the best residual
            and parameters seen.
    """
    config = config if config is not None else SynthesisConfig()
    rng = np.random.default_rng(config.seed)
    lower = np.array([0.0] * 5 + [-np.pi])
    upper = np.array([config.jmax] * 5 + [np.pi])
    target_dagger = decompose.reconstruct(target).matrix.conj().T

    starts = [(select_representative(seed, target),
               np.clip(seed.as_array(), lower, upper)) for seed in seeds]
    if config.n_starts:
        plans = block_seeds(target, config)
        for index, values in enumerate(
                _random_seeds(rng, config.n_starts, config)):
            plan = plans[index % len(plans)]
            if plan.j6 is not None:
                values[4] = plan.j6
            if plan.phi6:
                values[5] = plan.phi6[index // len(plans) % len(plan.phi6)]
            starts.append((plan.naive, values))
    if not starts:
        raise ValueError("synthesize needs at least one seed")

    converged: List[Tuple[decompose.XZXAngles, np.ndarray]] = []
    best_values, best_residual = None, np.inf
    for index, (naive, start) in enumerate(starts):
        fit = least_squares(_residual_vector,
                            start,
                            jac="2-point",
                            bounds=(lower, upper),
                            method="trf",
                            xtol=1e-15,
                            ftol=1e-15,
                            gtol=1e-15,
                            max_nfev=config.max_nfev,
                            args=(naive, target_dagger, config.coupling,
                                  config.derivative))
        residual = float(np.max(np.abs(fit.fun)))
        if residual < best_residual:
            best_values, best_residual = fit.x, residual
        if residual < config.tol:
            logger.debug("Start %d converged to %s on %s (residual %.2e)",
                         index, fit.x, naive, residual)
            converged.append((naive, fit.x))
            if len(converged) >= config.n_candidates:
                break

    if not converged:
        best_params = (SupcodeParams.from_array(best_values)
                       if best_values is not None else None)
        raise SynthesisFailedError(
            "No start converged for target {} (best residual {:.3e} after {} "
            "starts)".format(target, best_residual, len(starts)),
            best_residual, best_params)

    naive, chosen = min(converged,
                        key=lambda item: _candidate_key(item[1], item[0]))
    params = SupcodeParams.from_array(chosen)
    if config.verbosity:
        logger.info("Synthesized %s for %s (naive angles %s) from %d "
                    "converged candidates", params, target, naive,
                    len(converged))
    return params


def corrected_sequence(target: decompose.XZXAngles,
                       config: Optional[SynthesisConfig] = None
                       ) -> CorrectedSequence:
    """Synthesizes and expands in one call."""
    return expand_corrected(synthesize(target, config=config), target)


@dataclass
class RobustnessReport:
    """Log-log slopes of gate error vs static noise and the amplitude where
    the corrected sequence stops beating the naive one, per noise axis."""
    slopes: Dict[pulsesim.NoiseAxis, float] = field(default_factory=dict)
    naive_slopes: Dict[pulsesim.NoiseAxis, float] = field(
        default_factory=dict)
    crossovers: Dict[pulsesim.NoiseAxis, Optional[float]] = field(
        default_factory=dict)
    sweeps: dict = field(default_factory=dict)

    def is_flat(self, expected: float = 4.0, tolerance: float = 0.4) -> bool:
        return all(
            abs(slope - expected) <= tolerance
            for slope in self.slopes.values())


def robustness_report(params: SupcodeParams,
                      target: decompose.XZXAngles,
                      coupling: pulsesim.ChargeCoupling = pulsesim.
                      ChargeCoupling.PROPORTIONAL,
                      grid: Sequence[float] = ROBUSTNESS_GRID
                      ) -> RobustnessReport:
    """Sweeps the corrected and naive sequences along both noise axes."""
    gate = decompose.reconstruct(target)
    corrected = expand_corrected(params, target).as_pulse_sequence()
    naive = decompose.expand_five_piece(target).as_pulse_sequence()
    report = RobustnessReport()
    for axis in pulsesim.NoiseAxis:
        corrected_sweep = pulsesim.noise_sweep(corrected, axis, grid, gate,
                                               coupling)
        naive_sweep = pulsesim.noise_sweep(naive, axis, grid, gate, coupling)
        report.slopes[axis] = pulsesim.loglog_slope(corrected_sweep)
        report.naive_slopes[axis] = pulsesim.loglog_slope(naive_sweep)
        report.crossovers[axis] = pulsesim.crossover_amplitude(
            corrected_sweep, naive_sweep)
        report.sweeps[axis] = (corrected_sweep, naive_sweep)
    if not report.is_flat():
        warnings.warn("Sequence {} for {} is not first-order flat: slopes "
                      "{}".format(params, target, report.slopes))
    return report
