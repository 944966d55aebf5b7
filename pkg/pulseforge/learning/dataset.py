"""Training corpora for the two regression tasks.

naive:      (alpha, beta, theta)  ->  (phi_a, phi_b, phi_c)
corrected:  (phi_a, phi_b, phi_c) ->  (j0, j1, j3, j5, j6, phi6)

Records keep raw values; the normalized views fed to the network divide
angles by 2 pi and exchanges by Jmax, so every entry lies in [-1, 1].
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field, replace
from enum import Enum
import json
import logging
from pathlib import Path
import time
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union
import warnings

import numpy as np

from pulseforge.control import decompose
from pulseforge.control import pulsesim
from pulseforge.control import supcode
from pulseforge.util import su2

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi

GENERATOR_VERSION = "1"

# Points where the decomposition branch is discontinuous in alpha
ALPHA_BREAKPOINTS = (-np.pi, -3 * np.pi / 4, -np.pi / 2, -np.pi / 4, 0.0)

NAIVE_INPUT_FIELDS = ("alpha", "beta", "theta")
NAIVE_TARGET_FIELDS = ("phi_a", "phi_b", "phi_c")
CORRECTED_INPUT_FIELDS = NAIVE_TARGET_FIELDS
CORRECTED_TARGET_FIELDS = supcode.PARAM_NAMES

# Rotation of the published corrected-sequence comparison
DEFAULT_ANCHORS = (decompose.XZXAngles(0.0, np.pi, np.pi), )

AUDIT_TOL = 1e-8


class Task(Enum):
    NAIVE = "naive"
    CORRECTED = "corrected"

    @property
    def input_fields(self) -> Tuple[str, ...]:
        return NAIVE_INPUT_FIELDS if self is Task.NAIVE else CORRECTED_INPUT_FIELDS

    @property
    def target_fields(self) -> Tuple[str, ...]:
        return (NAIVE_TARGET_FIELDS
                if self is Task.NAIVE else CORRECTED_TARGET_FIELDS)

    @property
    def flag_fields(self) -> Tuple[str, ...]:
        return ("singular", ) if self is Task.NAIVE else ("residual", )


class AlphaSampling(Enum):
    """Placement of the alpha points inside each subinterval."""
    # Chebyshev-Lobatto nodes, denser toward the excluded endpoints
    COSINE = "cosine"
    UNIFORM = "uniform"
    # Uniform in cos(alpha)
    COS_ALPHA = "cos_alpha"


class CorpusFormatError(ValueError):
    """Raised when a corpus file cannot be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = "line {}: {}".format(line_number, message)
        super().__init__(message)
        self.line_number = line_number


class DecompositionFailedError(Exception):
    """Raised when a regular grid point does not decompose exactly."""

    def __init__(self, point: su2.AxisAngle, error: float):
        super().__init__("Decomposition of {} failed: gate error {:.3e}".format(
            point, error))
        self.point = point
        self.error = error


@dataclass
class GridConfig:
    """Sampling grid of target rotations.

    Attributes:
        alphas_per_interval: Points in each of the four alpha subintervals.
        n_beta: Points of the inclusive beta grid on [0, pi].
        n_theta: Points of the inclusive theta grid on [0, 2 pi].
        margin: Distance kept from the excluded alpha values (rad).
        sampling: Placement of alpha points within a subinterval.
    """
    alphas_per_interval: int = 20
    n_beta: int = 20
    n_theta: int = 40
    margin: float = 0.01
    sampling: AlphaSampling = AlphaSampling.COSINE


@dataclass(frozen=True)
class SampleGrid:
    alphas: Tuple[float, ...]
    betas: Tuple[float, ...]
    thetas: Tuple[float, ...]
    excluded_alphas: Tuple[float, ...] = ALPHA_BREAKPOINTS

    def __len__(self):
        return len(self.alphas) * len(self.betas) * len(self.thetas)

    def points(self) -> Iterator[su2.AxisAngle]:
        """All grid rotations, alpha outermost and theta innermost."""
        for alpha in self.alphas:
            yield from self.alpha_row(alpha)

    def alpha_row(self, alpha: float) -> List[su2.AxisAngle]:
        return [
            su2.AxisAngle(alpha, beta, theta) for beta in self.betas
            for theta in self.thetas
        ]


def _subinterval_points(low: float, high: float, count: int,
                        sampling: AlphaSampling) -> np.ndarray:
    if count == 1:
        return np.array([(low + high) / 2])
    if sampling is AlphaSampling.UNIFORM:
        return np.linspace(low, high, count)
    if sampling is AlphaSampling.COS_ALPHA:
        return -np.arccos(np.linspace(np.cos(low), np.cos(high), count))
    nodes = (1 - np.cos(np.pi * np.arange(count) / (count - 1))) / 2
    return low + (high - low) * nodes


def build_grid(config: Optional[GridConfig] = None) -> SampleGrid:
    """Builds the (alpha, beta, theta) grid.

    Alpha gets `alphas_per_interval` points in each open subinterval between
    consecutive values of `ALPHA_BREAKPOINTS`, kept `margin` away from them;
    beta and theta are uniform inclusive grids.
    """
    config = config if config is not None else GridConfig()
    alphas = []
    for low, high in zip(ALPHA_BREAKPOINTS[:-1], ALPHA_BREAKPOINTS[1:]):
        alphas.extend(
            _subinterval_points(low + config.margin, high - config.margin,
                                config.alphas_per_interval, config.sampling))
    return SampleGrid(
        alphas=tuple(float(a) for a in alphas),
        betas=tuple(float(b) for b in np.linspace(0, np.pi, config.n_beta)),
        thetas=tuple(
            float(t) for t in np.linspace(0, TWO_PI, config.n_theta)))


def wrap_angles(angles: Sequence[float]) -> np.ndarray:
    """Angles reduced into [0, 2 pi), as fed to the corrected task."""
    return decompose.wrap_angles(angles)


def _scales(task: Task, jmax: float) -> Tuple[np.ndarray, np.ndarray]:
    if task is Task.NAIVE:
        return np.full(3, TWO_PI), np.full(3, TWO_PI)
    return np.full(3, TWO_PI), np.array([jmax] * 5 + [TWO_PI])


def normalize_inputs(task: Task, raw: Sequence[float],
                     jmax: float) -> np.ndarray:
    return np.asarray(raw, dtype=float) / _scales(task, jmax)[0]


def normalize_targets(task: Task, raw: Sequence[float],
                      jmax: float) -> np.ndarray:
    return np.asarray(raw, dtype=float) / _scales(task, jmax)[1]


def denormalize_inputs(task: Task, normalized: Sequence[float],
                       jmax: float) -> np.ndarray:
    return np.asarray(normalized, dtype=float) * _scales(task, jmax)[0]


def denormalize_targets(task: Task, normalized: Sequence[float],
                        jmax: float) -> np.ndarray:
    return np.asarray(normalized, dtype=float) * _scales(task, jmax)[1]


@dataclass(frozen=True)
class TrainingRecord:
    """One supervised example, stored in raw units.

    Naive raw targets are the signed x-z-x angles in (-2 pi, 2 pi]; corrected
    raw inputs are x-z-x angles wrapped into [0, 2 pi).
    """
    task: Task
    raw_inputs: Tuple[float, ...]
    raw_targets: Tuple[float, ...]
    jmax: float = supcode.SynthesisConfig.jmax
    singular: bool = False
    # Residual infinity norm of a synthesized corrected record
    residual: float = 0.0

    @property
    def inputs(self) -> np.ndarray:
        return normalize_inputs(self.task, self.raw_inputs, self.jmax)

    @property
    def targets(self) -> np.ndarray:
        return normalize_targets(self.task, self.raw_targets, self.jmax)

    def flags(self) -> Tuple[Any, ...]:
        if self.task is Task.NAIVE:
            return (int(self.singular), )
        return (self.residual, )


def as_arrays(records: Sequence[TrainingRecord]
              ) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized (inputs, targets) matrices, one row per record."""
    if not records:
        raise ValueError("No records")
    return (np.array([record.inputs for record in records]),
            np.array([record.targets for record in records]))


def _naive_record(point: su2.AxisAngle, jmax: float) -> TrainingRecord:
    solution = decompose.solve_xzx_with_flag(point)
    if solution.error > AUDIT_TOL:
        raise DecompositionFailedError(point, solution.error)
    return TrainingRecord(Task.NAIVE,
                          (point.alpha, point.beta, point.theta),
                          tuple(decompose.signed_angles(solution.angles)),
                          jmax=jmax,
                          singular=solution.singular)


def _naive_row(args: Tuple[SampleGrid, float, float]) -> List[TrainingRecord]:
    grid, alpha, jmax = args
    return [_naive_record(point, jmax) for point in grid.alpha_row(alpha)]


def generate_naive_corpus(grid: SampleGrid,
                          include_singular: bool = False,
                          jmax: float = supcode.SynthesisConfig.jmax,
                          workers: int = 1,
                          verbosity: bool = False) -> List[TrainingRecord]:
    """Decomposes every grid rotation.

    Args:
        grid: the sampling grid.
        include_singular: Keep singular points (flagged) instead of dropping
            them. With the default grid this gives exactly 64000 records.
        jmax: stored on the records for uniform metadata.
        workers: Processes used for the decomposition; the result does not
            depend on it.
        verbosity: Log a summary at INFO.

    Raises:
        DecompositionFailedError: if a grid point does not reconstruct.
    """
    jobs = [(grid, alpha, jmax) for alpha in grid.alphas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(_naive_row, jobs))
    else:
        rows = [_naive_row(job) for job in jobs]

    records = [record for row in rows for record in row]
    n_singular = sum(record.singular for record in records)
    if not include_singular:
        records = [record for record in records if not record.singular]
        if n_singular:
            warnings.warn("Dropped {} singular grid points".format(n_singular))
    if verbosity:
        logger.info("Naive corpus: %d records (%d singular points %s)",
                    len(records), n_singular,
                    "kept" if include_singular else "dropped")
    return records


@dataclass
class CorpusBudget:
    """Caps on corrected-corpus synthesis.

    Attributes:
        max_points: Grid rotations to synthesize (random subsample, kept in
            grid order); None for all of them.
        max_seconds: Wall-clock allowance; chunks stop starting new points
            once it is spent. None for no limit.
        seed: Seed of the subsample.
    """
    max_points: Optional[int] = 2000
    max_seconds: Optional[float] = None
    seed: int = 0


@dataclass
class CorrectedCorpus:
    records: List[TrainingRecord] = field(default_factory=list)
    # (x-z-x input angles, best residual) of points that did not converge
    failures: List[Tuple[Tuple[float, ...], float]] = field(
        default_factory=list)
    skipped: int = 0

    @property
    def attempted(self) -> int:
        return len(self.records) + len(self.failures)

    @property
    def convergence_rate(self) -> float:
        return len(self.records) / self.attempted if self.attempted else 0.0


def corrected_inputs(grid: SampleGrid) -> List[Tuple[float, ...]]:
    """Wrapped x-z-x angles of every regular grid rotation, in grid order."""
    inputs = []
    for point in grid.points():
        solution = decompose.solve_xzx_with_flag(point)
        if not solution.singular:
            inputs.append(tuple(wrap_angles(solution.angles.as_array())))
    return inputs


def _synthesize_chunk(args) -> CorrectedCorpus:
    chunk, config, chunk_seed, deadline = args
    corpus = CorrectedCorpus()
    previous = None
    for angles in chunk:
        if deadline is not None and time.time() > deadline:
            corpus.skipped += 1
            continue
        target = decompose.XZXAngles(*angles)
        chunk_config = replace(config, seed=chunk_seed, verbosity=False)
        seeds = [previous] if previous is not None else []
        try:
            params = supcode.synthesize(target, seeds, chunk_config)
        except supcode.SynthesisFailedError as err:
            corpus.failures.append((tuple(angles), err.best_residual))
            continue
        residual = float(
            np.max(np.abs(supcode.residuals(params, target, config.coupling))))
        corpus.records.append(
            TrainingRecord(Task.CORRECTED,
                           tuple(float(a) for a in angles),
                           tuple(float(v) for v in params.as_array()),
                           jmax=config.jmax,
                           residual=residual))
        previous = params
    return corpus


def generate_corrected_corpus(grid: SampleGrid,
                              budget: Optional[CorpusBudget] = None,
                              config: Optional[supcode.SynthesisConfig] = None,
                              anchors: Sequence[
                                  decompose.XZXAngles] = DEFAULT_ANCHORS,
                              chunk_size: int = 50,
                              workers: int = 1,
                              verbosity: bool = False) -> CorrectedCorpus:
    """Synthesizes corrected sequences for (a budgeted subset of) the grid.

    Points are split into contiguous chunks of `chunk_size`; inside a chunk
    each synthesis is seeded with the previous solution, so neighbouring
    records sit on the same solution branch. Chunk k uses multistart seed
    `config.seed + k`, which makes the output independent of `workers`.
    `anchors` are synthesized first and always included.

    Returns:
        The converged records plus the per-point failures.
    """
    budget = budget if budget is not None else CorpusBudget()
    config = config if config is not None else supcode.SynthesisConfig()
    inputs = corrected_inputs(grid)
    if budget.max_points is not None and budget.max_points < len(inputs):
        rng = np.random.default_rng(budget.seed)
        chosen = np.sort(
            rng.choice(len(inputs), size=budget.max_points, replace=False))
        inputs = [inputs[i] for i in chosen]
    anchor_inputs = [tuple(wrap_angles(a.as_array())) for a in anchors]

    deadline = (time.time() + budget.max_seconds
                if budget.max_seconds is not None else None)
    chunks = [anchor_inputs] if anchor_inputs else []
    chunks.extend(inputs[i:i + chunk_size]
                  for i in range(0, len(inputs), chunk_size))
    jobs = [(chunk, config, config.seed + k, deadline)
            for k, chunk in enumerate(chunks)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(_synthesize_chunk, jobs))
    else:
        parts = [_synthesize_chunk(job) for job in jobs]

    corpus = CorrectedCorpus()
    for part in parts:
        corpus.records.extend(part.records)
        corpus.failures.extend(part.failures)
        corpus.skipped += part.skipped

    if corpus.failures:
        warnings.warn("{} of {} points failed to converge".format(
            len(corpus.failures), corpus.attempted))
    if corpus.skipped:
        warnings.warn("Time budget exhausted: {} points not attempted".format(
            corpus.skipped))
    if verbosity:
        logger.info("Corrected corpus: %d records, convergence rate %.3f",
                    len(corpus.records), corpus.convergence_rate)
    return corpus


@dataclass
class Corpus:
    meta: Dict[str, Any]
    records: List[TrainingRecord]

    @property
    def task(self) -> Task:
        return Task(self.meta["task"])

    @property
    def jmax(self) -> float:
        return float(self.meta["jmax"])


def _fields(task: Task) -> Tuple[str, ...]:
    return task.input_fields + task.target_fields + task.flag_fields


def write_corpus(path: Union[str, Path],
                 records: Sequence[TrainingRecord],
                 seed: Optional[int] = None,
                 extra_meta: Optional[Dict[str, Any]] = None) -> Path:
    """Writes records after a `#meta` JSON header and a `#fields` line.

    All records must share a task and Jmax. Floats are written with `repr`,
    so equal inputs give byte-identical files.
    """
    if not records:
        raise ValueError("Refusing to write an empty corpus")
    task, jmax = records[0].task, records[0].jmax
    if any(r.task is not task or r.jmax != jmax for r in records):
        raise ValueError("Records mix tasks or Jmax values")
    meta = {
        "task": task.value,
        "jmax": jmax,
        "seed": seed,
        "count": len(records),
        "version": GENERATOR_VERSION,
    }
    meta.update(extra_meta or {})
    path = Path(path)
    with path.open("w", newline="") as handle:
        handle.write("#meta " + json.dumps(meta, sort_keys=True) + "\n")
        handle.write("#fields " + ",".join(_fields(task)) + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        for record in records:
            writer.writerow(
                [repr(float(v)) for v in record.raw_inputs + record.raw_targets]
                + [repr(flag) for flag in record.flags()])
    return path


def read_corpus(path: Union[str, Path]) -> Corpus:
    """Parses a corpus file.

    Raises:
        CorpusFormatError: with the offending line number.
    """
    with Path(path).open() as handle:
        lines = handle.read().splitlines()
    if not lines or not lines[0].startswith("#meta "):
        raise CorpusFormatError("missing #meta header", 1)
    try:
        meta = json.loads(lines[0][len("#meta "):])
        task = Task(meta["task"])
        jmax = float(meta["jmax"])
    except (ValueError, KeyError) as err:
        raise CorpusFormatError("bad #meta header: {}".format(err), 1)
    if len(lines) < 2 or lines[1] != "#fields " + ",".join(_fields(task)):
        raise CorpusFormatError(
            "expected '#fields {}'".format(",".join(_fields(task))), 2)

    n_in, n_out = len(task.input_fields), len(task.target_fields)
    records = []
    for line_number, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != n_in + n_out + 1:
            raise CorpusFormatError(
                "expected {} fields, got {}".format(n_in + n_out + 1,
                                                    len(cells)), line_number)
        try:
            values = [float(cell) for cell in cells[:-1]]
            flag = float(cells[-1])
        except ValueError as err:
            raise CorpusFormatError(str(err), line_number)
        records.append(
            TrainingRecord(task,
                           tuple(values[:n_in]),
                           tuple(values[n_in:]),
                           jmax=jmax,
                           singular=task is Task.NAIVE and bool(flag),
                           residual=flag if task is Task.CORRECTED else 0.0))
    if "count" in meta and meta["count"] != len(records):
        raise CorpusFormatError("header announces {} records, found {}".format(
            meta["count"], len(records)))
    return Corpus(meta, records)


def export_csv(path: Union[str, Path],
               records: Sequence[TrainingRecord]) -> Path:
    """CSV with raw and normalized columns, for inspection elsewhere."""
    if not records:
        raise ValueError("No records to export")
    task = records[0].task
    raw_fields = task.input_fields + task.target_fields
    header = (list(raw_fields) + ["norm_" + name for name in raw_fields] +
              list(task.flag_fields))
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for record in records:
            writer.writerow(
                [repr(float(v)) for v in record.raw_inputs + record.raw_targets]
                + [repr(float(v)) for v in record.inputs] +
                [repr(float(v)) for v in record.targets] +
                [repr(flag) for flag in record.flags()])
    return path


def subsample(records: Sequence[TrainingRecord], n: int,
              seed: int) -> List[TrainingRecord]:
    """`n` records drawn without replacement, in their original order."""
    if n >= len(records):
        return list(records)
    rng = np.random.default_rng(seed)
    return [records[i] for i in np.sort(
        rng.choice(len(records), size=n, replace=False))]


def record_error(record: TrainingRecord) -> float:
    """Zero-noise gate error of the sequence a record describes against the
    rotation it was generated for."""
    if record.task is Task.NAIVE:
        target = su2.AxisAngle(*record.raw_inputs)
        angles = decompose.XZXAngles(*record.raw_targets)
        pulse = decompose.expand_five_piece(angles).as_pulse_sequence()
        return su2.gate_error(
            pulsesim.evolve_sequence(pulse), target.unitary())
    angles = decompose.XZXAngles(*record.raw_inputs)
    sequence = supcode.expand_corrected(
        supcode.SupcodeParams(*record.raw_targets), angles)
    return su2.gate_error(
        pulsesim.evolve_sequence(sequence.as_pulse_sequence()),
        decompose.reconstruct(angles))


def audit_corpus(records: Sequence[TrainingRecord],
                 fraction: float = 0.01,
                 seed: int = 0,
                 tol: float = AUDIT_TOL) -> List[Tuple[int, float]]:
    """Re-simulates a random `fraction` of the records (at least one).

    Returns:
        (index, gate error) of every audited record above `tol`; empty when
        the corpus is consistent.
    """
    if not records:
        return []
    count = max(1, int(round(fraction * len(records))))
    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(len(records), size=count, replace=False))
    failures = []
    for index in indices:
        error = record_error(records[index])
        if error > tol:
            failures.append((int(index), error))
    if failures:
        logger.warning("Audit found %d of %d records above %.1e",
                       len(failures), count, tol)
    return failures
