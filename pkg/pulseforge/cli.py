"""Command-line entry point: `pulseforge [-v] <command> [options]`.

Exit codes are 0 on success, 1 when a solver, training run or acceptance
check fails, and 2 for usage errors and unreadable inputs.
"""

import argparse
import csv
import logging
import os
from pathlib import Path
import sys
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import warnings

import numpy as np

import pulseforge
from pulseforge.control import decompose
from pulseforge.control import pulsesim
from pulseforge.control import supcode
from pulseforge.learning import dataset
from pulseforge.learning import neuralnet
from pulseforge.util import manifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

SEED_ENV = "PULSEFORGE_SEED"

ROTATION_FIELDS = ("alpha", "beta", "theta")
SOLVE_BATCH_FIELDS = ROTATION_FIELDS + dataset.NAIVE_TARGET_FIELDS + (
    "singular", "gate_error", "status")
STUDY_FIELDS = ("value", "seed", "final_error")

# Expected log-log slopes (value, tolerance) of sweep ids seen by `report`
SLOPE_CRITERIA = {"corrected": (4.0, 0.4), "naive": (2.0, 0.3)}
# Noise amplitude where the corrected sequence must still beat the naive one
COMPARISON_AMPLITUDE = 0.05
TREND_EPOCHS = (10, 50, 200)
COMPARISON_INDICES = tuple(
    range(1, len(pulseforge.COMPARISON_ROTATIONS) + 1))


class UsageError(Exception):
    """Raised for missing seeds, bad flag combinations or malformed inputs."""


class CriterionFailure(Exception):
    """Raised when a command finishes but misses an acceptance threshold."""


def resolve_seed(args: argparse.Namespace, required: bool) -> Optional[int]:
    """`--seed`, else `$PULSEFORGE_SEED`, else None (or an error)."""
    if args.seed is not None:
        return args.seed
    value = os.environ.get(SEED_ENV)
    if value is not None:
        try:
            return int(value)
        except ValueError:
            raise UsageError("{}={!r} is not an integer".format(
                SEED_ENV, value))
    if required:
        raise UsageError("{} needs a seed: pass --seed or set {}".format(
            args.command, SEED_ENV))
    return None


def _verbose(args: argparse.Namespace) -> bool:
    return args.verbose > 0


def _output_path(out: str) -> Path:
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _synthesis_config(args: argparse.Namespace,
                      seed: Optional[int]) -> supcode.SynthesisConfig:
    return supcode.SynthesisConfig(
        jmax=args.jmax,
        tol=args.tol,
        n_starts=args.starts,
        seed=seed if seed is not None else 0,
        coupling=pulsesim.ChargeCoupling(args.coupling),
        verbosity=_verbose(args))


def _flag_config(args: argparse.Namespace) -> Dict[str, object]:
    return {
        key: value
        for key, value in vars(args).items()
        if key not in ("handler", "verbose")
    }


def _read_rotations(path: str) -> List[pulseforge.AxisAngle]:
    """Rotations from a CSV with an alpha,beta,theta header."""
    rotations = []
    with Path(path).open(newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ())[:3] != ROTATION_FIELDS:
            raise UsageError("{}:1: expected header starting with {}".format(
                path, ",".join(ROTATION_FIELDS)))
        for line_number, row in enumerate(reader, start=2):
            try:
                rotations.append(
                    pulseforge.AxisAngle(*(float(row[name])
                                           for name in ROTATION_FIELDS)))
            except (TypeError, ValueError):
                raise UsageError("{}:{}: malformed row {}".format(
                    path, line_number, row))
    return rotations


def _write_rows(path: Path, header: Sequence[str],
                rows: Sequence[Sequence[object]]) -> Path:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [repr(float(v)) if isinstance(v, (float, np.floating)) else v
                 for v in row])
    return path


def _print_solution(solution: pulseforge.GateSolution):
    print("{} sequence, {} pieces, total duration {:.6f}, gate error "
          "{:.3e}{}".format(solution.kind, len(solution.sequence),
                            solution.sequence.total_duration,
                            solution.gate_error,
                            " (singular)" if solution.singular else ""))


'''
=================
Commands
=================
'''


def _solve_batch(path: str, out: Path, corrected: bool,
                 config: supcode.SynthesisConfig) -> int:
    rows, failed = [], 0
    for target in _read_rotations(path):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                solution = pulseforge.solve_rotation(target.alpha,
                                                     target.beta,
                                                     target.theta, corrected,
                                                     config)
            except supcode.SynthesisFailedError:
                failed += 1
                rows.append([target.alpha, target.beta, target.theta, "", "",
                             "", "", "", "failed"])
                continue
        if solution.gate_error > decompose.RECONSTRUCTION_TOL:
            status = "inaccurate"
            failed += 1
        else:
            status = "singular" if solution.singular else "ok"
        rows.append([target.alpha, target.beta, target.theta] +
                    list(solution.angles.as_array()) +
                    [int(solution.singular), solution.gate_error, status])
    _write_rows(out, SOLVE_BATCH_FIELDS, rows)
    print("{} of {} rotations solved".format(len(rows) - failed, len(rows)))
    return failed


def cmd_solve(args: argparse.Namespace) -> int:
    seed = resolve_seed(args, required=False)
    config = _synthesis_config(args, seed)
    out = _output_path(args.out)
    run = manifest.RunManifest.start("solve", {
        "flags": _flag_config(args),
        "synthesis": config
    }, {"seed": seed})
    failed = 0
    if args.batch:
        run.record_input(args.batch)
        failed = _solve_batch(args.batch, out, args.corrected, config)
    else:
        if len(args.values) != 3:
            raise UsageError("solve takes three angles or --batch FILE")
        if args.angles:
            solution = pulseforge.solve_angles(
                pulseforge.XZXAngles(*args.values), args.corrected, config)
        else:
            solution = pulseforge.solve_rotation(*args.values,
                                                 corrected=args.corrected,
                                                 config=config)
        pulseforge.write_sequence_file(out, solution)
        _print_solution(solution)
    run.record_output(out)
    run.finish().write(out)
    if failed:
        raise CriterionFailure("{} rotations failed; see {}".format(
            failed, out))
    return EXIT_OK


def cmd_gen_dataset(args: argparse.Namespace) -> int:
    seed = resolve_seed(args, required=True)
    task = dataset.Task(args.task)
    grid_config = dataset.GridConfig(
        alphas_per_interval=args.alphas_per_interval,
        n_beta=args.n_beta,
        n_theta=args.n_theta,
        sampling=dataset.AlphaSampling(args.sampling))
    grid = dataset.build_grid(grid_config)
    out = _output_path(args.out)
    settings = {"flags": _flag_config(args), "grid": grid_config}
    extra = {}
    if task is dataset.Task.NAIVE:
        records = dataset.generate_naive_corpus(grid, args.include_singular,
                                                args.jmax, args.workers,
                                                _verbose(args))
        if args.max_points is not None:
            records = dataset.subsample(records, args.max_points, seed)
    else:
        config = _synthesis_config(args, seed)
        budget = dataset.CorpusBudget(
            args.max_points if args.max_points is not None else
            dataset.CorpusBudget.max_points, args.max_seconds, seed)
        settings.update(synthesis=config, budget=budget)
        corpus = dataset.generate_corrected_corpus(grid,
                                                   budget,
                                                   config,
                                                   workers=args.workers,
                                                   verbosity=_verbose(args))
        if not corpus.records:
            raise CriterionFailure("No corrected record converged")
        records = corpus.records
        extra = {
            "attempted": corpus.attempted,
            "convergence_rate": corpus.convergence_rate
        }
    run = manifest.RunManifest.start("gen-dataset", settings, {"seed": seed})
    dataset.write_corpus(out, records, seed, extra)
    run.record_output(out)
    if args.csv:
        run.record_output(dataset.export_csv(_output_path(args.csv), records))
    run.finish().write(out)
    print("Wrote {} {} records to {}".format(len(records), task.value, out))
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    seed = resolve_seed(args, required=True)
    corpus = dataset.read_corpus(args.corpus)
    if args.task and dataset.Task(args.task) is not corpus.task:
        raise UsageError("{} holds a {} corpus, not {}".format(
            args.corpus, corpus.task.value, args.task))
    records = corpus.records
    if args.subsample:
        records = dataset.subsample(records, args.subsample, seed)
    config = neuralnet.TrainConfig(learning_rate=args.lr,
                                   epochs=args.epochs,
                                   bin_size=args.bin_size,
                                   seed=seed,
                                   eval_epochs=args.eval_epochs,
                                   eval_every=args.eval_every,
                                   slice_points=args.slice_points,
                                   verbosity=_verbose(args))
    run = manifest.RunManifest.start("train", {
        "flags": _flag_config(args),
        "training": config
    }, {"seed": seed})
    run.record_input(args.corpus)

    model = neuralnet.MLPModel.for_task(corpus.task, args.neurons, seed,
                                        corpus.jmax)
    trained, curve = neuralnet.train(model, records, config)

    out = _output_path(args.out)
    neuralnet.save_checkpoint(out, trained, {"records": len(records)})
    curve_path = _output_path(args.curve or str(out) + ".curve.csv")
    curve.write_csv(curve_path)
    run.record_output(out)
    run.record_output(curve_path)
    run.finish().write(out)
    if curve.rows:
        final = curve.final
        print("Final slice errors: alpha {:.3e}, beta {:.3e}, theta {:.3e} "
              "(mean {:.3e})".format(final.alpha, final.beta, final.theta,
                                     final.mean))
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    model = neuralnet.load_checkpoint(args.checkpoint)
    out = _output_path(args.out)
    run = manifest.RunManifest.start("predict", _flag_config(args),
                                     {"model": model.seed})
    run.record_input(args.checkpoint)
    if args.batch:
        run.record_input(args.batch)
        outputs = (dataset.NAIVE_TARGET_FIELDS if model.task is
                   dataset.Task.NAIVE else supcode.PARAM_NAMES)
        rows = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for target in _read_rotations(args.batch):
                solution = pulseforge.predict_gate(model, target)
                values = (solution.angles.as_array()
                          if solution.params is None else
                          solution.params.as_array())
                rows.append([target.alpha, target.beta, target.theta] +
                            list(values) + [solution.gate_error])
        _write_rows(out, ROTATION_FIELDS + outputs + ("gate_error", ), rows)
        print("Wrote {} predictions to {}".format(len(rows), out))
    else:
        if len(args.values) != 3:
            raise UsageError("predict takes three angles or --batch FILE")
        solution = pulseforge.predict_gate(model,
                                           pulseforge.AxisAngle(*args.values))
        pulseforge.write_sequence_file(out, solution)
        _print_solution(solution)
    run.record_output(out)
    run.finish().write(out)
    return EXIT_OK


def cmd_study(args: argparse.Namespace) -> int:
    corpus = dataset.read_corpus(args.corpus)
    records = corpus.records
    if args.subsample:
        records = dataset.subsample(records, args.subsample, args.seeds[0])
    if not records:
        raise UsageError("{} holds no records".format(args.corpus))
    config = neuralnet.TrainConfig(learning_rate=args.lr,
                                   epochs=args.epochs,
                                   bin_size=args.bin_size,
                                   slice_points=args.slice_points,
                                   verbosity=_verbose(args))
    run = manifest.RunManifest.start("study", {
        "flags": _flag_config(args),
        "training": config
    }, {"seeds": list(args.seeds)})
    run.record_input(args.corpus)

    if args.vary == "lr":
        results = neuralnet.learning_rate_study(records, args.values,
                                                args.seeds, config,
                                                args.neurons)
    else:
        counts = [int(value) for value in args.values]
        if any(count != value or count < 1
               for count, value in zip(counts, args.values)):
            raise UsageError("neuron counts must be positive integers, got "
                             "{}".format(args.values))
        results = neuralnet.capacity_study(records, counts, args.seeds,
                                           config)

    rows = []
    for value, result in results.items():
        print("{} {}: {:.3e} +- {:.3e}".format(args.vary, value, result.mean,
                                               result.spread))
        rows.extend([value, seed, final]
                    for seed, final in zip(args.seeds, result.finals))
    out = _write_rows(_output_path(args.out), STUDY_FIELDS, rows)
    run.record_output(out)
    run.finish().write(out)
    return EXIT_OK


def _sweep_grid(args: argparse.Namespace) -> np.ndarray:
    return pulsesim.log_grid(args.low, args.high, args.num)


def cmd_sweep(args: argparse.Namespace) -> int:
    solution = pulseforge.read_sequence_file(args.sequence)
    axis = pulsesim.NoiseAxis(args.axis)
    out = _output_path(args.out)
    run = manifest.RunManifest.start("sweep", _flag_config(args), {})
    run.record_input(args.sequence)
    points = pulseforge.sweep_solution(solution, axis, _sweep_grid(args),
                                       pulsesim.ChargeCoupling(args.coupling))
    pulsesim.write_sweep_csv(out, {solution.kind: points})
    run.record_output(out)
    run.finish().write(out)
    try:
        print("{} sweep along {}: log-log slope {:.3f}".format(
            solution.kind, axis.value, pulsesim.loglog_slope(points)))
    except ValueError as err:
        logger.warning("No slope: %s", err)
    return EXIT_OK


def cmd_compare_noise(args: argparse.Namespace) -> int:
    seed = resolve_seed(args, required=False)
    config = _synthesis_config(args, seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = np.union1d(_sweep_grid(args), [COMPARISON_AMPLITUDE])
    run = manifest.RunManifest.start("compare-noise", {
        "flags": _flag_config(args),
        "synthesis": config,
        "grid": grid
    }, {"seed": seed})

    breaches = []
    for index in sorted(set(args.rotation or COMPARISON_INDICES)):
        rotation = pulseforge.COMPARISON_ROTATIONS[index - 1]
        solution, report = pulseforge.compare_noise(rotation, config, grid)
        sequence_path = pulseforge.write_sequence_file(
            out_dir / "rotation{}.json".format(index), solution)
        run.record_output(sequence_path)
        for axis in pulsesim.NoiseAxis:
            corrected, naive = report.sweeps[axis]
            path = pulsesim.write_sweep_csv(
                out_dir / "rotation{}_{}.csv".format(index, axis.value), {
                    "naive": naive,
                    "corrected": corrected
                })
            run.record_output(path)
            print("rotation {} {}:".format(index, axis.value))
            breaches.extend(
                "{} ({})".format(message, path)
                for message in _slope_breaches({
                    "naive": naive,
                    "corrected": corrected
                }))
            if dict(corrected)[COMPARISON_AMPLITUDE] >= dict(
                    naive)[COMPARISON_AMPLITUDE]:
                breaches.append(
                    "rotation {} {}: corrected error not below naive at "
                    "{}".format(index, axis.value, COMPARISON_AMPLITUDE))
    run.finish().write(out_dir)
    if breaches:
        raise CriterionFailure("; ".join(breaches))
    return EXIT_OK


'''
=================
Reports
=================
'''


def _slope_breaches(sweeps: Dict[str, Sequence[Tuple[float, float]]]
                    ) -> List[str]:
    breaches = []
    for sequence_id, points in sweeps.items():
        slope = pulsesim.loglog_slope(points)
        print("  {}: slope {:.3f}".format(sequence_id, slope))
        for key, (expected, tolerance) in SLOPE_CRITERIA.items():
            if key in sequence_id and abs(slope - expected) > tolerance:
                breaches.append("{} slope {:.3f} outside {}+-{}".format(
                    sequence_id, slope, expected, tolerance))
    return breaches


def _curve_breaches(curve: neuralnet.LearningCurve,
                    max_error: float) -> List[str]:
    if not curve.rows:
        return ["empty learning curve"]
    breaches = []
    final_epoch = curve.rows[-1][0]
    final = curve.final
    print("  epoch {}: slice mean {:.3e} (alpha window {:.3e})".format(
        final_epoch, final.mean, final.alpha_window))
    if not final.mean < max_error:
        breaches.append("final slice error {:.3e} not below {:.1e}".format(
            final.mean, max_error))
    epochs = [row[0] for row in curve.rows]
    trend = [curve.at(epoch).mean for epoch in TREND_EPOCHS if epoch in epochs]
    if len(trend) > 1 and not all(
            later < earlier for earlier, later in zip(trend, trend[1:])):
        breaches.append("slice error not decreasing over epochs {}".format(
            [epoch for epoch in TREND_EPOCHS if epoch in epochs]))
    return breaches


def cmd_report(args: argparse.Namespace) -> int:
    breaches = []
    for name in args.files:
        path = Path(name)
        if not path.is_file():
            raise UsageError("No such file: {}".format(path))
        with path.open(newline="") as handle:
            header = tuple(next(csv.reader(handle), ()))
        print(path)
        if header == pulsesim.SWEEP_CSV_FIELDS:
            found = _slope_breaches(pulsesim.read_sweep_csv(path))
        elif header == neuralnet.CURVE_FIELDS:
            found = _curve_breaches(neuralnet.read_curve_csv(path),
                                    args.max_error)
        else:
            raise UsageError("{}: not a sweep or learning-curve CSV".format(
                path))
        breaches.extend("{}: {}".format(path, message) for message in found)
    for message in breaches:
        print("FAIL " + message)
    if breaches:
        return EXIT_FAILURE
    print("PASS")
    return EXIT_OK


'''
=================
Parser
=================
'''


def _add_synthesis_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--jmax", type=float, default=30.0,
                        help="Exchange ceiling (units of h)")
    parser.add_argument("--tol", type=float, default=1e-9,
                        help="Residual tolerance of corrected synthesis")
    parser.add_argument("--starts", type=int, default=64,
                        help="Random multistart seeds per synthesis")
    parser.add_argument("--coupling",
                        choices=[c.value for c in pulsesim.ChargeCoupling],
                        default=pulsesim.ChargeCoupling.PROPORTIONAL.value)


def _add_grid_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--low", type=float, default=1e-3)
    parser.add_argument("--high", type=float, default=1e-1)
    parser.add_argument("--num", type=int, default=21)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulseforge",
        description="Pulse sequences for singlet-triplet qubit gates")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress, -vv for debug output")
    parser.add_argument("--version", action="version",
                        version="%(prog)s " + pulseforge.__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=None,
                        help="Random seed (fallback: $" + SEED_ENV + ")")

    solve = commands.add_parser("solve", parents=[seeded],
                                help="Pulse sequence for one or many gates")
    solve.add_argument("values", nargs="*", type=float,
                       help="alpha beta theta (or phi_a phi_b phi_c with "
                       "--angles)")
    solve.add_argument("--angles", action="store_true",
                       help="Values are x-z-x angles")
    solve.add_argument("--corrected", action="store_true",
                       help="Synthesize the noise-corrected sequence")
    solve.add_argument("--batch", help="CSV of rotations; writes a "
                       "per-row status CSV")
    solve.add_argument("--out", required=True)
    _add_synthesis_flags(solve)
    solve.set_defaults(handler=cmd_solve)

    gen = commands.add_parser("gen-dataset", parents=[seeded],
                              help="Generate a training corpus")
    gen.add_argument("--task", choices=[t.value for t in dataset.Task],
                     default=dataset.Task.NAIVE.value)
    gen.add_argument("--out", required=True)
    gen.add_argument("--csv", help="Also export an inspection CSV")
    gen.add_argument("--alphas-per-interval", type=int, default=20)
    gen.add_argument("--n-beta", type=int, default=20)
    gen.add_argument("--n-theta", type=int, default=40)
    gen.add_argument("--sampling",
                     choices=[s.value for s in dataset.AlphaSampling],
                     default=dataset.AlphaSampling.COSINE.value)
    gen.add_argument("--include-singular", action="store_true")
    gen.add_argument("--max-points", type=int, default=None)
    gen.add_argument("--max-seconds", type=float, default=None)
    gen.add_argument("--workers", type=int, default=1)
    _add_synthesis_flags(gen)
    gen.set_defaults(handler=cmd_gen_dataset)

    train = commands.add_parser("train", parents=[seeded],
                                help="Train a network on a corpus")
    train.add_argument("corpus")
    train.add_argument("--task", choices=[t.value for t in dataset.Task])
    train.add_argument("--out", required=True)
    train.add_argument("--curve", help="Learning-curve CSV (default "
                       "<out>.curve.csv)")
    train.add_argument("--epochs", type=int, default=500)
    train.add_argument("--neurons", type=int, default=100)
    train.add_argument("--lr", type=float, default=0.005)
    train.add_argument("--bin-size", type=int, default=1)
    train.add_argument("--subsample", type=int, default=None)
    train.add_argument("--eval-epochs", type=int, nargs="*", default=None)
    train.add_argument("--eval-every", type=int, default=10)
    train.add_argument("--slice-points", type=int, default=100)
    train.set_defaults(handler=cmd_train)

    study = commands.add_parser(
        "study", help="Final slice error against learning rate or hidden "
        "width, over several seeds")
    study.add_argument("corpus")
    study.add_argument("--vary", choices=["lr", "neurons"], required=True)
    study.add_argument("--values", type=float, nargs="+", required=True)
    study.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    study.add_argument("--out", required=True, help="Per-seed results CSV")
    study.add_argument("--epochs", type=int, default=500)
    study.add_argument("--neurons", type=int, default=100,
                       help="Hidden width of a learning-rate study")
    study.add_argument("--lr", type=float, default=0.005,
                       help="Learning rate of a capacity study")
    study.add_argument("--bin-size", type=int, default=1)
    study.add_argument("--subsample", type=int, default=None)
    study.add_argument("--slice-points", type=int, default=100)
    study.set_defaults(handler=cmd_study)

    predict = commands.add_parser("predict",
                                  help="Sequences proposed by a network")
    predict.add_argument("checkpoint")
    predict.add_argument("values", nargs="*", type=float,
                         help="alpha beta theta")
    predict.add_argument("--batch", help="CSV of rotations")
    predict.add_argument("--out", required=True)
    predict.set_defaults(handler=cmd_predict)

    sweep = commands.add_parser("sweep", help="Gate error against static "
                                "noise for a sequence file")
    sweep.add_argument("sequence")
    sweep.add_argument("--axis", choices=[a.value for a in pulsesim.NoiseAxis],
                       default=pulsesim.NoiseAxis.HYPERFINE.value)
    sweep.add_argument("--coupling",
                       choices=[c.value for c in pulsesim.ChargeCoupling],
                       default=pulsesim.ChargeCoupling.PROPORTIONAL.value)
    sweep.add_argument("--out", required=True)
    _add_grid_flags(sweep)
    sweep.set_defaults(handler=cmd_sweep)

    compare = commands.add_parser(
        "compare-noise", parents=[seeded],
        help="Naive vs corrected sweeps for two rotations on both axes")
    compare.add_argument("--out", required=True, help="Output directory")
    compare.add_argument("--rotation", type=int, action="append",
                         choices=COMPARISON_INDICES,
                         help="Only this comparison rotation (repeatable)")
    _add_synthesis_flags(compare)
    _add_grid_flags(compare)
    compare.set_defaults(handler=cmd_compare_noise)

    report = commands.add_parser("report", help="Check sweep and "
                                 "learning-curve CSVs against thresholds")
    report.add_argument("files", nargs="+")
    report.add_argument("--max-error", type=float, default=1e-2,
                        help="Ceiling on the final slice-averaged error")
    report.set_defaults(handler=cmd_report)
    return parser


def _configure_logging(verbose: int):
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _fail(message: str, code: int) -> int:
    print("pulseforge: error: {}".format(message), file=sys.stderr)
    return code


# Exception types mapped to exit codes, most specific first
_EXIT_CODES: Tuple[Tuple[type, int], ...] = (
    (UsageError, EXIT_USAGE),
    (neuralnet.TaskMismatchError, EXIT_USAGE),
    (dataset.CorpusFormatError, EXIT_USAGE),
    (neuralnet.CheckpointFormatError, EXIT_USAGE),
    (pulseforge.SequenceFileError, EXIT_USAGE),
    (OSError, EXIT_USAGE),
    (CriterionFailure, EXIT_FAILURE),
    (supcode.SynthesisFailedError, EXIT_FAILURE),
    (neuralnet.TrainingDivergedError, EXIT_FAILURE),
    (neuralnet.OutputRangeError, EXIT_FAILURE),
    (ValueError, EXIT_USAGE),
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except tuple(exc for exc, _ in _EXIT_CODES) as err:
        code = next(code for exc, code in _EXIT_CODES
                    if isinstance(err, exc))
        if isinstance(err, dataset.CorpusFormatError):
            return _fail("{}: {}".format(args.corpus, err), code)
        return _fail(str(err), code)


if __name__ == "__main__":
    sys.exit(main())
