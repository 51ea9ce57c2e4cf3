# -*- coding: utf-8 -*-
"""Batch command line: run, simulate, gen, report, seeds.

Every flag can also be given through an environment variable with the MSDESIGN_ prefix
(MSDESIGN_RESOLUTION=32, MSDESIGN_MOMENTUM=off, ...); an explicit flag wins.
Exit codes: 0 success, 1 simulation failure, 2 configuration fault, 3 I/O fault.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import structlog
from pydantic import ValidationError as PydanticValidationError

from ..exceptions import SimulationError, ValidationError
from ..hooks import data_path, load_manifest, package_version, post_init_hook, seed_library_hook
from ..models.design_orchestrator import METHODS, SweepConfig, load_results, run_benchmark, write_aggregate
from ..models.design_session import RunSettings
from ..models.design_simulator import make_evaluator
from ..models.design_task import load_task
from ..models.homogenization import SolverConfig
from ..models.microstructure import CONDITIONING_DIM, LevelSet, VoxelGrid, generate

_logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_SIMULATION = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _env(name, default):
    """Flag default from MSDESIGN_<NAME>; argparse applies the flag's type to string defaults"""
    return os.environ.get(f"{load_manifest()['env_prefix']}{name}", default)


def _csv(text):
    return [item.strip() for item in str(text).split(',') if item.strip()]


def _seeds(text):
    try:
        return [int(item) for item in _csv(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got '{text}'")


def _switch(text):
    value = str(text).lower()
    if value in ('on', 'true', '1', 'yes'):
        return True
    if value in ('off', 'false', '0', 'no'):
        return False
    raise argparse.ArgumentTypeError(f"expected on or off, got '{text}'")


def _bundled_library():
    return str(data_path(load_manifest()['seed_library']))


def _optional_path(text):
    if str(text).lower() in ('off', 'none', ''):
        return None
    return str(text)


def _coords(text):
    try:
        values = [float(item) for item in _csv(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"coordinates must be numbers, got '{text}'")
    if len(values) != CONDITIONING_DIM:
        raise argparse.ArgumentTypeError(f"expected {CONDITIONING_DIM} coordinates, got {len(values)}")
    return np.array(values)


def _add_solver_flags(parser):
    parser.add_argument('--resolution', type=int, default=_env('RESOLUTION', 16), help="voxels per cell edge")
    parser.add_argument('--residual-tol', type=float, default=_env('RESIDUAL_TOL', 1e-6))
    parser.add_argument('--max-iterations', type=int, default=_env('MAX_ITERATIONS', 20000))


def build_parser():
    manifest = load_manifest()
    parser = argparse.ArgumentParser(prog='msdesign', description=manifest['summary'], epilog=manifest['description'],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('--version', action='version', version=f"{manifest['name']} {package_version()}")
    parser.add_argument('-v', '--verbose', action='count', default=0, help="-v info, -vv debug")
    parser.add_argument('--json-logs', action='store_true', help="emit logs as JSON lines")
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help="benchmark sweep over tasks, methods and seeds")
    run.add_argument('--tasks', type=Path, nargs='+', default=[Path(_env('TASKS', data_path('data/tasks')))])
    run.add_argument('--methods', type=_csv, default=_env('METHODS', 'saes,nsga2,random,oneshot'))
    run.add_argument('--seeds', type=_seeds, default=_env('SEEDS', '0,1,2,3'))
    run.add_argument('--out', type=Path, default=_env('OUT', 'results'))
    run.add_argument('--workers', type=int, default=_env('WORKERS', 1), help="concurrent sweep cells")
    run.add_argument('--eval-workers', type=int, default=_env('EVAL_WORKERS', 1),
                     help="concurrent candidate evaluations inside one run")
    run.add_argument('--momentum', type=_switch, default=_env('MOMENTUM', 'on'))
    run.add_argument('--clamp', type=_switch, default=_env('CLAMP', 'on'), help="clamp E targets into range")
    run.add_argument('--early-stop', type=_switch, default=_env('EARLY_STOP', 'on'),
                     help="stop a run at its first satisfying design; 'off' spends the whole budget")
    run.add_argument('--physics', choices=('fea', 'scaling'), default=_env('PHYSICS', 'fea'))
    run.add_argument('--seed-library', type=_optional_path, default=_env('SEED_LIBRARY', _bundled_library()),
                     help="retrieval seed library; built on first use, 'off' disables seeding")
    _add_solver_flags(run)

    simulate = commands.add_parser('simulate', help="effective properties of one geometry")
    simulate.add_argument('--task', type=Path, required=True, help="task file naming material and properties")
    source = simulate.add_mutually_exclusive_group(required=True)
    source.add_argument('--coords', type=_coords, help="conditioning vector x,y,z")
    source.add_argument('--grid', type=Path, help="VoxelGrid file written by gen")
    simulate.add_argument('--physics', choices=('fea', 'scaling'), default=_env('PHYSICS', 'fea'))
    _add_solver_flags(simulate)

    gen = commands.add_parser('gen', help="write the VoxelGrid of a conditioning vector")
    gen.add_argument('--coords', type=_coords, required=True)
    gen.add_argument('--resolution', type=int, default=_env('RESOLUTION', 16))
    gen.add_argument('--out', type=Path, required=True)

    report = commands.add_parser('report', help="re-aggregate the results of a sweep directory")
    report.add_argument('--out', type=Path, default=_env('OUT', 'results'))

    seeds = commands.add_parser('seeds', help="build the retrieval seed library")
    seeds.add_argument('--out', type=Path, default=_env('SEED_LIBRARY', None))
    seeds.add_argument('--lattice', type=int, default=_env('LATTICE', 5))
    seeds.add_argument('--rebuild', action='store_true')
    _add_solver_flags(seeds)
    return parser


def _solver_config(args):
    return SolverConfig(residual_tol=args.residual_tol, max_iterations=args.max_iterations)


def command_run(args):
    settings = RunSettings(
        resolution=args.resolution,
        physics=args.physics,
        eval_workers=args.eval_workers,
        momentum=args.momentum,
        apply_clamp=args.clamp,
        stop_when_satisfied=args.early_stop,
        seed_library=args.seed_library,
        solver=_solver_config(args),
    )
    config = SweepConfig(tasks=args.tasks, methods=args.methods, seeds=args.seeds, out_dir=args.out,
                         workers=args.workers, settings=settings)
    outcomes = run_benchmark(config)
    failed = [o for o in outcomes if o.result is None]
    print(f"{len(outcomes) - len(failed)} runs written to {config.out_dir} ({len(failed)} failed)")
    print((config.out_dir / 'report.txt').read_text(encoding='utf-8'), end='')
    return EXIT_OK


def command_simulate(args):
    spec = load_task(args.task)
    evaluator = make_evaluator(spec, physics=args.physics, resolution=args.resolution,
                               solver_config=_solver_config(args))
    if args.coords is not None:
        props = evaluator(args.coords)
    else:
        props = evaluator.simulate(VoxelGrid.load(args.grid))
    print(json.dumps({'feasible': props.feasible, 'properties': props.values}, indent=1, sort_keys=True))
    return EXIT_OK


def command_gen(args):
    grid = generate(args.coords, args.resolution)
    grid.save(args.out)
    level_set = LevelSet(args.coords)
    print(f"{args.out}: n={grid.resolution} tau={level_set.tau:.6g} clamped={grid.clamped}")
    return EXIT_OK


def command_report(args):
    results = load_results(args.out)
    if not results:
        raise FileNotFoundError(f"No run files under {args.out}")
    table = write_aggregate(args.out, results)
    print(table.to_text(), end='')
    return EXIT_OK


def command_seeds(args):
    library = seed_library_hook(args.out, resolution=args.resolution, lattice=args.lattice,
                                solver_config=_solver_config(args), rebuild=args.rebuild)
    print(f"{len(library.entries)} seed entries")
    return EXIT_OK


COMMANDS = {
    'run': command_run,
    'simulate': command_simulate,
    'gen': command_gen,
    'report': command_report,
    'seeds': command_seeds,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    post_init_hook(verbosity=args.verbose, json_logs=args.json_logs)
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, PydanticValidationError) as e:
        _logger.error("configuration_fault", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as e:
        _logger.error("simulation_fault", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as e:
        _logger.error("io_fault", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == '__main__':
    sys.exit(main())
