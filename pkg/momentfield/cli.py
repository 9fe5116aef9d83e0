#!/usr/bin/env python3
"""
Command-line entry point.

Usage:
    momentfield integrate model1.json --variant wc --t-end 200 --set I1=-0.5
    momentfield sweep one_population.yaml --variant bcc --param I --range -10 0 --set N=50
    momentfield gillespie model1.json --t-end 100 --paths 1000 --set I1=-5 --set N=10000
    python -m momentfield.cli --help

Every command writes its results and a manifest.json into --out-dir.
Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 state space too large.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from momentfield import __version__
from momentfield.bifurcation import (
    BifurcationKind,
    ParameterAxis,
    continue_codim2,
    hysteresis_sweep,
    sweep_cycles,
    sweep_equilibria,
)
from momentfield.config import SolverControls, configure_logging, load_network, resolve_seed, resolve_workers
from momentfield.exceptions import ConfigurationError, MomentFieldError
from momentfield.integrate import cycle_from_transient, integrate
from momentfield.models import MarkovState, ModelVariant, MomentState, NetworkConfig, UpRateMode, packed_size
from momentfield.output import (
    ManifestTimer,
    RunManifest,
    finish_run,
    write_atlas,
    write_csv,
    write_ensemble,
    write_fixed_points,
    write_hysteresis,
    write_json,
    write_spectrum,
    write_trajectory,
)
from momentfield.steady_state import find_fixed_points
from momentfield.stochastic import (
    EventLog,
    langevin_run,
    master_evolve,
    power_spectrum,
    run_ensemble,
    simulate_path,
    spectral_peak,
)

logger = logging.getLogger(__name__)

DEFAULT_OUT_DIR = "momentfield-out"


# ========== Helpers ==========


def _moment_state(args: argparse.Namespace, net: NetworkConfig, variant: ModelVariant) -> MomentState:
    nu = np.zeros(net.M) if args.nu is None else np.broadcast_to(np.asarray(args.nu, dtype=float), (net.M,))
    if not variant.has_correlations:
        return MomentState(np.array(nu))
    return MomentState(np.array(nu), np.full(packed_size(net.M), float(args.corr)))


def _markov_counts(args: argparse.Namespace, net: NetworkConfig) -> np.ndarray:
    sizes = net.discrete_sizes
    if args.counts is not None:
        counts = np.broadcast_to(np.asarray(args.counts, dtype=np.int64), (net.M,))
    elif args.nu is not None:
        counts = np.rint(np.broadcast_to(np.asarray(args.nu, dtype=float), (net.M,)) * sizes).astype(np.int64)
    else:
        counts = np.zeros(net.M, dtype=np.int64)
    state = MarkovState(np.array(counts))
    state.check_bounds(sizes)
    return state.n


def _range_axis(name: str, bounds: Sequence[float]) -> ParameterAxis:
    return ParameterAxis(name, float(bounds[0]), float(bounds[1]))


def _controls(args: argparse.Namespace) -> SolverControls:
    return SolverControls(rtol=args.rtol, atol=args.atol)


def _spectrum_outputs(out_dir: Path, stats, segments: int) -> List[Path]:
    spectrum = power_spectrum(stats, segments=segments)
    peaks = {}
    for i in range(stats.M):
        peak = spectral_peak(spectrum, population=i)
        peaks[f"population_{i + 1}"] = None if peak is None else vars(peak)
        if peak is not None:
            print(f"  spectral peak, population {i + 1}: f={peak.frequency:.6g} ({peak.prominence_db:.1f} dB)")
    report = {"segments": spectrum.segments, "fallback": spectrum.fallback, "peaks": peaks}
    return [write_spectrum(out_dir / "spectrum.csv", spectrum), write_json(out_dir / "spectrum.json", report)]


# ========== Commands ==========


def cmd_integrate(args: argparse.Namespace, net: NetworkConfig, manifest: RunManifest) -> List[Path]:
    variant = ModelVariant.parse(args.variant)
    traj = integrate(variant, _moment_state(args, net, variant), net, args.t_end, _controls(args), n_points=args.points)
    print(f"{traj}; final nu = {np.round(traj.final_state.nu, 6).tolist()}")
    return [write_trajectory(args.out_dir / "trajectory.csv", traj)]


def cmd_fixed_points(args: argparse.Namespace, net: NetworkConfig, manifest: RunManifest) -> List[Path]:
    points = find_fixed_points(args.variant, net, workers=args.workers)
    for fp in points:
        print(f"  {fp}")
    return [write_fixed_points(args.out_dir / "fixed_points.json", points)]


def cmd_sweep(args: argparse.Namespace, net: NetworkConfig, manifest: RunManifest) -> List[Path]:
    atlas = sweep_equilibria(
        args.variant, net, _range_axis(args.param, args.range), workers=args.workers, seed_values=args.seed_values
    )
    for point in atlas.points:
        print(f"  {point}")
    return write_atlas(args.out_dir, atlas)


def cmd_codim2(args: argparse.Namespace, net: NetworkConfig, manifest: RunManifest) -> List[Path]:
    first = _range_axis(args.param, args.range)
    second = _range_axis(args.second, args.second_range)
    atlas = sweep_equilibria(args.variant, net, first, workers=args.workers)
    kind = BifurcationKind(args.kind)
    candidates = atlas.points_of(kind)
    if not candidates:
        raise ConfigurationError(f"The {args.param} sweep found no {kind.value} point to continue")
    if args.index >= len(candidates):
        raise ConfigurationError(f"--index {args.index} out of range: {len(candidates)} {kind.value} point(s)")
    curves = continue_codim2(args.variant, net, candidates[args.index], (first, second))
    atlas.merge(curves)
    for curve in curves.curves:
        print(f"  {curve.kind.value} curve with {len(curve.points)} points, termination {curve.termination}")
    return write_atlas(args.out_dir, atlas)


def cmd_cycle(args: argparse.Namespace, net: NetworkConfig, manifest: RunManifest) -> List[Path]:
    variant = ModelVariant.parse(args.variant)
    cycle = cycle_from_transient(variant, _moment_state(args, net, variant), net, args.transient, _controls(args))
    print(f"{cycle}; multipliers = {np.round(cycle.multipliers, 6).tolist()}")
    written = [write_json(args.out_dir / "cycle.json", cycle.to_dict())]
    if args.param is not None:
        axis = _range_axis(args.param, args.range)
        atlas = sweep_cycles(variant, net, axis, cycle, direction=args.direction)
        for point in atlas.points:
            print(f"  {point}")
        written += write_atlas(args.out_dir, atlas, stem="cycles")
    return written


def cmd_gillespie(args: argparse.Namespace, net: NetworkConfig, manifest: RunManifest) -> List[Path]:
    seed = resolve_seed(args.seed)
    manifest.seeds.append(seed)
    counts = _markov_counts(args, net)
    written: List[Path] = []
    if args.event_log:
        with EventLog(args.out_dir / "events.bin") as log:
            simulate_path(net, counts, args.t_end, seed=seed, n_points=args.points, event_log=log)
        written.append(log.path)
    stats = run_ensemble(net, counts, args.t_end, args.paths, seed=seed, n_points=args.points, workers=args.workers)
    nu, cov = stats.settled()
    print(f"{stats}; settled nu = {np.round(nu, 6).tolist()}, max |cov| = {np.max(np.abs(cov)):.3e}")
    written.append(write_ensemble(args.out_dir / "ensemble.csv", stats))
    written += _spectrum_outputs(args.out_dir, stats, args.segments)
    return written


def cmd_master(args: argparse.Namespace, net: NetworkConfig, manifest: RunManifest) -> List[Path]:
    solution = master_evolve(net, MarkovState(_markov_counts(args, net)), args.t_end, n_points=args.points)
    M = net.M
    rows, cols = np.triu_indices(M)
    header = ["t"] + [f"nu_{i + 1}" for i in range(M)] + [f"C_{i + 1}{j + 1}" for i, j in zip(rows, cols)] + ["mass"]
    table = np.column_stack([solution.times, solution.mean, solution.second[:, rows, cols], solution.mass])
    print(f"Master equation over {solution.states.shape[0]} states; final nu = {np.round(solution.mean[-1], 6).tolist()}")
    return [write_csv(args.out_dir / "master.csv", header, table)]


def cmd_langevin(args: argparse.Namespace, net: NetworkConfig, manifest: RunManifest) -> List[Path]:
    seed = resolve_seed(args.seed)
    manifest.seeds.append(seed)
    init = np.zeros(net.M) if args.nu is None else np.broadcast_to(np.asarray(args.nu, dtype=float), (net.M,))
    stats = langevin_run(
        net, init, args.t_end, dt=args.dt, paths=args.paths, seed=seed, n_points=args.points, workers=args.workers
    )
    print(f"{stats}; flagged paths = {int(np.sum(stats.flagged))}")
    return [write_ensemble(args.out_dir / "ensemble.csv", stats)] + _spectrum_outputs(args.out_dir, stats, args.segments)


def cmd_spectrum(args: argparse.Namespace, net: NetworkConfig, manifest: RunManifest) -> List[Path]:
    seed = resolve_seed(args.seed)
    manifest.seeds.append(seed)
    if args.source == "langevin":
        init = np.zeros(net.M) if args.nu is None else np.broadcast_to(np.asarray(args.nu, dtype=float), (net.M,))
        stats = langevin_run(net, init, args.t_end, dt=args.dt, paths=args.paths, seed=seed,
                             n_points=args.points, workers=args.workers)
    else:
        stats = run_ensemble(net, _markov_counts(args, net), args.t_end, args.paths, seed=seed,
                             n_points=args.points, workers=args.workers)
    return _spectrum_outputs(args.out_dir, stats, args.segments)


def cmd_hysteresis(args: argparse.Namespace, net: NetworkConfig, manifest: RunManifest) -> List[Path]:
    values = np.linspace(args.range[0], args.range[1], args.steps)
    if args.runner == "gillespie":
        seed = resolve_seed(args.seed)
        manifest.seeds.append(seed)
        init: Any = _markov_counts(args, net)
    else:
        seed = 0
        init = _moment_state(args, net, ModelVariant.parse(args.variant))
    result = hysteresis_sweep(
        args.runner, net, args.param, values, dwell=args.dwell, variant=args.variant, init=init,
        paths=args.paths, seed=seed, threshold=args.threshold, workers=args.workers,
    )
    print(f"Bistable window in {args.param}: {result.window}")
    return [
        write_hysteresis(args.out_dir / "hysteresis.csv", result),
        write_json(args.out_dir / "hysteresis.json", result.to_dict()),
    ]


COMMANDS: Dict[str, Callable[[argparse.Namespace, NetworkConfig, RunManifest], List[Path]]] = {
    "integrate": cmd_integrate,
    "fixed-points": cmd_fixed_points,
    "sweep": cmd_sweep,
    "codim2": cmd_codim2,
    "cycle": cmd_cycle,
    "gillespie": cmd_gillespie,
    "master": cmd_master,
    "langevin": cmd_langevin,
    "spectrum": cmd_spectrum,
    "hysteresis": cmd_hysteresis,
}


# ========== Parser ==========


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="Network file (JSON or YAML) or a bundled config name")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="NAME=VALUE",
                        help="Override a network parameter (repeatable), e.g. I1=-2 or N=500")
    common.add_argument("--out-dir", type=Path, default=Path(DEFAULT_OUT_DIR), help="Output directory")
    common.add_argument("--workers", type=int, default=None, help="Worker threads (default: CPU count)")
    common.add_argument("--seed", type=int, default=None, help="Base seed (default: $MOMENTFIELD_SEED)")
    common.add_argument("--log-level", default="WARNING", help="Logging level")
    common.add_argument("--variant", default="wc", help="wc, infinite, bcc, bressloff or rt")
    common.add_argument("--nu", type=float, nargs="+", default=None, help="Initial activities")
    common.add_argument("--corr", type=float, default=0.0, help="Initial value of every correlation entry")
    common.add_argument("--counts", type=int, nargs="+", default=None, help="Initial Markov counts")
    common.add_argument("--up-rate", default=None, choices=[m.value for m in UpRateMode],
                        help="Markov up-rate convention (default: the network file's)")
    common.add_argument("--rtol", type=float, default=SolverControls.rtol)
    common.add_argument("--atol", type=float, default=SolverControls.atol)

    parser = argparse.ArgumentParser(prog="momentfield", description="Moment systems of stochastic neural populations")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integrate", parents=[common], help="Integrate a moment system")
    p.add_argument("--t-end", type=float, default=200.0)
    p.add_argument("--points", type=int, default=1001)

    sub.add_parser("fixed-points", parents=[common], help="Find and classify equilibria")

    p = sub.add_parser("sweep", parents=[common], help="Continue equilibria in one parameter")
    p.add_argument("--param", required=True)
    p.add_argument("--range", type=float, nargs=2, required=True, metavar=("LOW", "HIGH"))
    p.add_argument("--seed-values", type=int, default=3)

    p = sub.add_parser("codim2", parents=[common], help="Continue a fold or Hopf point in two parameters")
    p.add_argument("--param", required=True)
    p.add_argument("--range", type=float, nargs=2, required=True, metavar=("LOW", "HIGH"))
    p.add_argument("--second", default="n")
    p.add_argument("--second-range", type=float, nargs=2, default=(1e-5, 0.05), metavar=("LOW", "HIGH"))
    p.add_argument("--kind", choices=["LP", "H"], default="LP")
    p.add_argument("--index", type=int, default=0, help="Which point of that kind to continue")

    p = sub.add_parser("cycle", parents=[common], help="Find a limit cycle and optionally continue it")
    p.add_argument("--transient", type=float, default=200.0)
    p.add_argument("--param", default=None)
    p.add_argument("--range", type=float, nargs=2, default=None, metavar=("LOW", "HIGH"))
    p.add_argument("--direction", type=float, default=1.0)

    for name, text in (("gillespie", "Exact Markov ensembles"), ("spectrum", "Averaged power spectra")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--t-end", type=float, default=100.0)
        p.add_argument("--paths", type=int, default=100)
        p.add_argument("--points", type=int, default=2001)
        p.add_argument("--segments", type=int, default=8)
        if name == "gillespie":
            p.add_argument("--event-log", action="store_true", help="Write the events of path 0 to events.bin")
        else:
            p.add_argument("--source", choices=["gillespie", "langevin"], default="gillespie")
            p.add_argument("--dt", type=float, default=1e-2)

    p = sub.add_parser("master", parents=[common], help="Integrate the master equation of a small network")
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--points", type=int, default=101)

    p = sub.add_parser("langevin", parents=[common], help="Euler-Maruyama Langevin ensembles")
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--paths", type=int, default=100)
    p.add_argument("--points", type=int, default=2001)
    p.add_argument("--segments", type=int, default=8)

    p = sub.add_parser("hysteresis", parents=[common], help="Up and down parameter sweeps")
    p.add_argument("--runner", choices=["ode", "gillespie"], default="ode")
    p.add_argument("--param", required=True)
    p.add_argument("--range", type=float, nargs=2, required=True, metavar=("LOW", "HIGH"))
    p.add_argument("--steps", type=int, default=41)
    p.add_argument("--dwell", type=float, default=100.0)
    p.add_argument("--paths", type=int, default=100)
    p.add_argument("--threshold", type=float, default=0.1)
    return parser


def run(args: argparse.Namespace, argv: Sequence[str]) -> None:
    """Execute one parsed command and write its manifest."""
    if args.command == "cycle" and (args.param is None) != (args.range is None):
        raise ConfigurationError("--param and --range go together")
    args.workers = resolve_workers(args.workers)
    net = load_network(args.config, args.overrides)
    if args.up_rate is not None:
        net = net.with_up_rate(args.up_rate)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    options = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    manifest = RunManifest(command=list(argv), config=net.to_dict(), options=options)
    with ManifestTimer(manifest):
        outputs = COMMANDS[args.command](args, net, manifest)
    finish_run(args.out_dir, manifest, outputs)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the command and map errors to exit codes."""
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        run(args, argv)
    except MomentFieldError as e:
        print(f"Error: {e}", file=sys.stderr)
        logger.debug("Command failed", exc_info=True)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
