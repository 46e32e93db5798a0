"""
social-dynamics command line.

Usage:
    social-dynamics simulate --model configs/synthetic_coevolution.json --t-end 25 --snapshot-every 1
    social-dynamics learn mcem --model MODEL --snapshots runs/simulate-seed1/snapshots.json
    social-dynamics learn hidden --model MODEL --events events/events.csv
    social-dynamics infer --model MODEL --events events/events.csv --grid 20
    social-dynamics eval --model MODEL --params params.json test/*.csv
    social-dynamics preprocess-events raw_messages.csv --threshold 5
    social-dynamics validate trajectory.csv --model MODEL

Every command writes into its own run directory: the outputs, the resolved
``config.json`` (seed included) and a ``manifest.json`` with input hashes and
library versions.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 finished without
converging.
"""

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy

from . import __version__
from .config import RunConfig
from .data_processing.formats import (
    ModelFile,
    load_model,
    read_events,
    read_params,
    read_snapshots,
    read_trajectory,
    write_events,
    write_marginals,
    write_params,
    write_snapshots,
    write_trajectory,
)
from .data_processing.preprocess_events import EventPreprocessor
from .estimation.evaluation import heldout_table
from .estimation.hidden_em import hidden_mcem_fit
from .estimation.mcem import mcem_fit
from .estimation.moments import MIN_SNAPSHOTS, mom_fit
from .exceptions import SocialDynamicsError, UsageError
from .inference.diagnostics import DiagnosticsLog
from .inference.hidden import (
    EventStream,
    HiddenNetworkSampler,
    initial_consistent_trajectory,
    posterior_link_marginals,
    simulate_event_stream,
    smoothed_link_marginals,
)
from .model.coevolution import CoevolutionModel
from .model.simulation import sample_initial_state, simulate
from .model.state import NetworkState
from .validation.validate_trajectory import TrajectoryValidator

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3


def _banner(title: str) -> None:
    print("=" * 80)
    print(title)
    print("=" * 80)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class Run:
    """
    Run directory of one command: resolved config, manifest and outputs.

    Args:
        command: Verb being run (used in the default directory name)
        config: Resolved run configuration
    """

    def __init__(self, command: str, config: RunConfig):
        self.command = command
        self.config = config
        self.seed = config.resolve_seed()
        name = config["run_name"] or f"{command}-seed{self.seed}"
        self.directory = Path(config["output_dir"]) / name
        self.directory.mkdir(parents=True, exist_ok=True)
        self.inputs: List[Path] = []
        self.outputs: List[Path] = []
        config.save(self.directory / "config.json")

    def path(self, name: str) -> Path:
        return self.directory / name

    def add_input(self, path: Optional[Path]) -> None:
        if path is not None:
            self.inputs.append(Path(path))

    def add_output(self, path: Path) -> Path:
        self.outputs.append(Path(path))
        return path

    def diagnostics(self) -> DiagnosticsLog:
        target = self.path("diagnostics.jsonl")
        if target.exists():
            target.unlink()
        return DiagnosticsLog(target)

    def write_manifest(self, status: str, extra: Optional[Dict[str, Any]] = None) -> Path:
        manifest = {
            "command": self.command,
            "status": status,
            "seed": self.seed,
            "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.inputs if p.is_file()],
            "outputs": [{"path": p.name, "sha256": _sha256(p)} for p in self.outputs if p.is_file()],
            "versions": {
                "social_dynamics": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "pandas": pd.__version__,
            },
            "config": self.config.to_dict(),
        }
        if extra:
            manifest.update(extra)
        path = self.path("manifest.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(manifest, f, ensure_ascii=False, indent=2)
        return path


# -- shared helpers ------------------------------------------------------------------


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig(args.config)
    config.override(seed=args.seed, output_dir=args.output_dir, run_name=args.run_name)
    return config


def _load_model(run: Run, path: str) -> ModelFile:
    run.add_input(Path(path))
    return load_model(path)


def _model_params(run: Run, model_file: ModelFile, params_path: Optional[str], required: bool = True):
    """Parameters from ``--params`` when given, else from the model file."""
    if params_path:
        run.add_input(Path(params_path))
        return read_params(params_path, model_file.definition)
    if required and model_file.params is None:
        raise UsageError("the model file has no parameters; pass --params")
    return model_file.params, model_file.observation


def _check_stream(model_file: ModelFile, events: EventStream) -> None:
    definition = model_file.definition
    if definition.n_attributes:
        raise UsageError("event streams need a link-only model (no attributes)")
    if events.n_actors != definition.n_actors:
        raise UsageError(f"event stream has {events.n_actors} actors, the model declares {definition.n_actors}")
    if events.time_unit != definition.time_unit:
        raise UsageError(f"event stream time unit '{events.time_unit}' differs from the model's "
                         f"'{definition.time_unit}'")


# -- simulate ------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    config.override("simulate", t_end=args.t_end, random_initial=args.random_initial or None)
    settings = config["simulate"]
    t_end = float(settings["t_end"])
    if t_end < 0:
        raise UsageError("--t-end must be non-negative")
    if args.snapshot_times:
        settings["snapshot_times"] = [float(t) for t in args.snapshot_times]
    elif args.snapshot_every:
        if args.snapshot_every <= 0:
            raise UsageError("--snapshot-every must be positive")
        settings["snapshot_times"] = np.arange(0.0, t_end + 1e-12, args.snapshot_every).tolist()
    times = [float(t) for t in settings["snapshot_times"]]
    if any(t < 0 or t > t_end for t in times):
        raise UsageError(f"snapshot times must lie in [0, {t_end}]")

    run = Run("simulate", config)
    _banner("Forward Simulation")
    print(f"Run directory: {run.directory}")

    print("\nStep 1: Loading model...")
    model_file = _load_model(run, args.model)
    params, observation = _model_params(run, model_file, args.params)
    definition = model_file.definition
    model = CoevolutionModel(definition, params)
    print(f"  ✓ {definition.n_actors} actors, {definition.n_attributes} attribute(s), "
          f"{definition.n_network_effects} network effect(s)")

    print("\nStep 2: Simulating...")
    rng = np.random.default_rng(run.seed)
    if model_file.initial_state is not None:
        initial = model_file.initial_state
    elif settings["random_initial"]:
        initial = sample_initial_state(model, rng)
    else:
        initial = NetworkState.empty(definition.n_actors, definition.attributes)
    if args.emit_events:
        if observation is None:
            raise UsageError("--emit-events needs observation rates in the model or parameter file")
        trajectory, stream = simulate_event_stream(model, observation, initial, t_end, rng)
        log_density = None
    else:
        trajectory, log_density = simulate(model, initial, t_end, rng)
        stream = None
    print(f"  ✓ {len(trajectory)} transitions over [0, {t_end:g}]")

    print("\nStep 3: Saving outputs...")
    run.add_output(write_trajectory(trajectory, run.path("trajectory.csv"), definition))
    print("  ✓ Saved: trajectory.csv")
    if stream is not None:
        stream.time_unit = definition.time_unit
        if definition.actor_names:
            stream.actor_names = definition.actor_names
        run.add_output(write_events(stream, run.path("events.csv")))
        print(f"  ✓ Saved: events.csv ({len(stream)} events)")
    if times:
        snapshots = [(t, NetworkState.from_assignment(values, definition.n_actors, definition.attributes))
                     for t, values in trajectory.snapshot(times)]
        run.add_output(write_snapshots(snapshots, run.path("snapshots.json"), definition))
        print(f"  ✓ Saved: snapshots.json ({len(snapshots)} snapshots)")
    run.write_manifest("ok", {"transitions": len(trajectory), "log_density": log_density})
    return EXIT_OK


# -- learn ---------------------------------------------------------------------------


def cmd_learn(args: argparse.Namespace) -> int:
    if args.mode in ("mom", "mcem"):
        if not args.snapshots or args.events:
            raise UsageError(f"learn {args.mode} takes --snapshots (and no --events)")
    elif not args.events or args.snapshots:
        raise UsageError("learn hidden takes --events (and no --snapshots)")

    config = _resolve_config(args)
    section = {"mom": "mom", "mcem": "em", "hidden": "hidden_em"}[args.mode]
    if args.mode == "mom":
        config.override(section, max_iters=args.max_iters, simulations=args.samples)
    elif args.mode == "mcem":
        config.override(section, max_outer_iters=args.max_iters, samples_per_iter=args.samples)
    else:
        config.override(section, max_iters=args.max_iters, samples_per_iter=args.samples)

    model_file = load_model(args.model)
    definition = model_file.definition
    start, observation = (None, None)
    if args.start:
        start, observation = read_params(args.start, definition)

    if args.mode == "hidden":
        events = read_events(args.events)
        _check_stream(model_file, events)
        snapshots = None
    else:
        snapshots = read_snapshots(args.snapshots, definition)
        if args.mode == "mom" and len(snapshots) < MIN_SNAPSHOTS:
            raise UsageError(f"the method of moments needs at least {MIN_SNAPSHOTS} snapshots, "
                             f"got {len(snapshots)}")
        if len(snapshots) < 2:
            raise UsageError("learning from snapshots needs at least two of them")

    run = Run(f"learn-{args.mode}", config)
    for path in (args.model, args.start, args.snapshots, args.events):
        run.add_input(Path(path) if path else None)
    _banner(f"Parameter Estimation ({args.mode})")
    print(f"Run directory: {run.directory}")
    print(f"\nStep 1: Data loaded: "
          + (f"{len(events)} events, {events.n_actors} actors" if snapshots is None
             else f"{len(snapshots)} snapshots, {definition.n_actors} actors"))

    print("\nStep 2: Fitting...")
    if args.mode == "mom":
        fit = mom_fit(snapshots, definition, config.mom_config(), start)
    elif args.mode == "mcem":
        fit = mcem_fit(snapshots, definition, config.em_config(progress=args.progress), start, run.diagnostics())
    else:
        fit = hidden_mcem_fit(events, definition, config.hidden_em_config(progress=args.progress), start,
                              observation or model_file.observation, run.diagnostics())
    print(f"  ✓ {len(fit.trace)} iteration record(s), converged: {fit.converged}")
    for flag in fit.flags:
        print(f"  ⚠️  {flag}")

    print("\nStep 3: Saving outputs...")
    run.add_output(write_params(run.path("params.json"), definition, fit.params, fit.observation, fit))
    trace = run.path("trace.csv")
    fit.trace_frame().to_csv(trace, index=False)
    run.add_output(trace)
    print("  ✓ Saved: params.json, trace.csv")
    run.write_manifest("ok" if fit.converged else "not_converged", {"flags": fit.flags})
    return EXIT_OK if fit.converged else EXIT_NOT_CONVERGED


# -- infer ---------------------------------------------------------------------------


def _grid(t_end: float, size: Optional[int], times: Optional[Sequence[float]]) -> np.ndarray:
    if times:
        grid = np.asarray(sorted(float(t) for t in times))
        if grid[0] < 0 or grid[-1] > t_end:
            raise UsageError(f"grid times must lie in [0, {t_end:g}]")
        return grid
    if size is None or size < 1:
        raise UsageError("--grid must be a positive count")
    return (np.arange(size) + 0.5) * (t_end / size)


def cmd_infer(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    config.override("mh", burn_in=args.burn_in, samples=args.samples, thin=args.thin,
                    rate_scale=args.rate_scale, grid=args.grid)
    schedule = config["mh"]

    model_file = load_model(args.model)
    definition = model_file.definition
    events = read_events(args.events)
    _check_stream(model_file, events)
    grid = _grid(events.t_end, schedule["grid"], args.grid_times)

    run = Run("infer", config)
    for path in (args.model, args.params, args.events):
        run.add_input(Path(path) if path else None)
    params, observation = _model_params(run, model_file, args.params)
    if observation is None:
        raise UsageError("inference needs observation rates (model file or --params)")
    model = CoevolutionModel(definition, params)

    _banner("Hidden Link Inference")
    print(f"Run directory: {run.directory}")
    print(f"\nStep 1: {len(events)} events, {events.n_actors} actors, {len(grid)} grid times")

    print(f"\nStep 2: Computing link marginals ({args.method})...")
    extra: Dict[str, Any] = {}
    if args.method == "exact":
        marginals = smoothed_link_marginals(model, observation, events, grid)
    else:
        sampler = HiddenNetworkSampler(model, observation, events, schedule["rate_scale"])
        result = sampler.run(initial_consistent_trajectory(events), int(schedule["burn_in"]),
                             int(schedule["samples"]), int(schedule["thin"]),
                             np.random.default_rng(run.seed), progress=args.progress)
        marginals = posterior_link_marginals(result.samples, grid, definition.n_actors)
        extra = {"acceptance_rate": result.acceptance_rate, "steps": result.steps}
        print(f"  ✓ {len(result.samples)} samples, acceptance rate {result.acceptance_rate:.3f}")

    print("\nStep 3: Saving outputs...")
    run.add_output(write_marginals(grid, marginals, run.path("marginals.csv")))
    print("  ✓ Saved: marginals.csv")
    run.write_manifest("ok", extra)
    return EXIT_OK


# -- eval ----------------------------------------------------------------------------


def cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    run = Run("eval", config)
    _banner("Held-out Evaluation")
    print(f"Run directory: {run.directory}")

    model_file = _load_model(run, args.model)
    params, _ = _model_params(run, model_file, args.params)
    model = CoevolutionModel(model_file.definition, params)

    print(f"\nStep 1: Loading {len(args.trajectories)} test trajectories...")
    trajectories = []
    for path in args.trajectories:
        run.add_input(Path(path))
        trajectories.append(read_trajectory(path))

    print("\nStep 2: Scoring...")
    table = heldout_table(model, trajectories, [Path(p).name for p in args.trajectories])
    if len(table):
        total = float(table["log_likelihood"].sum())
        table = pd.concat([table, pd.DataFrame([{"trajectory": "total", "log_likelihood": total,
                                                 "impossible": bool(table["impossible"].any())}])],
                          ignore_index=True)
        print(f"  ✓ Total log-likelihood {total:.6g}")
    else:
        print("  - Empty test set")

    out = run.path("loglik.csv")
    table.to_csv(out, index=False, float_format="%.17g")
    run.add_output(out)
    print("\nStep 3: Saved: loglik.csv")
    run.write_manifest("ok")
    return EXIT_OK


# -- preprocess-events ---------------------------------------------------------------


def cmd_preprocess_events(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    config.override("preprocess", threshold=args.threshold, jitter=args.jitter, t_start=args.t_start,
                    t_end=args.t_end, min_sent=args.min_sent, min_received=args.min_received)
    run = Run("preprocess-events", config)
    run.add_input(Path(args.raw))
    settings = config["preprocess"]
    try:
        preprocessor = EventPreprocessor(args.raw, run.directory, seed=run.seed, verbose=True, **settings)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    stream = preprocessor.run()
    for name in ("events.csv", "events.json", "rejects.csv", "processing_report.json"):
        run.add_output(run.path(name))
    run.write_manifest("ok", {"events": len(stream), "actors": stream.n_actors})
    return EXIT_OK


# -- validate ------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    run = Run("validate", config)
    model_file = _load_model(run, args.model)
    params, _ = _model_params(run, model_file, args.params, required=False)
    snapshots = read_snapshots(args.snapshots, model_file.definition) if args.snapshots else None
    run.add_input(Path(args.trajectory))
    validator = TrajectoryValidator(args.trajectory, model_file.definition, run.directory, params, snapshots,
                                    verbose=True)
    passed = validator.validate()
    run.add_output(run.path("validation_report.json"))
    run.write_manifest("ok" if passed else "failed")
    return EXIT_OK if passed else EXIT_RUNTIME


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="social-dynamics",
        description="Continuous-time social network dynamics: simulate, learn, infer, evaluate",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--verbose", "-v", action="count", default=0, help="Increase log verbosity (-v, -vv)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="Random seed (drawn and recorded when omitted)")
    common.add_argument("--output-dir", help="Parent directory of run directories")
    common.add_argument("--run-name", help="Run directory name")
    common.add_argument("--progress", action="store_true", help="Show progress bars")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Forward-sample a trajectory")
    p.add_argument("--model", required=True, help="Model definition JSON")
    p.add_argument("--params", help="Parameter JSON overriding the model file's values")
    p.add_argument("--t-end", type=float, help="Length of the simulated window")
    p.add_argument("--snapshot-times", type=float, nargs="+", help="Record full states at these times")
    p.add_argument("--snapshot-every", type=float, help="Record full states every DT from time 0")
    p.add_argument("--random-initial", action="store_true", help="Draw the initial state from the prior")
    p.add_argument("--emit-events", action="store_true", help="Also emit the event stream of a hidden model")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("learn", parents=[common], help="Estimate parameters")
    p.add_argument("mode", choices=["mom", "mcem", "hidden"])
    p.add_argument("--model", required=True, help="Model definition JSON")
    p.add_argument("--snapshots", help="Snapshot JSON (mom, mcem)")
    p.add_argument("--events", help="Event stream CSV (hidden)")
    p.add_argument("--start", help="Starting parameter JSON")
    p.add_argument("--samples", type=int, help="Samples per iteration (simulations per evaluation for mom)")
    p.add_argument("--max-iters", type=int, help="Iteration budget")
    p.set_defaults(handler=cmd_learn)

    p = sub.add_parser("infer", parents=[common], help="Posterior link marginals from an event stream")
    p.add_argument("--model", required=True, help="Model definition JSON")
    p.add_argument("--events", required=True, help="Event stream CSV")
    p.add_argument("--params", help="Fitted parameter JSON")
    p.add_argument("--grid", type=int, help="Number of evenly spaced grid times")
    p.add_argument("--grid-times", type=float, nargs="+", help="Explicit grid times")
    p.add_argument("--method", choices=["mh", "exact"], default="mh",
                   help="Metropolis-Hastings sampling, or exact smoothing for tiny systems")
    p.add_argument("--burn-in", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--rate-scale", type=float, help="Proposal rate multiplier in (0, 1]")
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser("eval", parents=[common], help="Held-out log-likelihood of test trajectories")
    p.add_argument("--model", required=True, help="Model definition JSON")
    p.add_argument("--params", help="Fitted parameter JSON")
    p.add_argument("trajectories", nargs="*", help="Trajectory CSV files")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("preprocess-events", parents=[common], help="Raw message log to event stream")
    p.add_argument("raw", help="CSV with time,sender,recipients")
    p.add_argument("--threshold", type=int, help="Drop rows with more recipients than this")
    p.add_argument("--jitter", type=float, help="Half-width of the split-row time jitter")
    p.add_argument("--t-start", help="Window start (number or date)")
    p.add_argument("--t-end", help="Window end (number or date)")
    p.add_argument("--min-sent", type=int)
    p.add_argument("--min-received", type=int)
    p.set_defaults(handler=cmd_preprocess_events)

    p = sub.add_parser("validate", parents=[common], help="Check a trajectory against a model")
    p.add_argument("trajectory", help="Trajectory CSV")
    p.add_argument("--model", required=True, help="Model definition JSON")
    p.add_argument("--params", help="Parameter JSON for the likelihood check")
    p.add_argument("--snapshots", help="Snapshots the trajectory must agree with")
    p.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=max(logging.DEBUG, logging.WARNING - 10 * args.verbose),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SocialDynamicsError, OSError) as exc:
        logger.debug("Command failed", exc_info=True)
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
