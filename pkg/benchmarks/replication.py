#!/usr/bin/env python3
"""
Replication benchmarks.

Two long-running checks that are too slow for the test suite:

    python benchmarks/replication.py synthetic   # MCEM against MoM on held-out trajectories
    python benchmarks/replication.py hidden      # event-rate recovery by hidden-model EM

Each writes a JSON report into ``--output-dir``.
"""

import argparse
import json
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tools"))

from social_dynamics.config import RunConfig  # noqa: E402
from social_dynamics.data_processing.formats import load_model, parse_model  # noqa: E402
from social_dynamics.estimation.evaluation import heldout_loglik, total_loglik  # noqa: E402
from social_dynamics.estimation.hidden_em import HiddenEMConfig, hidden_mcem_fit  # noqa: E402
from social_dynamics.estimation.mcem import mcem_fit  # noqa: E402
from social_dynamics.estimation.moments import mom_fit  # noqa: E402
from social_dynamics.inference.hidden import ObservationParams, observation_statistics, simulate_event_stream  # noqa: E402
from social_dynamics.model.coevolution import CoevolutionModel  # noqa: E402
from social_dynamics.model.simulation import sample_initial_state, simulate  # noqa: E402
from social_dynamics.model.state import NetworkState  # noqa: E402

INTERVALS = (7, 13, 25)
HELDOUT_TRAJECTORIES = 100
HELDOUT_WINDOW = 7.0

HIDDEN_MODEL = {
    "time_unit": "day",
    "actors": 5,
    "network_effects": ["density", "reciprocity", "activity", "popularity"],
    "link_prior": 0.3,
    "parameters": {
        "network_rate": 0.2,
        "network_weights": [-0.5, 1.0, 0.1, 0.1],
        "observation_rates": {"0,0": 0.3, "0,1": 0.8, "1,0": 1.5, "1,1": 2.5},
    },
}
HIDDEN_WINDOW = 400.0
MIN_EVENTS_PER_CONTEXT = 200
RECOVERY_TOLERANCE = 0.25


class ReplicationBenchmark:
    """
    Runs one benchmark and writes its report.

    Args:
        name: ``synthetic`` or ``hidden``
        output_dir: Directory receiving ``<name>_report.json``
        seed: Root seed
    """

    def __init__(self, name: str, output_dir: Path, seed: int):
        self.name = name
        self.output_dir = Path(output_dir)
        self.seed = seed
        self.results: Dict[str, Any] = {}
        self.passed = False

    def run(self) -> bool:
        print("=" * 80)
        print(f"Replication Benchmark: {self.name}")
        print("=" * 80)
        if self.name == "synthetic":
            self._synthetic()
        else:
            self._hidden()
        self._save_report()
        print("\n" + "=" * 80)
        print("PASSED" if self.passed else "FAILED")
        print("=" * 80)
        return self.passed

    def _synthetic(self) -> None:
        model_file = load_model(ROOT / "configs" / "synthetic_coevolution.json")
        definition = model_file.definition
        truth = CoevolutionModel(definition, model_file.params)
        config = RunConfig(ROOT / "configs" / "learn_mcem.json").override(seed=self.seed)
        rng = np.random.default_rng(self.seed)

        print("\nStep 1: Simulating held-out trajectories...")
        heldout = [simulate(truth, sample_initial_state(truth, rng), HELDOUT_WINDOW, rng).trajectory
                   for _ in range(HELDOUT_TRAJECTORIES)]
        print(f"  ✓ {len(heldout)} trajectories of length {HELDOUT_WINDOW:g}")

        rows: List[Dict[str, Any]] = []
        for step, intervals in enumerate(INTERVALS, start=2):
            print(f"\nStep {step}: {intervals} observation intervals...")
            trajectory = simulate(truth, sample_initial_state(truth, rng), float(intervals), rng).trajectory
            snapshots = [(t, NetworkState.from_assignment(values, definition.n_actors, definition.attributes))
                         for t, values in trajectory.snapshot(np.arange(intervals + 1, dtype=float))]
            em = mcem_fit(snapshots, definition, config.em_config())
            mom = mom_fit(snapshots, definition, config.mom_config())
            row = {
                "intervals": intervals,
                "mcem": total_loglik(heldout_loglik(CoevolutionModel(definition, em.params), heldout)),
                "mom": total_loglik(heldout_loglik(CoevolutionModel(definition, mom.params), heldout)),
                "mcem_converged": em.converged,
                "mom_converged": mom.converged,
            }
            rows.append(row)
            print(f"  ✓ held-out log-likelihood: MCEM {row['mcem']:.2f}, MoM {row['mom']:.2f}")

        self.results = {"window": HELDOUT_WINDOW, "heldout": HELDOUT_TRAJECTORIES, "rows": rows}
        self.passed = all(r["mcem"] >= r["mom"] for r in rows if r["intervals"] in (7, 13))

    def _hidden(self) -> None:
        model_file = parse_model(HIDDEN_MODEL, "<hidden benchmark>")
        definition = model_file.definition
        truth = CoevolutionModel(definition, model_file.params)
        observation: ObservationParams = model_file.observation
        rng = np.random.default_rng(self.seed)

        print("\nStep 1: Simulating hidden links and events...")
        links, events = simulate_event_stream(truth, observation, NetworkState.empty(definition.n_actors),
                                              HIDDEN_WINDOW, rng)
        counts, durations = observation_statistics(links, events)
        print(f"  ✓ {len(events)} events; per-context counts {counts.astype(int).tolist()}")
        if counts.min() < MIN_EVENTS_PER_CONTEXT:
            print(f"  ⚠️  fewer than {MIN_EVENTS_PER_CONTEXT} events in some context")

        print("\nStep 2: Fitting by hidden-model EM...")
        config = HiddenEMConfig(max_iters=10, samples_per_iter=20, initial_burn_in=20000, burn_in=2000,
                                thin=500, seed=self.seed, progress=True)
        fit = hidden_mcem_fit(events, definition, config)
        error = np.abs(fit.observation.rates - observation.rates) / observation.rates
        print(f"  ✓ fitted event rates {fit.observation.as_dict()}")
        print(f"  ✓ largest relative error {error.max():.3f}")

        self.results = {
            "events": len(events),
            "context_counts": counts.tolist(),
            "empirical_rates": (counts / np.where(durations > 0, durations, 1.0)).tolist(),
            "true_rates": observation.as_dict(),
            "fitted_rates": fit.observation.as_dict(),
            "relative_error": error.tolist(),
            "converged": fit.converged,
        }
        self.passed = bool(error.max() <= RECOVERY_TOLERANCE)

    def _save_report(self) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        report = {
            "benchmark": self.name,
            "date": datetime.now().isoformat(),
            "seed": self.seed,
            "passed": self.passed,
            "results": self.results,
        }
        report_file = self.output_dir / f"{self.name}_report.json"
        with open(report_file, "w", encoding="utf-8") as f:
            json.dump(report, f, ensure_ascii=False, indent=2)
        print(f"\n  ✓ Saved: {report_file}")


def main() -> int:
    parser = argparse.ArgumentParser(description="Long-running replication benchmarks")
    parser.add_argument("benchmark", choices=["synthetic", "hidden"])
    parser.add_argument("--output-dir", default=str(ROOT / "benchmarks" / "results"))
    parser.add_argument("--seed", type=int, default=20240101)
    args = parser.parse_args()
    return 0 if ReplicationBenchmark(args.benchmark, Path(args.output_dir), args.seed).run() else 1


if __name__ == "__main__":
    sys.exit(main())
