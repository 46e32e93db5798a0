"""
Trajectory validation against a model and, optionally, against evidence.

Collects issues (the trajectory cannot be used) and warnings (it can, but
something looks off), computes summary statistics and writes
``validation_report.json``.
"""

import json
import logging
from collections import Counter
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.evidence import snapshot_evidence, validate_trajectory_against_evidence
from ..core.trajectory import Trajectory
from ..core.variables import VariableKind
from ..data_processing.formats import read_trajectory
from ..exceptions import DataFormatError
from ..model.coevolution import CoevolutionModel
from ..model.params import ModelDefinition, ModelParams
from ..model.state import NetworkState

logger = logging.getLogger(__name__)


class TrajectoryValidator:
    """
    Validates a trajectory file for use as complete or test data.

    Args:
        trajectory_path: Trajectory CSV (with its JSON sidecar)
        definition: Model the trajectory should belong to
        output_dir: Where the report goes
        params: Parameters for a likelihood check
        snapshots: Observations the trajectory must agree with
        verbose: Print progress banners
    """

    def __init__(self, trajectory_path: Union[str, Path], definition: ModelDefinition,
                 output_dir: Union[str, Path], params: Optional[ModelParams] = None,
                 snapshots: Optional[Sequence[Tuple[float, NetworkState]]] = None, verbose: bool = False):
        self.trajectory_path = Path(trajectory_path)
        self.definition = definition
        self.output_dir = Path(output_dir)
        self.params = params
        self.snapshots = snapshots
        self.verbose = verbose
        self.trajectory: Optional[Trajectory] = None
        self.issues: List[str] = []
        self.warnings: List[str] = []
        self.stats: Dict[str, Any] = {}

    def _say(self, message: str) -> None:
        if self.verbose:
            print(message)
        logger.info(message.strip())

    def validate(self) -> bool:
        """
        Main validation method.

        Returns:
            bool: True when no issue was found
        """
        self._say("=" * 80)
        self._say("Trajectory Validation")
        self._say("=" * 80)
        self._say(f"File: {self.trajectory_path}")

        self._say("\nStep 1: Loading trajectory...")
        if self._load():
            self._say("\nStep 2: Checking variables and values...")
            self._check_values()

            self._say("\nStep 3: Checking against observations...")
            self._check_evidence()

            self._say("\nStep 4: Checking likelihood...")
            self._check_likelihood()

            self._say("\nStep 5: Generating statistics...")
            self._generate_statistics()

        self._say("\nStep 6: Saving validation report...")
        self._save_report()
        self._print_summary()
        return not self.issues

    def _load(self) -> bool:
        try:
            self.trajectory = read_trajectory(self.trajectory_path)
        except DataFormatError as exc:
            self.issues.append(f"Failed to load trajectory: {exc}")
            return False
        self._say(f"  ✓ Loaded {len(self.trajectory)} transitions over [0, {self.trajectory.t_end}]")
        return True

    def _check_values(self) -> None:
        traj = self.trajectory
        expected = set(self.definition.variables())
        present = set(traj.variables)
        for v in sorted(expected - present):
            self.issues.append(f"Missing variable: {v}")
        for v in sorted(present - expected):
            self.issues.append(f"Variable not in model: {v}")
        attrs = self.definition.attributes
        for v, x in traj.initial.items():
            if v.kind == VariableKind.LINK and x not in (0, 1):
                self.issues.append(f"{v} starts at {x}, links are 0 or 1")
            elif v.kind == VariableKind.ATTRIBUTE and v.first < len(attrs) and not attrs[v.first].contains(x):
                self.issues.append(f"{v} starts at {x}, outside the declared range")
        for tr in traj.transitions:
            v = tr.variable
            if v.kind == VariableKind.ATTRIBUTE:
                if abs(tr.new_state - tr.old_state) != 1:
                    self.issues.append(f"{v} jumps by {tr.new_state - tr.old_state} at {tr.time}")
                if v.first < len(attrs) and not attrs[v.first].contains(tr.new_state):
                    self.issues.append(f"{v} leaves its range at {tr.time}")
            elif v.kind == VariableKind.LINK and tr.new_state not in (0, 1):
                self.issues.append(f"{v} takes value {tr.new_state} at {tr.time}")
        if len(traj) == 0:
            self.warnings.append("Trajectory has no transitions")
        self._say(f"  ✓ Checked {len(present)} variables")

    def _check_evidence(self) -> None:
        if not self.snapshots:
            self._say("  - No observations supplied")
            return
        evidence = snapshot_evidence([(t, s.to_assignment()) for t, s in self.snapshots], self.trajectory.t_end)
        problems = validate_trajectory_against_evidence(self.trajectory, evidence)
        self.issues.extend(problems)
        self._say(f"  ✓ {len(self.snapshots)} snapshots, {len(problems)} disagreements")

    def _check_likelihood(self) -> None:
        if self.params is None or self.issues:
            self._say("  - Skipped")
            return
        result = CoevolutionModel(self.definition, self.params).trajectory_log_likelihood(self.trajectory)
        self.stats["log_likelihood"] = result.value
        if not result.is_possible:
            self.issues.extend(f"Impossible under the model: {item}" for item in result.impossible[:10])
        self._say(f"  ✓ Log-likelihood {result.value:.6g}")

    def _generate_statistics(self) -> None:
        traj = self.trajectory
        kinds = Counter("link" if tr.variable.kind == VariableKind.LINK else "attribute" for tr in traj.transitions)
        n = self.definition.n_actors
        start = np.mean([x for v, x in traj.initial.items() if v.kind == VariableKind.LINK]) if n > 1 else 0.0
        final = traj.final_state()
        end = np.mean([x for v, x in final.items() if v.kind == VariableKind.LINK]) if n > 1 else 0.0
        gaps = np.diff([0.0] + [tr.time for tr in traj.transitions])
        self.stats.update({
            "t_end": traj.t_end,
            "transitions": len(traj),
            "link_transitions": kinds.get("link", 0),
            "attribute_transitions": kinds.get("attribute", 0),
            "initial_density": float(start),
            "final_density": float(end),
            "mean_gap": float(gaps.mean()) if len(gaps) else None,
        })
        self._say(f"  ✓ {self.stats['link_transitions']} link and {self.stats['attribute_transitions']} "
                  f"attribute transitions")

    def _save_report(self) -> Path:
        report = {
            "file": str(self.trajectory_path),
            "passed": not self.issues,
            "issues": self.issues,
            "warnings": self.warnings,
            "statistics": self.stats,
        }
        self.output_dir.mkdir(parents=True, exist_ok=True)
        report_file = self.output_dir / "validation_report.json"
        with open(report_file, "w", encoding="utf-8") as f:
            json.dump(report, f, ensure_ascii=False, indent=2)
        self._say("  ✓ Saved: validation_report.json")
        return report_file

    def _print_summary(self) -> None:
        self._say("\n" + "=" * 80)
        self._say("VALIDATION SUMMARY")
        self._say("=" * 80)
        if self.issues:
            self._say(f"✗ {len(self.issues)} Issue(s):")
            for issue in self.issues[:10]:
                self._say(f"  - {issue}")
        else:
            self._say("✓ No issues found")
        if self.warnings:
            self._say(f"⚠️  {len(self.warnings)} Warning(s):")
            for warning in self.warnings[:5]:
                self._say(f"  - {warning}")
