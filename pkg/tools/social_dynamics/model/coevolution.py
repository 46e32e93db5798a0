"""
The network-attribute co-evolution model.

Each actor i owns a network clock (rate ``lambda_n[i]``) and one clock per
movable attribute (rate ``lambda_a[i]``). When the network clock fires the
actor toggles one outgoing link, chosen by a logit over the utilities of the
N-1 post-toggle networks; when an attribute clock fires the actor moves that
attribute by -1 or +1, chosen the same way over the feasible steps.

Since every firing produces a move, the total exit rate of the joint
process does not depend on the state.
"""

import logging
import math
from typing import Dict, Hashable, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.special import log_softmax, softmax, xlog1py, xlogy

from ..core.intensity import IntensityMatrix
from ..core.statistics import LogDensity
from ..core.trajectory import Trajectory
from ..core.variables import VariableId, VariableKind
from ..exceptions import InvalidModelError
from .decisions import DecisionSet, TrajectorySummary, choice_log_probs, rate_log_likelihood
from .effects import ATTRIBUTE_STEPS, EffectKind, attribute_change_statistics, network_change_statistics
from .params import ModelDefinition, ModelParams
from .state import NetworkState

logger = logging.getLogger(__name__)


class CoevolutionModel:
    """
    A model definition bound to parameter values.

    Args:
        definition: Actors, attributes and effects
        params: Rates and effect weights
    """

    def __init__(self, definition: ModelDefinition, params: ModelParams):
        self.definition = definition
        self.params = params.check(definition)
        self._attr_columns = [definition.attribute_effect_indices(h) for h in range(definition.n_attributes)]
        self._attr_specs = [[definition.attribute_effects[k] for k in cols] for cols in self._attr_columns]
        kinds = {s.kind for s in definition.network_effects}
        self._net_kinds = kinds
        self._net_similarity = {s.attribute for s in definition.network_effects if s.kind == EffectKind.SIMILARITY}
        self._attr_similarity = {h for h, specs in enumerate(self._attr_specs)
                                 if any(s.kind == EffectKind.SIMILARITY and s.attribute == h for s in specs)}

    def with_params(self, params: ModelParams) -> "CoevolutionModel":
        return CoevolutionModel(self.definition, params)

    @property
    def n_actors(self) -> int:
        return self.definition.n_actors

    # -- choice distributions ------------------------------------------------

    def network_utilities(self, i: int, state: NetworkState) -> np.ndarray:
        """Utility of each toggle target; -inf at ``i``."""
        feats = network_change_statistics(self.definition.network_effects, i, state)
        util = feats @ self.params.network_weights
        util[i] = -np.inf
        return util

    def network_choice_probs(self, i: int, state: NetworkState) -> np.ndarray:
        """
        Probability that actor i toggles each link ``i -> j``.

        Returns:
            np.ndarray: Length N, zero at index i, summing to one
        """
        return softmax(self.network_utilities(i, state))

    def network_choice_log_probs(self, i: int, state: NetworkState) -> np.ndarray:
        return log_softmax(self.network_utilities(i, state))

    def attribute_utilities(self, i: int, h: int, state: NetworkState) -> np.ndarray:
        feats, feasible = attribute_change_statistics(self._attr_specs[h], h, i, state)
        util = feats @ self.params.attribute_weights[self._attr_columns[h]]
        return np.where(feasible, util, -np.inf)

    def attribute_choice_probs(self, i: int, h: int, state: NetworkState) -> np.ndarray:
        """
        Probability of moving ``z_hi`` by -1 and +1.

        Infeasible steps get probability zero. An attribute without any
        feasible step returns zeros.
        """
        util = self.attribute_utilities(i, h, state)
        if not np.isfinite(util).any():
            return np.zeros(2)
        return softmax(util)

    # -- rates -----------------------------------------------------------------

    def network_clock_rate(self, i: int) -> float:
        return float(self.params.network_rate[i])

    def attribute_clock_rate(self, h: int, i: int) -> float:
        if self.definition.attributes[h].span < 1:
            return 0.0
        return float(self.params.attribute_rate[i])

    def total_exit_rate(self) -> float:
        """Exit rate of the joint process, the same in every state."""
        movable = len(self.definition.movable_attributes())
        return float(self.params.network_rate.sum() + movable * self.params.attribute_rate.sum())

    def variable_rates(self, variable: VariableId, state: NetworkState) -> Dict[int, float]:
        """Rates of every move of one variable out of its current value."""
        if variable.kind == VariableKind.LINK:
            i, j = variable.first, variable.second
            rate = self.network_clock_rate(i) * self.network_choice_probs(i, state)[j]
            return {1 - int(state.y[i, j]): float(rate)}
        if variable.kind == VariableKind.ATTRIBUTE:
            h, i = variable.first, variable.second
            probs = self.attribute_choice_probs(i, h, state)
            z = int(state.z[h, i])
            lam = self.attribute_clock_rate(h, i)
            return {z + int(step): float(lam * p) for step, p in zip(ATTRIBUTE_STEPS, probs) if p > 0}
        raise InvalidModelError(f"{variable} is not a model variable")

    def global_intensity(self, state: NetworkState, target: NetworkState) -> float:
        """
        Joint-process rate from ``state`` to ``target``.

        Returns the negative total exit rate when the states are equal and 0
        unless they differ by one link or one unit step of one attribute.
        """
        dy = np.argwhere(state.y != target.y)
        dz = np.argwhere(state.z != target.z)
        if len(dy) == 0 and len(dz) == 0:
            return -self.total_exit_rate()
        if len(dy) + len(dz) != 1:
            return 0.0
        if len(dy):
            i, j = (int(a) for a in dy[0])
            return self.variable_rates(VariableId.link(i, j), state)[int(target.y[i, j])]
        h, i = (int(a) for a in dz[0])
        return self.variable_rates(VariableId.attribute(h, i), state).get(int(target.z[h, i]), 0.0)

    def link_cim(self, i: int, j: int, state: NetworkState) -> IntensityMatrix:
        """2x2 intensity matrix of ``Y_ij`` given every other variable."""
        if i == j:
            raise InvalidModelError("self relations are not variables")
        rates = []
        work = state.copy()
        for value in (0, 1):
            work.y[i, j] = value
            rates.append(self.network_clock_rate(i) * self.network_choice_probs(i, work)[j])
        return IntensityMatrix.two_state(rates[0], rates[1])

    def attribute_cim(self, h: int, i: int, state: NetworkState) -> IntensityMatrix:
        """Tridiagonal intensity matrix of ``Z_hi`` over its declared range."""
        spec = self.definition.attributes[h]
        values = spec.values
        if len(values) < 2:
            raise InvalidModelError(f"attribute '{spec.name}' has a single value and no intensity matrix")
        rates = np.zeros((len(values), len(values)))
        work = state.copy()
        lam = self.attribute_clock_rate(h, i)
        for row, value in enumerate(values):
            work.z[h, i] = value
            down, up = self.attribute_choice_probs(i, h, work)
            if row > 0:
                rates[row, row - 1] = lam * down
            if row + 1 < len(values):
                rates[row, row + 1] = lam * up
        return IntensityMatrix.from_rates(rates)

    # -- oracle interface -------------------------------------------------------

    def state_values(self, variable: VariableId) -> Sequence[int]:
        if variable.kind == VariableKind.LINK:
            return (0, 1)
        if variable.kind == VariableKind.ATTRIBUTE:
            return self.definition.attributes[variable.first].values
        raise InvalidModelError(f"{variable} is not a model variable")

    def intensity(self, assignment: Mapping[VariableId, int], variable: VariableId, new_value: int) -> float:
        state = self.state_from(assignment)
        return self.variable_rates(variable, state).get(int(new_value), 0.0)

    def state_from(self, assignment: Mapping[VariableId, int]) -> NetworkState:
        return NetworkState.from_assignment(assignment, self.n_actors, self.definition.attributes)

    # -- dependencies -----------------------------------------------------------

    def dependency_set(self, variable: VariableId, state: NetworkState) -> Set[VariableId]:
        """
        Variables whose current value enters the intensity matrix of ``variable``.

        The set is taken under the current instantiation: the similarity term
        of an attribute utility only reads ``Z_hk`` where ``y_ik = 1``. The
        variable itself is never included.
        """
        n = self.n_actors
        out: Set[VariableId] = set()
        if variable.kind == VariableKind.LINK:
            i = variable.first
            kinds = self._net_kinds
            if kinds:
                own = [VariableId.link(i, k) for k in range(n) if k != i]
                if kinds - {EffectKind.RECIPROCITY}:
                    out.update(own)
                if EffectKind.RECIPROCITY in kinds:
                    out.update(VariableId.link(k, i) for k in range(n) if k != i)
                    out.update(VariableId.link(i, k) for k in range(n) if k != i and state.y[k, i])
                if EffectKind.ACTIVITY in kinds:
                    out.update(VariableId.link(k, l) for k in range(n) for l in range(n) if k != i and l != k)
                if EffectKind.POPULARITY in kinds:
                    out.update(VariableId.link(l, k) for k in range(n) for l in range(n) if k != i and l != k)
                for a in self._net_similarity:
                    out.update(VariableId.attribute(a, k) for k in range(n))
        elif variable.kind == VariableKind.ATTRIBUTE:
            h, i = variable.first, variable.second
            if h in self._attr_similarity:
                out.update(VariableId.link(i, k) for k in range(n) if k != i)
                out.update(VariableId.attribute(h, k) for k in range(n) if k != i and state.y[i, k])
        else:
            raise InvalidModelError(f"{variable} is not a model variable")
        out.discard(variable)
        return out

    def dependents(self, variable: VariableId, state: NetworkState) -> Set[VariableId]:
        """Inverse of ``dependency_set``: variables whose intensities read ``variable``."""
        n = self.n_actors
        links = self.definition.link_variables
        out: Set[VariableId] = set()
        kinds = self._net_kinds
        if variable.kind == VariableKind.LINK:
            a, b = variable.first, variable.second
            if kinds - {EffectKind.RECIPROCITY}:
                out.update(VariableId.link(a, j) for j in range(n) if j != a)
            if EffectKind.RECIPROCITY in kinds:
                out.update(VariableId.link(b, j) for j in range(n) if j != b)
                if state.y[b, a]:
                    out.update(VariableId.link(a, j) for j in range(n) if j != a)
            if EffectKind.ACTIVITY in kinds:
                out.update(v for v in links() if v.first != a)
            if EffectKind.POPULARITY in kinds:
                out.update(v for v in links() if v.first != b)
            out.update(VariableId.attribute(h, a) for h in self._attr_similarity)
        elif variable.kind == VariableKind.ATTRIBUTE:
            h, b = variable.first, variable.second
            if h in self._net_similarity:
                out.update(links())
            if h in self._attr_similarity:
                out.update(VariableId.attribute(h, i) for i in range(n) if i != b and state.y[i, b])
        else:
            raise InvalidModelError(f"{variable} is not a model variable")
        out.discard(variable)
        return out

    def affected_decisions(self, variable: VariableId, state: NetworkState) -> Set[Tuple[int, int]]:
        """
        Decision distributions that may change when ``variable`` moves.

        Keys are ``(-1, actor)`` for network choices and ``(h, actor)`` for
        attribute choices; the owner's own decision is always included.
        """
        keys = {self._decision_key(variable)}
        keys.update(self._decision_key(v) for v in self.dependents(variable, state))
        return keys

    @staticmethod
    def _decision_key(variable: VariableId) -> Tuple[int, int]:
        if variable.kind == VariableKind.LINK:
            return (-1, variable.first)
        return (variable.first, variable.second)

    # -- likelihood -------------------------------------------------------------

    def summarize(self, trajectory: Trajectory, initial: Optional[NetworkState] = None) -> TrajectorySummary:
        """
        Decision records, counts and clock exposures of a complete trajectory.

        Args:
            trajectory: Trajectory over every model variable
            initial: Initial state; taken from the trajectory when omitted

        Returns:
            TrajectorySummary: Complete-data sufficient summary
        """
        d = self.definition
        n = d.n_actors
        state = initial.copy() if initial is not None else self.state_from(trajectory.initial)
        t = trajectory.t_end
        n_counts = np.zeros(n)
        a_counts = np.zeros(n)
        net_f, net_m, net_c, net_a = [], [], [], []
        att_f, att_m, att_c, att_a = [], [], [], []
        impossible = []
        ka = d.n_attribute_effects
        mask_template = ~np.eye(n, dtype=bool)
        for tr in trajectory.transitions:
            v = tr.variable
            if v.kind == VariableKind.LINK:
                i, j = v.first, v.second
                net_f.append(network_change_statistics(d.network_effects, i, state))
                net_m.append(mask_template[i])
                net_c.append(j)
                net_a.append(i)
                n_counts[i] += 1
            elif v.kind == VariableKind.ATTRIBUTE:
                h, i = v.first, v.second
                step = tr.new_state - tr.old_state
                if abs(step) != 1:
                    impossible.append(f"{v} jumps from {tr.old_state} to {tr.new_state} at {tr.time}")
                else:
                    feats, feasible = attribute_change_statistics(self._attr_specs[h], h, i, state)
                    full = np.zeros((2, ka))
                    full[:, self._attr_columns[h]] = feats
                    att_f.append(full)
                    att_m.append(feasible)
                    att_c.append(0 if step < 0 else 1)
                    att_a.append(i)
                a_counts[i] += 1
            else:
                raise InvalidModelError(f"{v} is not a model variable")
            state.set(v, tr.new_state)
        network = DecisionSet.stack(net_f, net_m, net_c, net_a, n, d.n_network_effects)
        attribute = DecisionSet.stack(att_f, att_m, att_c, att_a, 2, ka)
        movable = len(d.movable_attributes())
        return TrajectorySummary(t, n_counts, a_counts, np.full(n, t), np.full(n, movable * t),
                                 network, attribute, impossible)

    def summary_log_likelihood(self, summary: TrajectorySummary) -> LogDensity:
        """Complete-data log-density of a summarised trajectory (initial state omitted)."""
        p = self.params
        problems = list(summary.impossible)
        rate_n, ok_n = rate_log_likelihood(summary.network_counts, summary.network_exposure, p.network_rate)
        rate_a, ok_a = rate_log_likelihood(summary.attribute_counts, summary.attribute_exposure, p.attribute_rate)
        if not ok_n:
            problems.append("network decision at zero rate")
        if not ok_a:
            problems.append("attribute decision at zero rate")
        logp_n = choice_log_probs(summary.network, p.network_weights)
        logp_a = choice_log_probs(summary.attribute, p.attribute_weights)
        if np.any(np.isneginf(logp_n)) or np.any(np.isneginf(logp_a)):
            problems.append("move with zero choice probability")
        if problems:
            return LogDensity(-math.inf, tuple(problems))
        return LogDensity(rate_n + rate_a + float(logp_n.sum() + logp_a.sum()))

    def trajectory_log_likelihood(self, trajectory: Trajectory) -> LogDensity:
        return self.summary_log_likelihood(self.summarize(trajectory))

    def link_log_prior(self, value: int) -> float:
        """Log-probability of one link value at time 0."""
        p0 = self.definition.link_prior
        return float(xlogy(value, p0) + xlog1py(1 - value, -p0))

    def initial_log_prior(self, state: NetworkState) -> float:
        """Independent Bernoulli links and uniform attributes at time 0."""
        links = state.y[~np.eye(self.n_actors, dtype=bool)]
        value = sum(self.link_log_prior(int(x)) for x in links)
        for spec in self.definition.attributes:
            value -= self.n_actors * math.log(len(spec.values))
        return float(value)

    def context_function(self) -> "StateContext":
        return StateContext(self)


class StateContext:
    """
    Context resolver for ``collect_sufficient_stats``.

    The parents of every variable are resolved to the full current state,
    fingerprinted once per interval; ``rates`` turns a fingerprint back into
    the local transition rates.
    """

    def __init__(self, model: CoevolutionModel):
        self.model = model
        self._states: Dict[bytes, NetworkState] = {}
        self._network: Dict[Tuple[int, bytes], np.ndarray] = {}
        self._attribute: Dict[Tuple[int, int, bytes], np.ndarray] = {}

    def bind(self, assignment: Mapping[VariableId, int]):
        state = self.model.state_from(assignment)
        key = state.key()
        self._states.setdefault(key, state)
        return lambda variable: key

    def __call__(self, variable: VariableId, assignment: Mapping[VariableId, int]) -> Hashable:
        return self.bind(assignment)(variable)

    def rates(self, variable: VariableId, key: bytes) -> "LocalRates":
        return LocalRates(self, variable, self._states[key])

    def network_probs(self, i: int, state: NetworkState) -> np.ndarray:
        k = (i, state.key())
        if k not in self._network:
            self._network[k] = self.model.network_choice_probs(i, state)
        return self._network[k]

    def attribute_probs(self, h: int, i: int, state: NetworkState) -> np.ndarray:
        k = (h, i, state.key())
        if k not in self._attribute:
            self._attribute[k] = self.model.attribute_choice_probs(i, h, state)
        return self._attribute[k]


class LocalRates:
    """Lazily evaluated rows of one variable's intensity matrix in a fixed context."""

    def __init__(self, context: StateContext, variable: VariableId, state: NetworkState):
        self.context = context
        self.variable = variable
        self.state = state
        self._rows: Dict[int, Dict[int, float]] = {}

    def _row(self, x: int) -> Dict[int, float]:
        if x not in self._rows:
            state = self.state
            if state.get(self.variable) != x:
                state = state.copy()
                state.set(self.variable, x)
            model = self.context.model
            v = self.variable
            if v.kind == VariableKind.LINK:
                probs = self.context.network_probs(v.first, state)
                self._rows[x] = {1 - x: model.network_clock_rate(v.first) * float(probs[v.second])}
            else:
                probs = self.context.attribute_probs(v.first, v.second, state)
                lam = model.attribute_clock_rate(v.first, v.second)
                self._rows[x] = {x + int(s): lam * float(p) for s, p in zip(ATTRIBUTE_STEPS, probs)}
        return self._rows[x]

    def exit_rate(self, x: int) -> float:
        return float(sum(self._row(x).values()))

    def rate(self, x: int, x_next: int) -> float:
        return float(self._row(x).get(x_next, 0.0))
