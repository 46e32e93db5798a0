"""The network-attribute co-evolution model."""

from .coevolution import CoevolutionModel, StateContext
from .decisions import DecisionSet, TrajectorySummary, choice_log_likelihood
from .effects import EffectKind, EffectSpec, effect_value
from .params import ModelDefinition, ModelParams
from .simulation import RateCache, forward_sample, sample_initial_state, simulate
from .state import AttributeSpec, NetworkState

__all__ = [
    "AttributeSpec",
    "CoevolutionModel",
    "DecisionSet",
    "EffectKind",
    "EffectSpec",
    "ModelDefinition",
    "ModelParams",
    "NetworkState",
    "RateCache",
    "StateContext",
    "TrajectorySummary",
    "choice_log_likelihood",
    "effect_value",
    "forward_sample",
    "sample_initial_state",
    "simulate",
]
