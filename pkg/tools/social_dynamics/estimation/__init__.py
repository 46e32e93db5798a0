"""Parameter learning: MCEM, method of moments and hidden-model EM."""

from .evaluation import heldout_loglik, heldout_table, total_loglik
from .hidden_em import HiddenEMConfig, estimate_observation_rates, hidden_mcem_fit
from .mcem import EMConfig, fit_complete_data, initial_params, mcem_fit, snapshots_to_evidence
from .moments import MomentProblem, MoMConfig, mom_fit
from .objective import ExpectedStatistics, expected_complete_loglik, expected_complete_loglik_and_grad
from .result import FitResult

__all__ = [
    "EMConfig",
    "ExpectedStatistics",
    "FitResult",
    "HiddenEMConfig",
    "MoMConfig",
    "MomentProblem",
    "estimate_observation_rates",
    "expected_complete_loglik",
    "expected_complete_loglik_and_grad",
    "fit_complete_data",
    "heldout_loglik",
    "heldout_table",
    "hidden_mcem_fit",
    "initial_params",
    "mcem_fit",
    "mom_fit",
    "snapshots_to_evidence",
    "total_loglik",
]
