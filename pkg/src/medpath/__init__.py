"""Penalized mediation analysis with many candidate mediators.

Fits the two-equation linear mediation model by ADMM under LASSO or pathway
penalties, selects tuning parameters by BIC, screens mediators by marginal
correlation and scores recovery on simulated data.
"""
from .model import ContractError, Dataset, Effects, MediationParams, Scaling, effects, loglik
from .penalties import PenaltyConfig
from .screening import ScreenConfig, sis_screen
from .selection import GridSpec, grid_search, two_stage_select
from .solver import FitResult, SolverConfig, fit
from .metrics import MetricsReport, evaluate

__version__ = "0.1.0"

__all__ = [
    "ContractError", "Dataset", "Effects", "MediationParams", "Scaling", "effects", "loglik",
    "PenaltyConfig", "ScreenConfig", "sis_screen", "GridSpec", "grid_search",
    "two_stage_select", "FitResult", "SolverConfig", "fit", "MetricsReport", "evaluate",
]
