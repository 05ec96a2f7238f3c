from src.services.configurators.smac.acquisition import expected_improvement, select_challengers
from src.services.configurators.smac.encoder import ConfigurationEncoder
from src.services.configurators.smac.forest import RandomForestModel, dump_trees, fit_forest, marginal_predict
from src.services.configurators.smac.optimizer import SMAC, run_smac

__all__ = [
    "ConfigurationEncoder",
    "RandomForestModel",
    "SMAC",
    "dump_trees",
    "expected_improvement",
    "fit_forest",
    "marginal_predict",
    "run_smac",
    "select_challengers",
]
