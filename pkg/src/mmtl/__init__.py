"""Loss-compositional multi-task learning.

Four risk composers (weighted l1, l2, max, alpha-minimax) over two linear
multi-task models: a shared-plus-task-offset parameterization and a
trace-norm-bounded stacked-weight parameterization, trained with a
deterministic projected/proximal subgradient solver, plus learning-to-learn
evaluation protocols and Monte Carlo verification of the accompanying
tail bounds.
"""

__version__ = "0.1.0"

from .composition import Composer, compose, compose_subgradient, default_alpha
from .core import (ConfigError, DataError, LossKind, MultiTaskDataset,
                   SolverDivergenceError, TaskSample, empirical_risk, loss)
from .models import AepConfig, AepParams, EpConfig, EpParams, predict
from .solver import SolveConfig, SolveReport, fit_task_components, solve

__all__ = [
    "__version__",
    "AepConfig", "AepParams", "Composer", "ConfigError", "DataError",
    "EpConfig", "EpParams", "LossKind", "MultiTaskDataset", "SolveConfig",
    "SolveReport", "SolverDivergenceError", "TaskSample", "compose",
    "compose_subgradient", "default_alpha", "empirical_risk",
    "fit_task_components", "loss", "predict", "solve",
]
