"""Fair logistic regression under marginal-constrained Wasserstein ambiguity,
with LP and knapsack auditing of worst- and best-case group unfairness."""

from .core import (
    AmbiguityConfig,
    ConfigError,
    ContractViolation,
    Dataset,
    GroundMetric,
    MarginalStats,
    ModelWeights,
    UndefinedUnfairness,
    UnfairnessKind,
    accuracy,
    empirical_unfairness,
    load_dataset_csv,
    mean_log_loss,
    save_dataset_csv,
)
from .training import (
    FitResult,
    TrainConfig,
    fair_objective,
    fit_drflr,
    fit_flr,
    fit_lr,
    worst_case_objective,
)

__version__ = "0.1.0"
