"""Greedy kernel surrogates that warm-start Newton in implicit ODE integration.

Workflow: integrate a parametric problem at a few training parameters,
learn a sparse Gaussian-kernel model of the one-step evolution map, then
use its predictions as Newton starting guesses to cut iterations online.
"""

from .burgers import (
    BurgersGrid,
    BurgersParams,
    burgers_initial,
    burgers_jacobian,
    burgers_rhs,
    make_burgers_problem,
)
from .greedy import (
    GreedyResult,
    SelectionRule,
    TrainConfig,
    TrainingSet,
    greedy_train,
    train,
)
from .kernels import GaussianKernel, KernelExpansion, expansion_eval, gaussian_eval
from .model_selection import CrossValidationError, CvConfig, CvResult, select_epsilon
from .ode import (
    EXPLICIT_EULER,
    PREVIOUS_VALUE,
    Initializer,
    IvpProblem,
    NewtonConfig,
    NewtonStats,
    Trajectory,
    ie_step,
    integrate,
    newton_solve,
    surrogate_initializer,
)
from .pipeline import (
    ComparisonReport,
    OfflineConfig,
    RunReport,
    SurrogateModel,
    assemble_training_set,
    compare,
    compare_cases,
    load_model,
    offline,
    online,
    save_model,
)
from .problems import available_problems, build_problem, register_problem

__version__ = "0.1.0"

__all__ = [
    "BurgersGrid",
    "BurgersParams",
    "burgers_initial",
    "burgers_jacobian",
    "burgers_rhs",
    "make_burgers_problem",
    "GreedyResult",
    "SelectionRule",
    "TrainConfig",
    "TrainingSet",
    "greedy_train",
    "train",
    "GaussianKernel",
    "KernelExpansion",
    "expansion_eval",
    "gaussian_eval",
    "CrossValidationError",
    "CvConfig",
    "CvResult",
    "select_epsilon",
    "EXPLICIT_EULER",
    "PREVIOUS_VALUE",
    "Initializer",
    "IvpProblem",
    "NewtonConfig",
    "NewtonStats",
    "Trajectory",
    "ie_step",
    "integrate",
    "newton_solve",
    "surrogate_initializer",
    "ComparisonReport",
    "OfflineConfig",
    "RunReport",
    "SurrogateModel",
    "assemble_training_set",
    "compare",
    "compare_cases",
    "load_model",
    "offline",
    "online",
    "save_model",
    "available_problems",
    "build_problem",
    "register_problem",
    "__version__",
]
