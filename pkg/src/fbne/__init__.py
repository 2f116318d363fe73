"""Federated Bayesian network ensembles over simulated data partitions."""
from .bif import BifError, builtin_asia, load_bif, parse_bif, save_bif, write_bif
from .bn import (
    BayesianNetwork,
    Cpt,
    CycleError,
    InvalidQueryError,
    ZeroEvidenceError,
    forward_sample,
    joint_probability,
)
from .data import DataFormatError, DiscretizationSpec, fit_discretizer, inject_missing, load_csv, write_csv
from .ensemble import (
    BaselineSuite,
    DegeneratePartyError,
    EnsembleModel,
    LearningConfig,
    LocalModel,
    Member,
    predict,
    synthetic_bootstrap,
    train_baselines,
    train_fbne,
)
from .evaluation import FoldPlan, ResultRecord, auc, cross_validate, stratified_folds
from .federation import (
    InfeasibleSplitError,
    PartyView,
    SecureSumSession,
    SessionConfigurationError,
    SplitPlan,
    make_parties,
    secure_weighted_sum,
    split_horizontal,
    split_hybrid,
    split_manual,
    split_vertical,
)
from .harness import ScenarioConfig, run_grid, run_scenario
from .inference import JunctionTree, posterior
from .learning import EmConfig, K2Config, em, fit_parameters_em, fit_parameters_mle, k2_score, k2_search
from .table import MISSING, Continuous, DataTable, Variable

__version__ = "0.1.0"
