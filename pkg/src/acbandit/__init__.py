"""Linear bandits with anti-concentrated ensemble bonuses.

LinUCB and the ACB variants (re-randomized, incremental, lazy), a simulation
harness with grid search and exports, and runtime checks of the supporting
inequalities.
"""

from .ensemble import Mode, NoiseEnsemble, Oracle, SgdConfig, bonus, bonuses, record, rerandomize, sgd_refresh, warm_start
from .env import Environment, instantaneous_regret, make_figure2_mab, make_linear_env, optimal_action, step
from .errors import ACBError, InvalidArgument, ModeViolation, NumericFailure
from .harness import EnvSpec, ExperimentConfig, RunResult, grid_search, run_episode, run_replicates
from .linalg import CovarianceState, elliptical_norm, init_covariance, rank_one_update, sample_from_inverse, solve
from .policies import Kind, Policy, PolicyConfig, make_policy, select_action, update
from .theory import TheoryParams, gaussian_max_bounds, regret_envelope, theory_beta, theory_ensemble_size

__version__ = "0.1.0"
