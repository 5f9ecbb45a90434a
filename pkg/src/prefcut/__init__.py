"""prefcut: robust preference-based reward learning by conservative batch
cutting of a reward-parameter hypothesis space."""

from .baseline import BaselineConfig, BTLearner, bt_preference_prob
from .cutting import (BatchHistory, CompiledHistory, PreferenceBatch,
                      PreferenceRecord, SmoothingConfig, cut_threshold,
                      heaviside, in_cut, in_hypothesis_space,
                      smoothed_cut_indicator, smoothed_log_objective, votes)
from .envs import Cartpole, EnvSpec, PointMass, make_env
from .harness import (LearningCurve, RunConfig, RunLoop, RunResult,
                      build_model, cartpole_config, evaluate, oracle_score,
                      pearson_correlation, pointmass_config, run_bt_baseline,
                      run_hsbc)
from .oracles import OracleSpec, SimulatedOracle, batch_flip_labels
from .planning import (EnsembleReward, GroundTruthReward, PlannerConfig,
                       PlanningError, ensemble_reward, generate_trajectory,
                       mppi_plan, random_policy_trajectory)
from .queries import (PartialBatchError, QueryConfig, SegmentBuffer,
                      assemble_batch, disagreement_fraction,
                      disagreement_score, segment_trajectory)
from .rewards import (ConfigurationError, InvalidInputError, LinearRewardModel,
                      MLPRewardModel, Segment, Trajectory, preference_gap,
                      reward, reward_param_gradient, trajectory_return)
from .sampling import (Ensemble, SamplerConfig, SamplerFailedError, densify,
                       draw_ensemble, filter_ensemble, initialize_ensemble,
                       sample_ensemble)

__version__ = "0.1.0"
