"""dronecatch: projectile-catch simulator, forecaster, MPC planner, and benchmark."""

from .geometry import Box, RoomGeometry, Vec3, ZERO3, default_room
from .physics import (GeometryDegenerateError, ObjectSpec, ObjectState, SimConfig,
                      SimResult, Terminal, integrate_object_step, resolve_collision,
                      simulate_trajectory)
from .environment import (AgentState, Difficulty, DroneSpec, EpisodeConfig,
                          EpisodeRecord, LauncherConfig, Outcome, check_catch,
                          classify_difficulty, launch_object, run_episode,
                          spawn_episode, step_agent)
from .perception import (KalmanState, Observation, cpp_estimate,
                         finite_difference_estimate, kalman_init, kalman_update,
                         observe)
from .forecaster import (Forecast, LearnedEstimator, learned_estimate,
                         me_forecast_full, nme_rollout)
from .planner import (ActionSequence, PlannerConfig, PlanResult, camera_angles,
                      plan_mpc, rollout_agent, score_sequence,
                      static_target_forecast)
from .policy import (CriticNet, ModelFreePolicy, PolicyNet, RewardSpec,
                     actor_critic_update, compute_returns, model_free_act,
                     policy_sample, uniform_sample)
from .catalog import default_catalog, load_catalog, save_catalog

__version__ = "0.1.0"
