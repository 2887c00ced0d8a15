"""Controllers wiring perception, forecasting, and planning into episode policies."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .environment import AgentState, EpisodeConfig
from .forecaster import (Forecast, LearnedEstimator, learned_estimate, nme_advance,
                         nme_rollout)
from .geometry import Vec3, ZERO3
from .perception import (KalmanState, cpp_estimate, finite_difference_estimate,
                         kalman_start, kalman_update, window_ready)
from .physics import ObjectState
from .planner import (DegenerateDirectionError, PlannerConfig, camera_angles,
                      plan_mpc, static_target_forecast)
from .policy import (ModelFreePolicy, PolicyNet, context_vector,
                     gaussian_log_density, model_free_act, model_free_context,
                     policy_sample, uniform_sample)

METHODS = ("full", "uniform", "me", "cpp", "kalman", "model_free", "oracle")


@dataclass
class TraceEntry:
    """Training side-channel for one control step of a policy-sampled plan."""
    t: int
    context: np.ndarray
    raw_action: np.ndarray  # pre-clamp draw of the executed first action
    logp: float


class NullController:
    """Always zero action; the do-nothing baseline."""

    def reset(self, cfg, agent, rng):
        pass

    def act(self, obs, agent, t):
        return ZERO3, None


class ForecastPlanController:
    """Planner-based controller covering every forecasting mode.

    forecasting_mode selects the target stream fed to the same MPC:
      refreshed     re-estimate each step, constant-acceleration rollout
      me_only       one whole-episode rollout frozen at the first estimate
      cpp_static    latest observed position repeated H times
      kalman_static drift-Kalman-filtered position repeated H times
      oracle        the simulator's true future positions (collision-aware)
    Missing observations coast the last estimate one recurrence step (refreshed),
    hold the last target (static modes), or predict-only (Kalman).
    """

    def __init__(self, planner_cfg: PlannerConfig, estimator: str = "learned",
                 estimator_model: LearnedEstimator | None = None,
                 policy: PolicyNet | None = None,
                 kalman_proto: KalmanState | None = None,
                 reference_positions: list[Vec3] | None = None,
                 collect_trace: bool = False, collect_estimates: bool = False):
        mode = planner_cfg.forecasting_mode
        if estimator not in ("fd", "learned"):
            raise ValueError("estimator must be 'fd' or 'learned'")
        if estimator == "learned" and estimator_model is None and mode in ("refreshed", "me_only"):
            raise ValueError("learned estimator requires a trained model")
        if planner_cfg.sampler == "policy" and policy is None:
            raise ValueError("policy sampler requires a policy network")
        if mode == "kalman_static" and kalman_proto is None:
            raise ValueError("kalman_static mode requires a fitted KalmanState prototype")
        if mode == "oracle" and reference_positions is None:
            raise ValueError("oracle mode requires the reference trajectory")
        self.pcfg = planner_cfg
        self.estimator = estimator
        self.model = estimator_model
        self.policy = policy
        self.kalman_proto = kalman_proto
        self.reference = reference_positions
        self.collect_trace = collect_trace
        self.collect_estimates = collect_estimates
        self.trace: list[TraceEntry | None] = []
        self.estimates: list[tuple[int, ObjectState]] = []

    def reset(self, cfg: EpisodeConfig, agent: AgentState, rng: np.random.Generator):
        self.drone = cfg.drone
        self.dt = cfg.sim.control_dt
        self.origin = agent.d
        self.rng = rng
        self.window: deque = deque(maxlen=3)
        self.last_world: ObjectState | None = None
        self.frozen: tuple[ObjectState, int] | None = None
        self.kalman: KalmanState | None = None
        self.cpp_target: Vec3 | None = None
        self.trace = []
        self.estimates = []

    # -- estimation ---------------------------------------------------------

    def _estimate_frame(self) -> ObjectState | None:
        window = tuple(self.window)
        if not window_ready(window):
            return None
        if self.estimator == "fd":
            return finite_difference_estimate(window, self.dt)
        return learned_estimate(self.model, window, self.origin_agent)

    def _to_world(self, est: ObjectState) -> ObjectState:
        return ObjectState(est.o + self.origin, est.v, est.a)

    def _forecast(self, obs, agent: AgentState, t: int) -> tuple[Forecast | None, ObjectState | None]:
        mode = self.pcfg.forecasting_mode
        horizon = self.pcfg.horizon
        if mode in ("refreshed", "me_only"):
            est = self._estimate_frame()
            if mode == "refreshed":
                if est is not None:
                    self.last_world = self._to_world(est)
                elif self.last_world is not None:
                    self.last_world = nme_advance(self.last_world, self.dt)
                if self.last_world is None:
                    return None, None
                return nme_rollout(self.last_world, horizon, self.dt), self.last_world
            if self.frozen is None and est is not None:
                self.frozen = (self._to_world(est), t)
            if self.frozen is None:
                return None, None
            state, t0 = self.frozen
            for _ in range(t - t0):
                state = nme_advance(state, self.dt)
            return nme_rollout(state, horizon, self.dt), state
        if mode == "cpp_static":
            if obs.visible:
                self.cpp_target = cpp_estimate(tuple(self.window)) + self.origin
            if self.cpp_target is None:
                return None, None
            forecast = static_target_forecast(self.cpp_target, horizon)
            return forecast, forecast.source_state
        if mode == "kalman_static":
            if self.kalman is None:
                if obs.visible:
                    self.kalman = kalman_start(self.kalman_proto, obs.pos)
            else:
                self.kalman = kalman_update(self.kalman, obs)
            if self.kalman is None:
                return None, None
            forecast = static_target_forecast(self.kalman.mean + self.origin, horizon)
            return forecast, forecast.source_state
        # oracle: true future positions, padded with the final one
        ref = self.reference
        idx = [min(t + 1 + k, len(ref) - 1) for k in range(horizon)]
        positions = tuple(ref[i] for i in idx)
        src_v = (ref[min(t + 1, len(ref) - 1)] - ref[min(t, len(ref) - 1)]).scaled(1.0 / self.dt)
        source = ObjectState(ref[min(t, len(ref) - 1)], src_v, ZERO3)
        return Forecast(horizon, positions, source), source

    # -- acting -------------------------------------------------------------

    def act(self, obs, agent: AgentState, t: int):
        self.window.append(obs)
        self.origin_agent = agent
        forecast, est = self._forecast(obs, agent, t)
        if forecast is None:
            if self.collect_trace:
                self.trace.append(None)
            return ZERO3, None
        if self.collect_estimates and self.pcfg.forecasting_mode in ("refreshed", "me_only"):
            self.estimates.append((t, est))

        sample_box = {}
        if self.pcfg.sampler == "policy":
            ctx = context_vector(agent, forecast, est)

            def sampler(cfg, rng):
                ps = policy_sample(self.policy, ctx, cfg, rng)
                sample_box["ps"] = ps
                return ps.sequences
        else:
            def sampler(cfg, rng):
                return uniform_sample(cfg, self.drone, rng)

        plan = plan_mpc(agent, forecast, self.pcfg, sampler, self.rng, self.drone, self.dt)
        if self.collect_trace:
            if self.pcfg.sampler == "policy":
                ps = sample_box["ps"]
                self.trace.append(TraceEntry(t, ctx, ps.raw[plan.best_index, 0].copy(),
                                             float(ps.logp_first[plan.best_index])))
            else:
                self.trace.append(None)
        try:
            camera = camera_angles(forecast.positions[0], plan.predicted_agent_path[0])
        except DegenerateDirectionError:
            camera = None
        return plan.best_action, camera


class ModelFreeController:
    """Direct-control baseline: window + agent state -> action, no planner."""

    def __init__(self, policy: ModelFreePolicy, stochastic: bool = False,
                 collect_trace: bool = False):
        self.policy = policy
        self.stochastic = stochastic
        self.collect_trace = collect_trace
        self.trace: list[TraceEntry | None] = []

    def reset(self, cfg: EpisodeConfig, agent: AgentState, rng: np.random.Generator):
        self.origin = agent.d
        self.rng = rng
        self.window: deque = deque(maxlen=3)
        self.trace = []

    def act(self, obs, agent: AgentState, t: int):
        self.window.append(obs)
        window = tuple(self.window)
        if not window_ready(window):
            if self.collect_trace:
                self.trace.append(None)
            return ZERO3, self._camera(obs, agent)
        if self.collect_trace or self.stochastic:
            ctx = model_free_context(window, agent, self.origin)
            mean, log_std = self.policy.distribution(ctx)
            if self.stochastic:
                raw = mean + np.exp(log_std) * self.rng.standard_normal(3)
            else:
                raw = mean
            if self.collect_trace:
                logp = float(gaussian_log_density(raw, mean, log_std))
                self.trace.append(TraceEntry(t, ctx, raw.copy(), logp))
            a = np.clip(raw, -self.policy.max_accel, self.policy.max_accel)
            action = Vec3(float(a[0]), float(a[1]), float(a[2]))
        else:
            action = model_free_act(self.policy, window, agent, self.origin)
        return action, self._camera(obs, agent)

    def _camera(self, obs, agent: AgentState):
        if not obs.visible:
            return None
        try:
            return camera_angles(obs.pos + self.origin, agent.d)
        except DegenerateDirectionError:
            return None


@dataclass
class MethodArtifacts:
    """Trained models and statistics a benchmark method may need."""
    estimator: LearnedEstimator | None = None
    policy: PolicyNet | None = None
    model_free: ModelFreePolicy | None = None
    kalman_proto: KalmanState | None = None


class MissingCheckpointError(Exception):
    pass


def make_controller(method: str, planner_cfg: PlannerConfig,
                    artifacts: MethodArtifacts,
                    reference_positions: list[Vec3] | None = None,
                    estimator: str = "learned",
                    stochastic: bool = False, collect_trace: bool = False,
                    collect_estimates: bool = False):
    """Build the controller for a named benchmark method.

    Method presets (sampler / forecast mode / estimator):
      full        policy  / refreshed    / learned
      uniform     uniform / refreshed    / learned
      me          uniform / me_only      / learned
      cpp         uniform / cpp_static   / --
      kalman      uniform / kalman_static/ --
      oracle      uniform / oracle       / --
      model_free  direct policy, no planner
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "model_free":
        if artifacts.model_free is None:
            raise MissingCheckpointError("model_free method needs a trained direct policy")
        return ModelFreeController(artifacts.model_free, stochastic=stochastic,
                                   collect_trace=collect_trace)
    mode = {"full": "refreshed", "uniform": "refreshed", "me": "me_only",
            "cpp": "cpp_static", "kalman": "kalman_static", "oracle": "oracle"}[method]
    sampler = "policy" if method == "full" else "uniform"
    cfg = PlannerConfig(planner_cfg.n_samples, planner_cfg.horizon, sampler, mode)
    if method == "full" and artifacts.policy is None:
        raise MissingCheckpointError("full method needs a trained policy sampler")
    if estimator == "learned" and mode in ("refreshed", "me_only") and artifacts.estimator is None:
        raise MissingCheckpointError(f"{method} method needs a trained state estimator")
    if mode == "kalman_static" and artifacts.kalman_proto is None:
        raise MissingCheckpointError("kalman method needs drift statistics from the training set")
    return ForecastPlanController(
        cfg, estimator=estimator, estimator_model=artifacts.estimator,
        policy=artifacts.policy, kalman_proto=artifacts.kalman_proto,
        reference_positions=reference_positions,
        collect_trace=collect_trace, collect_estimates=collect_estimates)
