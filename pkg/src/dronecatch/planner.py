"""Model-predictive control by random shooting: score N sampled H-step action
sequences against the object forecast, execute the best sequence's first action."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import AgentState, DroneSpec, step_agent
from .forecaster import Forecast
from .geometry import Vec3, ZERO3, angles_to
from .physics import ObjectState

SAMPLERS = ("uniform", "policy")
FORECAST_MODES = ("refreshed", "me_only", "cpp_static", "kalman_static", "oracle")


class DegenerateDirectionError(Exception):
    """Camera pointing requested toward a zero relative position."""


@dataclass(frozen=True, slots=True)
class ActionSequence:
    accels: tuple[Vec3, ...]

    def __len__(self) -> int:
        return len(self.accels)

    def as_array(self) -> np.ndarray:
        return np.array([a.as_tuple() for a in self.accels])

    @staticmethod
    def from_array(arr) -> "ActionSequence":
        return ActionSequence(tuple(Vec3.from_array(row) for row in arr))


@dataclass(frozen=True, slots=True)
class PlannerConfig:
    n_samples: int = 1000
    horizon: int = 3
    sampler: str = "uniform"
    forecasting_mode: str = "refreshed"

    def __post_init__(self):
        if self.n_samples < 1 or self.horizon < 1:
            raise ValueError("n_samples and horizon must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        if self.forecasting_mode not in FORECAST_MODES:
            raise ValueError(f"forecasting_mode must be one of {FORECAST_MODES}")


@dataclass(frozen=True, slots=True)
class PlanResult:
    best_action: Vec3
    best_score: float  # m, sum of the H agent-object distances
    best_index: int
    predicted_agent_path: tuple[Vec3, ...]


def rollout_agent(agent: AgentState, seq: ActionSequence, drone: DroneSpec,
                  dt: float) -> list[Vec3]:
    """Noise-free rollout with the same clamp rules as step_agent (no room:
    the planner's internal model is the bare mean dynamics)."""
    state = agent
    path = []
    for accel in seq.accels:
        state = step_agent(state, accel, drone, dt, rng=None, room=None)
        path.append(state.d)
    return path


def rollout_agent_batch(agent: AgentState, seqs: np.ndarray, drone: DroneSpec,
                        dt: float) -> np.ndarray:
    """Vectorized rollout_agent over (N, H, 3) candidate sequences; operation
    order matches the scalar path bit-exactly."""
    n, horizon, _ = seqs.shape
    amax, vmax = drone.max_accel, drone.max_velocity
    d = np.tile(agent.d.as_array(), (n, 1))
    v = np.tile(agent.v.as_array(), (n, 1))
    paths = np.empty((n, horizon, 3))
    for i in range(horizon):
        a = np.clip(seqs[:, i, :], -amax, amax)
        d = d + v * dt
        v = v + a * dt
        speed = np.sqrt(v[:, 0] * v[:, 0] + v[:, 1] * v[:, 1] + v[:, 2] * v[:, 2])
        over = speed > vmax
        if over.any():
            scale = np.ones_like(speed)
            np.divide(vmax, speed, out=scale, where=over)
            v = v * scale[:, None]
        paths[:, i, :] = d
    return paths


def score_sequence(path: list[Vec3], forecast: Forecast) -> float:
    """Sum of Euclidean agent-object distances over the horizon."""
    if len(path) != forecast.horizon:
        raise ValueError(f"path length {len(path)} != forecast horizon {forecast.horizon}")
    total = 0.0
    for p, q in zip(path, forecast.positions):
        total += p.distance_to(q)
    return total


def _score_batch(paths: np.ndarray, forecast: Forecast) -> np.ndarray:
    targets = np.array([p.as_tuple() for p in forecast.positions])
    diff = paths - targets[None, :, :]
    dist = np.sqrt(diff[:, :, 0] * diff[:, :, 0] + diff[:, :, 1] * diff[:, :, 1]
                   + diff[:, :, 2] * diff[:, :, 2])
    # explicit left-to-right accumulation, matching score_sequence exactly
    scores = dist[:, 0].copy()
    for i in range(1, dist.shape[1]):
        scores += dist[:, i]
    return scores


def plan_mpc(agent: AgentState, forecast: Forecast, cfg: PlannerConfig, sampler,
             rng: np.random.Generator, drone: DroneSpec, dt: float) -> PlanResult:
    """Evaluate all sampled sequences and return the argmin; ties break on the
    lowest sample index, so the result is independent of evaluation order.

    sampler(cfg, rng) must yield an (n_samples, horizon, 3) array of candidate
    sequences already clamped to the drone's action bounds.
    """
    seqs = np.asarray(sampler(cfg, rng), dtype=np.float64)
    if seqs.shape != (cfg.n_samples, cfg.horizon, 3):
        raise ValueError(f"sampler returned shape {seqs.shape}, "
                         f"expected {(cfg.n_samples, cfg.horizon, 3)}")
    if forecast.horizon != cfg.horizon:
        raise ValueError(f"forecast horizon {forecast.horizon} != planner horizon {cfg.horizon}")
    paths = rollout_agent_batch(agent, seqs, drone, dt)
    scores = _score_batch(paths, forecast)
    best = int(np.argmin(scores))
    return PlanResult(
        best_action=Vec3.from_array(seqs[best, 0]),
        best_score=float(scores[best]),
        best_index=best,
        predicted_agent_path=tuple(Vec3.from_array(p) for p in paths[best]),
    )


def camera_angles(object_pos: Vec3, agent_pos: Vec3) -> tuple[float, float]:
    """Full-quadrant yaw/pitch pointing the camera from the agent to the object."""
    p = object_pos - agent_pos
    if p.x == 0.0 and p.y == 0.0 and p.z == 0.0:
        raise DegenerateDirectionError("object and agent positions coincide")
    return angles_to(p)


def static_target_forecast(target: Vec3, horizon: int) -> Forecast:
    """H copies of a fixed target point, so non-forecasting baselines reuse the
    identical planner."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    source = ObjectState(target, ZERO3, ZERO3)
    return Forecast(horizon, (target,) * horizon, source)
