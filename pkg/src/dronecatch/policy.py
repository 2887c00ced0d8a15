"""Action-sequence generation: uniform sampler, learned Gaussian policy sampler,
actor-critic updates, and the direct-control baseline policy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import AgentState, DroneSpec, EpisodeRecord, Outcome
from .forecaster import Forecast
from .geometry import Vec3, ZERO3
from .neural import (Mlp, adam_step, load_checkpoint, mlp_backward, mlp_forward,
                     mlp_init, save_checkpoint)
from .perception import ObservationWindow, window_ready
from .physics import ObjectState
from .planner import PlannerConfig

LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0
_LOG_2PI = math.log(2.0 * math.pi)

# Fixed context normalization (positions m, velocities m/s, accelerations m/s^2).
_POS_SCALE = 1.0 / 3.0
_VEL_SCALE = 1.0 / 10.0
_ACC_SCALE = 1.0 / 25.0

DEFAULT_POLICY_HIDDEN = (64, 64)


@dataclass(frozen=True, slots=True)
class RewardSpec:
    success_bonus: float = 1.0
    distance_coefficient: float = 0.01
    gamma: float = 0.99

    def __post_init__(self):
        if self.success_bonus < 0 or self.distance_coefficient < 0:
            raise ValueError("reward coefficients must be >= 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")


def context_vector(agent: AgentState, forecast: Forecast, est: ObjectState) -> np.ndarray:
    """Policy/critic input: agent state (11), forecast positions relative to the
    drone (3H), estimated object state with position relative to the drone (9)."""
    d = agent.d
    parts = [
        d.x * _POS_SCALE, d.y * _POS_SCALE, d.z * _POS_SCALE,
        agent.v.x * _VEL_SCALE, agent.v.y * _VEL_SCALE, agent.v.z * _VEL_SCALE,
        agent.a.x * _ACC_SCALE, agent.a.y * _ACC_SCALE, agent.a.z * _ACC_SCALE,
        agent.phi, agent.theta,
    ]
    for p in forecast.positions:
        parts.extend(((p.x - d.x) * _POS_SCALE, (p.y - d.y) * _POS_SCALE,
                      (p.z - d.z) * _POS_SCALE))
    parts.extend(((est.o.x - d.x) * _POS_SCALE, (est.o.y - d.y) * _POS_SCALE,
                  (est.o.z - d.z) * _POS_SCALE))
    parts.extend((est.v.x * _VEL_SCALE, est.v.y * _VEL_SCALE, est.v.z * _VEL_SCALE))
    parts.extend((est.a.x * _ACC_SCALE, est.a.y * _ACC_SCALE, est.a.z * _ACC_SCALE))
    return np.array(parts)


def context_dim(horizon: int) -> int:
    return 11 + 3 * horizon + 9


@dataclass
class PolicyNet:
    """Gaussian over a whole H x 3 acceleration sequence.

    The network emits (mean, log_std) for all 3H dims; means are in units of
    max_accel so a fresh network proposes near-hover sequences, log_std is
    clamped to [LOG_STD_MIN, LOG_STD_MAX] in raw m/s^2 units.
    """

    net: Mlp
    horizon: int
    max_accel: float

    @staticmethod
    def new(rng: np.random.Generator, horizon: int = 3, max_accel: float = 25.0,
            hidden=DEFAULT_POLICY_HIDDEN, init_log_std: float = 0.5) -> "PolicyNet":
        sizes = [context_dim(horizon), *hidden, 6 * horizon]
        net = mlp_init(sizes, rng, last_layer_scale=0.01)
        net.biases[-1][3 * horizon:] = init_log_std
        return PolicyNet(net, horizon, max_accel)

    def distribution(self, ctx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(mean, log_std) over the 3H action dims, raw units and clamps applied."""
        out, _ = mlp_forward(self.net, ctx)
        k = 3 * self.horizon
        mean = out[..., :k] * self.max_accel
        log_std = np.clip(out[..., k:], LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std

    def save(self, path) -> None:
        save_checkpoint(path, self.net, {"horizon": self.horizon, "max_accel": self.max_accel})

    @staticmethod
    def load(path) -> "PolicyNet":
        net, extras = load_checkpoint(path)
        return PolicyNet(net, int(extras["horizon"]), float(extras["max_accel"]))


@dataclass
class CriticNet:
    net: Mlp
    horizon: int

    @staticmethod
    def new(rng: np.random.Generator, horizon: int = 3, hidden=DEFAULT_POLICY_HIDDEN) -> "CriticNet":
        return CriticNet(mlp_init([context_dim(horizon), *hidden, 1], rng), horizon)

    def value(self, ctx: np.ndarray) -> np.ndarray:
        out, _ = mlp_forward(self.net, ctx)
        return out[..., 0]

    def save(self, path) -> None:
        save_checkpoint(path, self.net, {"horizon": self.horizon})

    @staticmethod
    def load(path) -> "CriticNet":
        net, extras = load_checkpoint(path)
        return CriticNet(net, int(extras["horizon"]))


def uniform_sample(cfg: PlannerConfig, drone: DroneSpec, rng: np.random.Generator) -> np.ndarray:
    """(N, H, 3) i.i.d. uniform on [-max_accel, +max_accel]. Drawn in one C-order
    block so a smaller N is a prefix of a larger N under the same stream."""
    a = drone.max_accel
    return rng.uniform(-a, a, (cfg.n_samples, cfg.horizon, 3))


def gaussian_log_density(x: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Sum of per-dimension Gaussian log densities over the last axis."""
    std = np.exp(log_std)
    z = (x - mean) / std
    return (-0.5 * z * z - log_std - 0.5 * _LOG_2PI).sum(axis=-1)


@dataclass
class PolicySample:
    sequences: np.ndarray   # (N, H, 3), clamped to the action bounds
    raw: np.ndarray         # (N, H, 3), pre-clamp Gaussian draws
    logp_first: np.ndarray  # (N,), log density of each pre-clamp first action


def policy_sample(policy: PolicyNet, context: np.ndarray, cfg: PlannerConfig,
                  rng: np.random.Generator) -> PolicySample:
    """N Gaussian draws of whole sequences; log densities are of the pre-clamp
    first actions (clamping never alters them)."""
    if cfg.horizon != policy.horizon:
        raise ValueError(f"planner horizon {cfg.horizon} != policy horizon {policy.horizon}")
    mean, log_std = policy.distribution(context)
    std = np.exp(log_std)
    z = rng.standard_normal((cfg.n_samples, cfg.horizon, 3))
    raw = mean.reshape(cfg.horizon, 3)[None] + std.reshape(cfg.horizon, 3)[None] * z
    sequences = np.clip(raw, -policy.max_accel, policy.max_accel)
    logp_first = gaussian_log_density(raw[:, 0, :], mean[:3], log_std[:3])
    return PolicySample(sequences, raw, logp_first)


def compute_returns(record: EpisodeRecord, spec: RewardSpec) -> np.ndarray:
    """Discounted suffix sums of the per-step shaping: -coef*distance each step,
    success bonus at the final step when caught. At gamma=1 the first return
    equals the episode reward exactly."""
    rewards = [-spec.distance_coefficient * s.agent.d.distance_to(s.object.o)
               for s in record.steps]
    if not rewards:
        return np.zeros(0)
    if record.outcome is Outcome.CAUGHT:
        rewards[-1] += spec.success_bonus
    returns = np.empty(len(rewards))
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + spec.gamma * acc
        returns[i] = acc
    return returns


@dataclass
class PolicyEpisode:
    """Per-step training tuples for one episode: contexts, executed pre-clamp
    first actions, and returns. Steps where the controller fell back to a zero
    action (no estimate yet) are already filtered out."""

    contexts: np.ndarray  # (T, context_dim)
    actions: np.ndarray   # (T, 3) pre-clamp draws of the executed first action
    returns: np.ndarray   # (T,)


def actor_critic_update(policy: PolicyNet, critic: CriticNet, batch: list[PolicyEpisode],
                        policy_adam, critic_adam, entropy_coef: float = 0.01) -> dict:
    """One synchronous advantage actor-critic step over a batch of episodes.

    Policy loss: -mean(A * log pi(a | ctx)) - entropy_coef * mean(entropy), with
    credit only on the executed first action of each chosen sequence. Critic
    loss: mean squared error of V(ctx) against the returns.
    """
    if not batch:
        raise ValueError("empty batch")
    ctx = np.concatenate([ep.contexts for ep in batch])
    act = np.concatenate([ep.actions for ep in batch])
    ret = np.concatenate([ep.returns for ep in batch])
    m = len(ctx)
    if m == 0:
        raise ValueError("batch contains no usable steps")

    v_out, v_cache = mlp_forward(critic.net, ctx)
    values = v_out[:, 0]
    v_err = values - ret
    critic_loss = float(np.mean(v_err ** 2))
    d_v = (2.0 * v_err / m)[:, None]
    v_grads = mlp_backward(critic.net, v_cache, d_v)
    adam_step(critic.net.parameters(), v_grads.parameters(), critic_adam)

    advantages = ret - values  # critic output treated as a constant baseline

    out, cache = mlp_forward(policy.net, ctx)
    k = 3 * policy.horizon
    mean1 = out[:, 0:3] * policy.max_accel
    ls_raw = out[:, k:k + 3]
    clip_mask = (ls_raw > LOG_STD_MIN) & (ls_raw < LOG_STD_MAX)
    log_std1 = np.clip(ls_raw, LOG_STD_MIN, LOG_STD_MAX)
    std1 = np.exp(log_std1)
    zn = (act - mean1) / std1
    logp = (-0.5 * zn * zn - log_std1 - 0.5 * _LOG_2PI).sum(axis=1)
    entropy = (log_std1 + 0.5 * (_LOG_2PI + 1.0)).sum(axis=1)
    policy_loss = float(-np.mean(advantages * logp) - entropy_coef * np.mean(entropy))

    d_out = np.zeros_like(out)
    adv_col = advantages[:, None]
    # d/d mean1 of -A*logp/m, chained through the max_accel scaling
    d_out[:, 0:3] = (-adv_col * zn / std1 / m) * policy.max_accel
    # d/d log_std of -A*logp/m - entropy_coef*entropy/m, gated by the clamp
    d_ls = -adv_col * (zn * zn - 1.0) / m - entropy_coef / m
    d_out[:, k:k + 3] = d_ls * clip_mask
    p_grads = mlp_backward(policy.net, cache, d_out)
    adam_step(policy.net.parameters(), p_grads.parameters(), policy_adam)

    return {
        "mean_return": float(np.mean([ep.returns[0] for ep in batch if len(ep.returns)])),
        "mean_advantage": float(np.mean(advantages)),
        "entropy": float(np.mean(entropy)),
        "critic_loss": critic_loss,
        "policy_loss": policy_loss,
        "steps": m,
    }


# ---------------------------------------------------------------------------
# Direct-control baseline: window + agent state -> one action, no planner.

MODEL_FREE_INPUT_DIM = 20  # agent state (11) + window positions relative to the drone (9)


@dataclass
class ModelFreePolicy:
    net: Mlp
    max_accel: float

    @staticmethod
    def new(rng: np.random.Generator, max_accel: float = 25.0,
            hidden=DEFAULT_POLICY_HIDDEN, init_log_std: float = 0.5) -> "ModelFreePolicy":
        net = mlp_init([MODEL_FREE_INPUT_DIM, *hidden, 6], rng, last_layer_scale=0.01)
        net.biases[-1][3:] = init_log_std
        return ModelFreePolicy(net, max_accel)

    @property
    def horizon(self) -> int:
        return 1

    def distribution(self, ctx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out, _ = mlp_forward(self.net, ctx)
        mean = out[..., :3] * self.max_accel
        log_std = np.clip(out[..., 3:], LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std

    def save(self, path) -> None:
        save_checkpoint(path, self.net, {"max_accel": self.max_accel})

    @staticmethod
    def load(path) -> "ModelFreePolicy":
        net, extras = load_checkpoint(path)
        return ModelFreePolicy(net, float(extras["max_accel"]))


def model_free_context(window: ObservationWindow, agent: AgentState,
                       origin: Vec3 = ZERO3) -> np.ndarray:
    d = agent.d
    parts = [
        d.x * _POS_SCALE, d.y * _POS_SCALE, d.z * _POS_SCALE,
        agent.v.x * _VEL_SCALE, agent.v.y * _VEL_SCALE, agent.v.z * _VEL_SCALE,
        agent.a.x * _ACC_SCALE, agent.a.y * _ACC_SCALE, agent.a.z * _ACC_SCALE,
        agent.phi, agent.theta,
    ]
    for obs in window:
        wx, wy, wz = obs.pos.x + origin.x, obs.pos.y + origin.y, obs.pos.z + origin.z
        parts.extend(((wx - d.x) * _POS_SCALE, (wy - d.y) * _POS_SCALE,
                      (wz - d.z) * _POS_SCALE))
    return np.array(parts)


def model_free_act(policy: ModelFreePolicy, window: ObservationWindow, agent: AgentState,
                   origin: Vec3 = ZERO3, rng: np.random.Generator | None = None) -> Vec3:
    """Single clamped action: Gaussian mean at evaluation, a sample when an rng is
    given (training). Missing/incomplete windows fall back to zero action."""
    if not window_ready(window):
        return ZERO3
    mean, log_std = policy.distribution(model_free_context(window, agent, origin))
    if rng is None:
        raw = mean
    else:
        raw = mean + np.exp(log_std) * rng.standard_normal(3)
    a = np.clip(raw, -policy.max_accel, policy.max_accel)
    return Vec3(float(a[0]), float(a[1]), float(a[2]))
