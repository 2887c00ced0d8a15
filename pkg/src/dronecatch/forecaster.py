"""Object-state forecasting: constant-acceleration rollouts of the discrete motion
recurrence, plus an MLP state estimator trained with L1 loss on noisy windows.

The rollout deliberately ignores drag and collisions; the gap between it and the
true simulator is what refreshed re-planning has to absorb.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Vec3
from .neural import (Mlp, adam_init, adam_step, load_checkpoint, mlp_backward,
                     mlp_forward, mlp_init, save_checkpoint)
from .perception import InsufficientObservationsError, ObservationWindow, window_ready
from .physics import ObjectState, STANDARD_GRAVITY


@dataclass(frozen=True, slots=True)
class Forecast:
    horizon: int
    positions: tuple[Vec3, ...]  # predicted positions for steps t+1 .. t+H
    source_state: ObjectState

    def __post_init__(self):
        if self.horizon < 1 or len(self.positions) != self.horizon:
            raise ValueError("positions length must equal the horizon")


def nme_advance(state: ObjectState, dt: float) -> ObjectState:
    """One constant-acceleration step (also the occlusion coasting rule)."""
    return ObjectState(state.o + state.v.scaled(dt), state.v + state.a.scaled(dt), state.a)


def nme_rollout(state: ObjectState, horizon: int, dt: float) -> Forecast:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be > 0")
    positions = []
    cur = state
    for _ in range(horizon):
        cur = nme_advance(cur, dt)
        positions.append(cur.o)
    return Forecast(horizon, tuple(positions), state)


def me_forecast_full(initial_state: ObjectState, total_steps: int, dt: float) -> Forecast:
    """Whole-episode rollout computed once at the first estimate and never refreshed;
    per-step queries slice this fixed forecast."""
    return nme_rollout(initial_state, total_steps, dt)


# ---------------------------------------------------------------------------
# Learned state estimator: (3-observation window, agent state) -> (o, v, a).
# Fixed normalization constants; inputs are start-frame positions.

_IN_SCALE = np.array([0.25] * 9            # window positions
                     + [0.25] * 3          # agent position
                     + [0.1] * 3           # agent velocity
                     + [0.04] * 3          # agent acceleration
                     + [0.6366, 0.3183])   # phi, theta
_OUT_SCALE = np.array([3.0] * 3 + [10.0] * 3 + [12.0] * 3)

ESTIMATOR_INPUT_DIM = 20
ESTIMATOR_OUTPUT_DIM = 9
DEFAULT_ESTIMATOR_HIDDEN = (64, 64)


def estimator_features(window: ObservationWindow, agent) -> np.ndarray:
    parts = []
    for obs in window:
        parts.extend((obs.pos.x, obs.pos.y, obs.pos.z))
    parts.extend(agent.d.as_tuple())
    parts.extend(agent.v.as_tuple())
    parts.extend(agent.a.as_tuple())
    parts.append(agent.phi)
    parts.append(agent.theta)
    return np.array(parts) * _IN_SCALE


@dataclass
class LearnedEstimator:
    net: Mlp

    @staticmethod
    def new(rng: np.random.Generator, hidden=DEFAULT_ESTIMATOR_HIDDEN) -> "LearnedEstimator":
        sizes = [ESTIMATOR_INPUT_DIM, *hidden, ESTIMATOR_OUTPUT_DIM]
        return LearnedEstimator(mlp_init(sizes, rng))

    def predict(self, features: np.ndarray) -> np.ndarray:
        out, _ = mlp_forward(self.net, features)
        return out * _OUT_SCALE

    def save(self, path) -> None:
        save_checkpoint(path, self.net)

    @staticmethod
    def load(path) -> "LearnedEstimator":
        net, _ = load_checkpoint(path)
        if net.layer_sizes[0] != ESTIMATOR_INPUT_DIM or net.layer_sizes[-1] != ESTIMATOR_OUTPUT_DIM:
            raise ValueError("checkpoint is not a state-estimator network")
        return LearnedEstimator(net)


def learned_estimate(model: LearnedEstimator, window: ObservationWindow, agent) -> ObjectState:
    """MLP estimate of the current (position, velocity, acceleration) from the
    flattened window + agent state. Positions stay in the window's frame."""
    if not window_ready(window):
        raise InsufficientObservationsError("learned estimator needs 3 consecutive visible observations")
    out = model.predict(estimator_features(window, agent))
    return ObjectState(Vec3.from_array(out[0:3]), Vec3.from_array(out[3:6]),
                       Vec3.from_array(out[6:9]))


def train_estimator(model: LearnedEstimator, inputs: np.ndarray, targets: np.ndarray,
                    rng: np.random.Generator, epochs: int = 8, batch_size: int = 256,
                    lr: float = 1e-3) -> list[float]:
    """Minibatch Adam on the L1 loss; returns the per-epoch mean L1 (raw units)."""
    if len(inputs) != len(targets) or len(inputs) == 0:
        raise ValueError("inputs/targets must be non-empty and aligned")
    adam = adam_init(model.net.parameters(), lr=lr)
    n = len(inputs)
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            x, y = inputs[idx], targets[idx]
            out, cache = mlp_forward(model.net, x)
            pred = out * _OUT_SCALE
            resid = pred - y
            epoch_loss += float(np.abs(resid).sum())
            d_out = np.sign(resid) * _OUT_SCALE / (len(idx) * ESTIMATOR_OUTPUT_DIM)
            grads = mlp_backward(model.net, cache, d_out)
            adam_step(model.net.parameters(), grads.parameters(), adam)
        losses.append(epoch_loss / (n * ESTIMATOR_OUTPUT_DIM))
    return losses


def build_training_windows(positions: np.ndarray, velocities: np.ndarray,
                           n_steps: np.ndarray, origins: np.ndarray,
                           sigma_obs: float, rng: np.random.Generator,
                           gravity: float = STANDARD_GRAVITY) -> tuple[np.ndarray, np.ndarray]:
    """Noisy 3-step windows with ground-truth targets from reference trajectories.

    positions/velocities: (N, T+1, 3) padded arrays; n_steps: last valid index per
    episode; origins: (N, 3) start-frame origins. Agent-state inputs are jittered
    so the network cannot latch onto the hovering spawn pose it would otherwise
    always see during data generation.
    """
    xs, ys = [], []
    for i in range(len(positions)):
        last = int(n_steps[i])
        if last < 2:
            continue
        rel = positions[i, :last + 1] - origins[i]
        noisy = rel + rng.normal(0.0, sigma_obs, rel.shape)
        for t in range(2, last + 1):
            agent_jitter = np.concatenate([
                rng.uniform(-2.0, 2.0, 3) + origins[i],
                rng.uniform(-3.0, 3.0, 3),
                rng.uniform(-10.0, 10.0, 3),
                rng.uniform(-1.0, 1.0, 2),
            ])
            row = np.concatenate([noisy[t - 2], noisy[t - 1], noisy[t], agent_jitter])
            xs.append(row * _IN_SCALE)
            ys.append(np.concatenate([rel[t], velocities[i, t], (0.0, -gravity, 0.0)]))
    if not xs:
        raise ValueError("no usable training windows")
    return np.array(xs), np.array(ys)
