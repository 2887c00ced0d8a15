"""Observation synthesis (noise + camera field-of-view gating) and the current-state
estimators: finite difference, latest-position, and the drift Kalman filter."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .geometry import Vec3, ZERO3, direction_from_angles
from .physics import ObjectState

if TYPE_CHECKING:
    from .environment import AgentState, EpisodeRecord

DEFAULT_SIGMA_OBS = 0.1  # m
DEFAULT_FOV_DEG = 90.0   # full cone angle


class InsufficientObservationsError(Exception):
    """An estimator needs observations that are missing from the window."""


@dataclass(frozen=True, slots=True)
class Observation:
    """Object position in the agent's start-frame coordinates, or MISSING when the
    object is outside the camera cone. pos is present iff visible."""

    t: int
    pos: Vec3 | None
    visible: bool

    def __post_init__(self):
        if self.visible != (self.pos is not None):
            raise ValueError("pos must be present exactly when visible")


# Window of the three most recent observations (t-2, t-1, t).
ObservationWindow = tuple[Observation, Observation, Observation]


def window_ready(window) -> bool:
    if window is None or len(window) != 3:
        return False
    a, b, c = window
    if not (a.visible and b.visible and c.visible):
        return False
    return b.t == a.t + 1 and c.t == b.t + 1


def observe(agent: "AgentState", obj: ObjectState, sigma_obs: float, fov_deg: float,
            rng: np.random.Generator, origin: Vec3 = ZERO3, t: int = 0) -> Observation:
    """Corrupt the object position with isotropic noise, then gate by the camera cone.

    The noise draw is consumed even when the object ends up outside the cone, so
    the observation stream stays aligned across methods that point their cameras
    differently on the same episode seed.
    """
    if sigma_obs < 0:
        raise ValueError("sigma_obs must be >= 0")
    if not 0 < fov_deg <= 180:
        raise ValueError("fov_deg must be in (0, 180]")
    pos = obj.o - origin
    if sigma_obs > 0:
        noise = rng.normal(0.0, sigma_obs, 3)
        pos = Vec3(pos.x + noise[0], pos.y + noise[1], pos.z + noise[2])
    rel = obj.o - agent.d
    dist = rel.norm()
    if dist > 0.0:
        axis = direction_from_angles(agent.theta, agent.phi)
        cos_angle = axis.dot(rel) / dist
        cos_angle = min(1.0, max(-1.0, cos_angle))
        if math.degrees(math.acos(cos_angle)) > fov_deg / 2:
            return Observation(t, None, False)
    return Observation(t, pos, True)


def finite_difference_estimate(window: ObservationWindow, dt: float) -> ObjectState:
    """Backward differences over the window: o = pos_t, v = (pos_t - pos_{t-1})/dt,
    a = (pos_t - 2 pos_{t-1} + pos_{t-2})/dt^2."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if not window_ready(window):
        raise InsufficientObservationsError("finite difference needs 3 consecutive visible observations")
    p0, p1, p2 = window[0].pos, window[1].pos, window[2].pos
    v = (p2 - p1).scaled(1.0 / dt)
    a = (p2 - p1.scaled(2.0) + p0).scaled(1.0 / (dt * dt))
    return ObjectState(p2, v, a)


def cpp_estimate(window: ObservationWindow) -> Vec3:
    """Latest observed position, verbatim; no velocity, no rollout."""
    latest = window[-1]
    if not latest.visible:
        raise InsufficientObservationsError("latest observation is missing")
    return latest.pos


@dataclass(frozen=True)
class KalmanState:
    """Per-axis constant-drift filter over object position.

    transition_drift is the mean per-control-step displacement from the training
    set; process_variance stores the per-axis std of those displacements and is
    squared when inflating the covariance (matching how it is estimated).
    """

    mean: Vec3
    covariance: np.ndarray               # 3x3, diagonal in practice
    transition_drift: Vec3
    process_variance: Vec3               # per-axis std of training displacements
    measurement_variance: float = 3e-2   # used directly as a variance

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=np.float64)
        if cov.shape != (3, 3):
            raise ValueError("covariance must be 3x3")
        if not np.allclose(cov, cov.T):
            raise ValueError("covariance must be symmetric")
        if np.any(np.diag(cov) < 0) or self.measurement_variance < 0:
            raise ValueError("variances must be >= 0")
        object.__setattr__(self, "covariance", cov)


def kalman_init(training_records: "list[EpisodeRecord] | list[list[Vec3]]") -> KalmanState:
    """Fit drift/process statistics from training trajectories.

    Accepts EpisodeRecords or bare per-step position lists; displacements are
    pooled per axis across all consecutive control steps.
    """
    displacements = []
    for rec in training_records:
        positions = [s.object.o for s in rec.steps] if hasattr(rec, "steps") else list(rec)
        for prev, cur in zip(positions, positions[1:]):
            d = cur - prev
            displacements.append((d.x, d.y, d.z))
    if not displacements:
        raise ValueError("empty training set")
    arr = np.array(displacements, dtype=np.float64)
    drift = arr.mean(axis=0)
    proc = arr.std(axis=0)
    return KalmanState(
        mean=ZERO3,
        covariance=np.eye(3),
        transition_drift=Vec3.from_array(drift),
        process_variance=Vec3.from_array(proc),
        measurement_variance=3e-2,
    )


def kalman_start(proto: KalmanState, pos: Vec3) -> KalmanState:
    """Seed the filter at the first observed position."""
    return replace(proto, mean=pos,
                   covariance=np.eye(3) * proto.measurement_variance)


def kalman_update(state: KalmanState, obs: Observation) -> KalmanState:
    """Predict with the constant drift, then correct per axis when visible."""
    drift = state.transition_drift
    q = state.process_variance
    p = np.diag(state.covariance).copy()
    mean = [state.mean.x + drift.x, state.mean.y + drift.y, state.mean.z + drift.z]
    p += np.array([q.x * q.x, q.y * q.y, q.z * q.z])
    if obs.visible:
        r = state.measurement_variance
        z = (obs.pos.x, obs.pos.y, obs.pos.z)
        for i in range(3):
            gain = p[i] / (p[i] + r) if p[i] + r > 0 else 0.0
            mean[i] = mean[i] + gain * (z[i] - mean[i])
            p[i] = (1.0 - gain) * p[i]
    return replace(state, mean=Vec3(mean[0], mean[1], mean[2]), covariance=np.diag(p))


