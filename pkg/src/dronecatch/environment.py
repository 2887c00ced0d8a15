"""Episode orchestration: launcher, drone dynamics, catch detection, termination,
and difficulty labeling."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

import numpy as np

from .geometry import Box, RoomGeometry, Vec3, ZERO3, angles_to, default_room
from .physics import (ObjectSpec, ObjectState, ObjectStepper, SimConfig, Terminal)

# Seed-stream tags so placement, throw, and per-run noise never share a stream.
_PLACEMENT_TAG = 3
_THROW_TAG = 7
_OBS_TAG = 11
_MOVE_TAG = 12
_CONTROL_TAG = 13

_LAUNCHER_WALL_MARGIN = 0.6  # m, keeps the muzzle clear of walls
_PLACEMENT_RETRIES = 128


class PlacementInfeasibleError(Exception):
    """No valid launcher/drone pair found within the retry budget."""


class EpisodeAbortError(Exception):
    """A controller raised during an episode; carries the step diagnostic."""


@dataclass(frozen=True, slots=True)
class AgentState:
    d: Vec3       # position, m
    v: Vec3       # velocity, m/s
    a: Vec3       # last applied (realized) acceleration, m/s^2
    phi: float    # camera pitch, rad
    theta: float  # camera yaw, rad


@dataclass(frozen=True, slots=True)
class DroneSpec:
    max_accel: float = 25.0     # m/s^2, per-component action cap
    max_velocity: float = 40.0  # m/s
    body_extent: Vec3 = Vec3(0.47, 0.14, 0.37)
    basket_extent: Vec3 = Vec3(0.3, 0.2, 0.3)  # basket sits centered on the body top
    movement_noise_sigma: float = 0.0  # fraction of max_accel, std per component

    def __post_init__(self):
        if self.max_accel <= 0 or self.max_velocity <= 0:
            raise ValueError("drone caps must be positive")
        if min(self.body_extent.as_tuple()) <= 0 or min(self.basket_extent.as_tuple()) <= 0:
            raise ValueError("drone extents must be positive")
        if self.movement_noise_sigma < 0:
            raise ValueError("movement_noise_sigma must be >= 0")

    def with_mobility(self, fraction: float) -> "DroneSpec":
        """Scaled-acceleration variant used by the mobility ablation."""
        if not 0 < fraction <= 1:
            raise ValueError("mobility fraction must be in (0, 1]")
        return replace(self, max_accel=self.max_accel * fraction)


@dataclass(frozen=True, slots=True)
class LauncherConfig:
    force_range: tuple[float, float] = (40.0, 60.0)        # N
    elevation_range: tuple[float, float] = (45.0, 60.0)    # deg above horizontal
    azimuth_range: tuple[float, float] = (-30.0, 30.0)     # deg about the launcher->drone bearing
    height: float = 1.8                                    # m, muzzle above the floor
    horizontal_distance_to_drone: float = 2.0              # m
    impulse_duration: float = 0.05                         # s, launch speed = F*tau/mass

    def __post_init__(self):
        for lo, hi in (self.force_range, self.elevation_range, self.azimuth_range):
            if lo > hi:
                raise ValueError("launcher range must be non-empty")
        if self.height <= 0 or self.horizontal_distance_to_drone <= 0 or self.impulse_duration <= 0:
            raise ValueError("launcher geometry must be positive")


@dataclass(frozen=True, slots=True)
class EpisodeConfig:
    seed: int
    object: ObjectSpec
    room: RoomGeometry = field(default_factory=default_room)
    drone: DroneSpec = field(default_factory=DroneSpec)
    launcher: LauncherConfig = field(default_factory=LauncherConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    max_control_steps: int = 50

    def __post_init__(self):
        if self.max_control_steps < 1:
            raise ValueError("max_control_steps must be >= 1")

    def to_dict(self) -> dict:
        o = self.object
        return {
            "seed": self.seed,
            "object": {"id": o.id, "mass": o.mass, "bounciness": o.bounciness,
                       "drag": o.drag, "angular_drag": o.angular_drag, "radius": o.radius},
            "room": {
                "min_corner": self.room.min_corner.as_tuple(),
                "max_corner": self.room.max_corner.as_tuple(),
                "obstacles": [[b.min_corner.as_tuple(), b.max_corner.as_tuple()]
                              for b in self.room.obstacles],
            },
            "drone": {"max_accel": self.drone.max_accel,
                      "max_velocity": self.drone.max_velocity,
                      "body_extent": self.drone.body_extent.as_tuple(),
                      "basket_extent": self.drone.basket_extent.as_tuple(),
                      "movement_noise_sigma": self.drone.movement_noise_sigma},
            "launcher": {"force_range": self.launcher.force_range,
                         "elevation_range": self.launcher.elevation_range,
                         "azimuth_range": self.launcher.azimuth_range,
                         "height": self.launcher.height,
                         "horizontal_distance_to_drone": self.launcher.horizontal_distance_to_drone,
                         "impulse_duration": self.launcher.impulse_duration},
            "sim": {"gravity": self.sim.gravity, "control_dt": self.sim.control_dt,
                    "physics_substeps": self.sim.physics_substeps,
                    "rest_speed_epsilon": self.sim.rest_speed_epsilon},
            "max_control_steps": self.max_control_steps,
        }

    @staticmethod
    def from_dict(d: dict) -> "EpisodeConfig":
        room = d["room"]
        launcher = d["launcher"]
        return EpisodeConfig(
            seed=int(d["seed"]),
            object=ObjectSpec(**d["object"]),
            room=RoomGeometry(
                Vec3(*room["min_corner"]), Vec3(*room["max_corner"]),
                tuple(Box(Vec3(*lo), Vec3(*hi)) for lo, hi in room["obstacles"])),
            drone=DroneSpec(
                max_accel=d["drone"]["max_accel"],
                max_velocity=d["drone"]["max_velocity"],
                body_extent=Vec3(*d["drone"]["body_extent"]),
                basket_extent=Vec3(*d["drone"]["basket_extent"]),
                movement_noise_sigma=d["drone"]["movement_noise_sigma"]),
            launcher=LauncherConfig(
                force_range=tuple(launcher["force_range"]),
                elevation_range=tuple(launcher["elevation_range"]),
                azimuth_range=tuple(launcher["azimuth_range"]),
                height=launcher["height"],
                horizontal_distance_to_drone=launcher["horizontal_distance_to_drone"],
                impulse_duration=launcher["impulse_duration"]),
            sim=SimConfig(**d["sim"]),
            max_control_steps=int(d["max_control_steps"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_json(text: str) -> "EpisodeConfig":
        return EpisodeConfig.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @staticmethod
    def load(path: str | Path) -> "EpisodeConfig":
        return EpisodeConfig.from_json(Path(path).read_text())


class Outcome(enum.Enum):
    CAUGHT = "caught"
    GROUND = "ground"
    REST = "rest"
    STEP_CAP = "step_cap"


class Difficulty(enum.Enum):
    EASY = "easy"
    MEDIUM = "medium"
    DIFFICULT = "difficult"


@dataclass(frozen=True, slots=True)
class StepLog:
    t: int
    agent: AgentState      # state when the controller acted
    object: ObjectState
    observation: object    # perception.Observation
    action: Vec3
    collided: bool         # any object collision during this control step


@dataclass
class EpisodeRecord:
    steps: list[StepLog]
    outcome: Outcome
    collision_count: int
    reward: float

    @property
    def caught(self) -> bool:
        return self.outcome is Outcome.CAUGHT

    def recompute_reward(self) -> float:
        dist = sum(s.agent.d.distance_to(s.object.o) for s in self.steps)
        return (1.0 if self.caught else 0.0) - 0.01 * dist


class Controller(Protocol):
    """Maps (observation history, agent state, step index) to an action and an
    optional camera request (theta, phi)."""

    def reset(self, cfg: EpisodeConfig, agent: AgentState, rng: np.random.Generator) -> None: ...

    def act(self, obs, agent: AgentState, t: int) -> tuple[Vec3, tuple[float, float] | None]: ...


def _placement(cfg: EpisodeConfig) -> tuple[Vec3, Vec3]:
    """Seeded launcher muzzle + drone position, exactly the configured horizontal
    distance apart. Draw order: launcher x, launcher z, then bearing per retry."""
    room = cfg.room
    if cfg.launcher.height >= room.max_corner.y:
        raise PlacementInfeasibleError("launcher height above the room ceiling")
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, _PLACEMENT_TAG)))
    m = _LAUNCHER_WALL_MARGIN
    lx_lo, lx_hi = room.min_corner.x + m, room.max_corner.x - m
    lz_lo, lz_hi = room.min_corner.z + m, room.max_corner.z - m
    if lx_lo >= lx_hi or lz_lo >= lz_hi:
        raise PlacementInfeasibleError("room too small for the launcher margin")
    drone_margin_x = cfg.drone.body_extent.x / 2 + 0.05
    drone_margin_z = cfg.drone.body_extent.z / 2 + 0.05
    dist = cfg.launcher.horizontal_distance_to_drone
    for _ in range(_PLACEMENT_RETRIES):
        lx = rng.uniform(lx_lo, lx_hi)
        lz = rng.uniform(lz_lo, lz_hi)
        bearing = rng.uniform(0.0, 2.0 * math.pi)
        dx = lx + dist * math.sin(bearing)
        dz = lz + dist * math.cos(bearing)
        if (room.min_corner.x + drone_margin_x <= dx <= room.max_corner.x - drone_margin_x
                and room.min_corner.z + drone_margin_z <= dz <= room.max_corner.z - drone_margin_z):
            muzzle = Vec3(lx, room.min_corner.y + cfg.launcher.height, lz)
            drone = Vec3(dx, room.min_corner.y + cfg.launcher.height, dz)
            return muzzle, drone
    raise PlacementInfeasibleError(
        f"no valid placement after {_PLACEMENT_RETRIES} retries (seed {cfg.seed})")


def spawn_episode(cfg: EpisodeConfig) -> tuple[AgentState, ObjectState]:
    """Place launcher and drone; the drone camera points at the muzzle."""
    muzzle, drone_pos = _placement(cfg)
    theta, phi = angles_to(muzzle - drone_pos)
    agent = AgentState(drone_pos, ZERO3, ZERO3, phi=phi, theta=theta)
    obj = ObjectState(muzzle, ZERO3, Vec3(0.0, -cfg.sim.gravity, 0.0))
    return agent, obj


def launch_object(cfg: EpisodeConfig, rng: np.random.Generator) -> ObjectState:
    """Sample (force, elevation, azimuth) uniformly and convert the impulse to an
    initial velocity aimed about the launcher->drone bearing."""
    muzzle, drone_pos = _placement(cfg)
    force = rng.uniform(*cfg.launcher.force_range)
    elev = math.radians(rng.uniform(*cfg.launcher.elevation_range))
    azim = math.radians(rng.uniform(*cfg.launcher.azimuth_range))
    hx, hz = drone_pos.x - muzzle.x, drone_pos.z - muzzle.z
    hn = math.hypot(hx, hz)
    hx, hz = hx / hn, hz / hn
    # rotate the horizontal bearing about y by the azimuth
    rx = hx * math.cos(azim) + hz * math.sin(azim)
    rz = -hx * math.sin(azim) + hz * math.cos(azim)
    speed = force * cfg.launcher.impulse_duration / cfg.object.mass
    horiz = speed * math.cos(elev)
    v0 = Vec3(horiz * rx, speed * math.sin(elev), horiz * rz)
    return ObjectState(muzzle, v0, Vec3(0.0, -cfg.sim.gravity, 0.0))


def step_agent(state: AgentState, action: Vec3, drone: DroneSpec, dt: float,
               rng: np.random.Generator | None = None,
               room: RoomGeometry | None = None) -> AgentState:
    """Clamp the action, add movement noise, advance position then velocity,
    cap speed, and (when a room is given) clamp the drone inside it."""
    amax = drone.max_accel
    ax = min(max(action.x, -amax), amax)
    ay = min(max(action.y, -amax), amax)
    az = min(max(action.z, -amax), amax)
    if rng is not None and drone.movement_noise_sigma > 0.0:
        noise = rng.normal(0.0, drone.movement_noise_sigma * amax, 3)
        ax += noise[0]
        ay += noise[1]
        az += noise[2]
    dx = state.d.x + state.v.x * dt
    dy = state.d.y + state.v.y * dt
    dz = state.d.z + state.v.z * dt
    vx = state.v.x + ax * dt
    vy = state.v.y + ay * dt
    vz = state.v.z + az * dt
    speed = math.sqrt(vx * vx + vy * vy + vz * vz)
    if speed > drone.max_velocity:
        s = drone.max_velocity / speed
        vx *= s
        vy *= s
        vz *= s
    if room is not None:
        half = (drone.body_extent.x / 2, drone.body_extent.y / 2, drone.body_extent.z / 2)
        pos = [dx, dy, dz]
        vel = [vx, vy, vz]
        mins = (room.min_corner.x, room.min_corner.y, room.min_corner.z)
        maxs = (room.max_corner.x, room.max_corner.y, room.max_corner.z)
        for i in range(3):
            lo, hi = mins[i] + half[i], maxs[i] - half[i]
            if pos[i] < lo:
                pos[i] = lo
                vel[i] = 0.0
            elif pos[i] > hi:
                pos[i] = hi
                vel[i] = 0.0
        dx, dy, dz = pos
        vx, vy, vz = vel
    return AgentState(Vec3(dx, dy, dz), Vec3(vx, vy, vz), Vec3(ax, ay, az),
                      phi=state.phi, theta=state.theta)


def check_catch(agent: AgentState, obj: ObjectState, drone: DroneSpec) -> bool:
    """True iff the object center lies inside the basket box on the drone's top."""
    body_top = agent.d.y + drone.body_extent.y / 2
    return (abs(obj.o.x - agent.d.x) <= drone.basket_extent.x / 2
            and abs(obj.o.z - agent.d.z) <= drone.basket_extent.z / 2
            and body_top <= obj.o.y <= body_top + drone.basket_extent.y)


def run_episode(cfg: EpisodeConfig, controller: Controller, run_seed: int = 0,
                camera_mode: str = "rotating", sigma_obs: float = 0.1,
                fov_deg: float = 90.0) -> EpisodeRecord:
    """Play one throw. Per control step: observe, ask the controller for an action,
    advance the object at substep resolution (catch and floor deadline checked per
    substep), move the agent, check the catch again, then update the camera.

    The throw is fixed by cfg.seed; run_seed varies only the observation noise,
    movement noise, and sampler streams so repeats share the same episode set.
    """
    from .perception import observe  # local import keeps perception import-light

    if camera_mode not in ("rotating", "fixed", "gt"):
        raise ValueError(f"unknown camera mode: {camera_mode}")
    agent, _ = spawn_episode(cfg)
    origin = agent.d
    obj = launch_object(cfg, np.random.default_rng(np.random.SeedSequence((cfg.seed, _THROW_TAG))))
    obs_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, run_seed, _OBS_TAG)))
    move_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, run_seed, _MOVE_TAG)))
    ctrl_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, run_seed, _CONTROL_TAG)))
    controller.reset(cfg, agent, ctrl_rng)

    stepper = ObjectStepper(cfg.object, cfg.room, cfg.sim)
    steps: list[StepLog] = []
    outcome: Outcome | None = None
    for t in range(cfg.max_control_steps):
        obs = observe(agent, obj, sigma_obs, fov_deg, obs_rng, origin)
        try:
            action, cam = controller.act(obs, agent, t)
        except Exception as exc:
            raise EpisodeAbortError(
                f"controller {type(controller).__name__} failed at step {t}: {exc!r}") from exc
        agent_pre, obj_pre = agent, obj
        step_collided = False
        for _ in range(cfg.sim.physics_substeps):
            obj, collided, _, terminal = stepper.substep(obj)
            step_collided = step_collided or collided
            if terminal is not None:
                outcome = Outcome.REST if terminal is Terminal.REST else Outcome.GROUND
                break
            if check_catch(agent, obj, cfg.drone):
                outcome = Outcome.CAUGHT
                break
        if outcome is None:
            agent = step_agent(agent, action, cfg.drone, cfg.sim.control_dt, move_rng, cfg.room)
            if check_catch(agent, obj, cfg.drone):
                outcome = Outcome.CAUGHT
        steps.append(StepLog(t, agent_pre, obj_pre, obs, action, step_collided))
        if outcome is not None:
            break
        if camera_mode == "rotating" and cam is not None:
            agent = replace(agent, theta=float(cam[0]), phi=float(cam[1]))
        elif camera_mode == "gt":
            theta, phi = angles_to(obj.o - agent.d)
            agent = replace(agent, theta=theta, phi=phi)
    if outcome is None:
        outcome = Outcome.STEP_CAP
    dist = sum(s.agent.d.distance_to(s.object.o) for s in steps)
    reward = (1.0 if outcome is Outcome.CAUGHT else 0.0) - 0.01 * dist
    return EpisodeRecord(steps, outcome, stepper.collision_count, reward)


def classify_difficulty(record: EpisodeRecord) -> Difficulty:
    return classify_collision_count(record.collision_count)


def classify_collision_count(count: int) -> Difficulty:
    if count == 0:
        return Difficulty.EASY
    if count == 1:
        return Difficulty.MEDIUM
    return Difficulty.DIFFICULT
