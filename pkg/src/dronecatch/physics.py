"""Point-mass projectile dynamics: gravity, linear drag, and restitution bounces
against an axis-aligned room.

All state updates use the discrete position-then-velocity recurrence
(p += v*dt, then v += a*dt), the same scheme the forecaster and planner assume.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .geometry import Box, RoomGeometry, Vec3

STANDARD_GRAVITY = 9.81  # m/s^2, along -y

# Tangential velocity scaling applied once per collision event.
FRICTION_FACTOR = 0.95


class GeometryDegenerateError(Exception):
    """Collision sphere simultaneously penetrates opposing faces (object larger than gap)."""


@dataclass(frozen=True, slots=True)
class ObjectSpec:
    """Physical catalog entry for a throwable object (collision sphere)."""

    id: str
    mass: float          # kg
    bounciness: float    # restitution in [0, 1]
    drag: float          # 1/s, multiplicative velocity decay rate
    angular_drag: float  # carried for catalog completeness, unused by point-mass dynamics
    radius: float        # m

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"{self.id}: mass must be > 0")
        if not 0.0 <= self.bounciness <= 1.0:
            raise ValueError(f"{self.id}: bounciness must be in [0, 1]")
        if self.drag < 0 or self.angular_drag < 0:
            raise ValueError(f"{self.id}: drag coefficients must be >= 0")
        if self.radius <= 0:
            raise ValueError(f"{self.id}: radius must be > 0")


@dataclass(frozen=True, slots=True)
class ObjectState:
    o: Vec3  # position, m
    v: Vec3  # velocity, m/s
    a: Vec3  # acceleration, m/s^2


@dataclass(frozen=True, slots=True)
class SimConfig:
    gravity: float = STANDARD_GRAVITY
    control_dt: float = 0.02        # s; 50 steps = the 1 s episode cap
    physics_substeps: int = 4       # substeps per control step
    rest_speed_epsilon: float = 0.05  # m/s

    def __post_init__(self):
        if self.control_dt <= 0:
            raise ValueError("control_dt must be > 0")
        if self.physics_substeps < 1:
            raise ValueError("physics_substeps must be >= 1")

    @property
    def substep_dt(self) -> float:
        return self.control_dt / self.physics_substeps


def integrate_object_step(state: ObjectState, spec: ObjectSpec, dt: float,
                          gravity: float = STANDARD_GRAVITY) -> ObjectState:
    """One discrete step: position from the old velocity, velocity from the state's
    acceleration, then multiplicative drag decay. Resulting acceleration is gravity;
    external forces act only at launch."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    o, v, a = state.o, state.v, state.a
    nx = o.x + v.x * dt
    ny = o.y + v.y * dt
    nz = o.z + v.z * dt
    decay = 1.0 - spec.drag * dt
    if decay < 0.0:
        decay = 0.0
    vx = (v.x + a.x * dt) * decay
    vy = (v.y + a.y * dt) * decay
    vz = (v.z + a.z * dt) * decay
    return ObjectState(Vec3(nx, ny, nz), Vec3(vx, vy, vz), Vec3(0.0, -gravity, 0.0))


class CollisionResult(NamedTuple):
    state: ObjectState
    collided: bool
    floor_contact: bool


def resolve_collision(state: ObjectState, spec: ObjectSpec, room: RoomGeometry) -> CollisionResult:
    """Reflect the collision sphere out of any penetrated room face or obstacle.

    The velocity component normal to the contact is negated and scaled by
    bounciness; the tangential components are scaled once by FRICTION_FACTOR.
    """
    r = spec.radius
    pos = [state.o.x, state.o.y, state.o.z]
    vel = [state.v.x, state.v.y, state.v.z]
    lo = [room.min_corner.x + r, room.min_corner.y + r, room.min_corner.z + r]
    hi = [room.max_corner.x - r, room.max_corner.y - r, room.max_corner.z - r]

    normal_axes = []
    floor_contact = False
    for ax in range(3):
        if lo[ax] > hi[ax]:
            raise GeometryDegenerateError(
                f"sphere of radius {r} does not fit the room along axis {ax}")
        if pos[ax] < lo[ax]:
            reflected = 2.0 * lo[ax] - pos[ax]
            if reflected > hi[ax]:
                raise GeometryDegenerateError(
                    f"reflection along axis {ax} crosses the opposing face")
            pos[ax] = reflected
            normal_axes.append(ax)
            if ax == 1:
                floor_contact = True
        elif pos[ax] > hi[ax]:
            reflected = 2.0 * hi[ax] - pos[ax]
            if reflected < lo[ax]:
                raise GeometryDegenerateError(
                    f"reflection along axis {ax} crosses the opposing face")
            pos[ax] = reflected
            normal_axes.append(ax)

    if not normal_axes:
        hit = _resolve_obstacles(pos, vel, spec, room.obstacles)
        if not hit:
            return CollisionResult(state, False, False)
    else:
        _apply_bounce(vel, normal_axes, spec.bounciness)

    new_state = ObjectState(
        Vec3(pos[0], pos[1], pos[2]), Vec3(vel[0], vel[1], vel[2]), state.a)
    return CollisionResult(new_state, True, floor_contact)


def _apply_bounce(vel: list, normal_axes: list, bounciness: float) -> None:
    for ax in range(3):
        if ax in normal_axes:
            vel[ax] = -vel[ax] * bounciness
        else:
            vel[ax] = vel[ax] * FRICTION_FACTOR


def _resolve_obstacles(pos: list, vel: list, spec: ObjectSpec, obstacles: tuple[Box, ...]) -> bool:
    """Push the sphere out of the first penetrated obstacle along the axis of
    minimum overlap (minimum-translation heuristic for face contacts)."""
    r = spec.radius
    for box in obstacles:
        blo = (box.min_corner.x - r, box.min_corner.y - r, box.min_corner.z - r)
        bhi = (box.max_corner.x + r, box.max_corner.y + r, box.max_corner.z + r)
        if not all(blo[ax] < pos[ax] < bhi[ax] for ax in range(3)):
            continue
        best_ax, best_depth, best_face = 0, math.inf, 0.0
        for ax in range(3):
            d_lo = pos[ax] - blo[ax]   # depth if pushed out through the low face
            d_hi = bhi[ax] - pos[ax]
            if d_lo < best_depth:
                best_ax, best_depth, best_face = ax, d_lo, blo[ax]
            if d_hi < best_depth:
                best_ax, best_depth, best_face = ax, d_hi, bhi[ax]
        pos[best_ax] = 2.0 * best_face - pos[best_ax]
        _apply_bounce(vel, [best_ax], spec.bounciness)
        return True
    return False


class Terminal(enum.Enum):
    GROUND = "ground"     # grounded by a floor contact while still moving
    REST = "rest"         # grounded with negligible residual speed
    STEP_CAP = "step_cap"


class SubstepEvent(NamedTuple):
    state: ObjectState
    collided: bool
    new_event: bool           # a fresh (non-contiguous, non-terminal) collision event
    terminal: Terminal | None


class ObjectStepper:
    """Advances one object at substep resolution with shared event bookkeeping.

    Both simulate_trajectory and the episode loop drive this class, so the
    agent-free reference trajectory and the live episode evolve bit-identically.
    Floor contacts whose post-bounce vertical speed falls below
    rest_speed_epsilon ground the object: terminal Rest if the total residual
    speed is also below epsilon, Ground otherwise. Livelier bounces keep the
    trajectory in play. Terminal floor contacts are not collision events;
    everything else (walls, ceiling, obstacles, lively floor bounces) counts,
    with contiguous penetrating substeps merged into one event.
    """

    def __init__(self, spec: ObjectSpec, room: RoomGeometry, cfg: SimConfig):
        self.spec = spec
        self.room = room
        self.cfg = cfg
        self._in_contact = False
        self.collision_count = 0

    def substep(self, state: ObjectState) -> SubstepEvent:
        state = integrate_object_step(state, self.spec, self.cfg.substep_dt, self.cfg.gravity)
        state, collided, floor = resolve_collision(state, self.spec, self.room)
        terminal = None
        if floor and state.v.y < self.cfg.rest_speed_epsilon:
            speed = state.v.norm()
            terminal = Terminal.REST if speed < self.cfg.rest_speed_epsilon else Terminal.GROUND
        new_event = collided and not self._in_contact and terminal is None
        if new_event:
            self.collision_count += 1
        self._in_contact = collided
        return SubstepEvent(state, collided, new_event, terminal)


@dataclass
class SimResult:
    """Trajectory sampled at control-step boundaries (states[0] is the initial state)."""

    states: list[ObjectState]
    collision_count: int
    terminal: Terminal
    terminal_step: int  # control step index at which the terminal fired

    @property
    def positions(self) -> list[Vec3]:
        return [s.o for s in self.states]


def simulate_trajectory(spec: ObjectSpec, initial: ObjectState, room: RoomGeometry,
                        cfg: SimConfig, max_steps: int) -> SimResult:
    """Roll the object forward for up to max_steps control steps."""
    stepper = ObjectStepper(spec, room, cfg)
    state = initial
    states = [initial]
    for step in range(max_steps):
        for _ in range(cfg.physics_substeps):
            state, _, _, terminal = stepper.substep(state)
            if terminal is not None:
                states.append(state)
                return SimResult(states, stepper.collision_count, terminal, step)
        states.append(state)
    return SimResult(states, stepper.collision_count, Terminal.STEP_CAP, max_steps)
