"""Axis-aligned geometry primitives shared by the simulator, planner, and perception."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, slots=True)
class Vec3:
    """3-component vector (m, m/s, or m/s^2 by context). y is up; gravity acts along -y."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite vector component: ({self.x}, {self.y}, {self.z})")

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def scaled(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def distance_to(self, other: "Vec3") -> float:
        dx = self.x - other.x
        dy = self.y - other.y
        dz = self.z - other.z
        return math.sqrt(dx * dx + dy * dy + dz * dz)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "Vec3":
        return Vec3(float(a[0]), float(a[1]), float(a[2]))


ZERO3 = Vec3(0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class Box:
    """Axis-aligned box given by opposite corners."""

    min_corner: Vec3
    max_corner: Vec3

    def __post_init__(self):
        lo, hi = self.min_corner, self.max_corner
        if not (lo.x < hi.x and lo.y < hi.y and lo.z < hi.z):
            raise ValueError("box min_corner must be componentwise below max_corner")

    def contains(self, p: Vec3) -> bool:
        lo, hi = self.min_corner, self.max_corner
        return lo.x <= p.x <= hi.x and lo.y <= p.y <= hi.y and lo.z <= p.z <= hi.z

    def strictly_inside(self, other: "Box") -> bool:
        lo, hi = self.min_corner, self.max_corner
        olo, ohi = other.min_corner, other.max_corner
        return (olo.x < lo.x and olo.y < lo.y and olo.z < lo.z
                and hi.x < ohi.x and hi.y < ohi.y and hi.z < ohi.z)


@dataclass(frozen=True, slots=True)
class RoomGeometry:
    """Room box plus axis-aligned obstacles, all collidable from the inside/outside respectively."""

    min_corner: Vec3
    max_corner: Vec3
    obstacles: tuple[Box, ...] = ()

    def __post_init__(self):
        bounds = Box(self.min_corner, self.max_corner)  # validates ordering
        for obs in self.obstacles:
            if not obs.strictly_inside(bounds):
                raise ValueError("every obstacle must lie strictly inside the room")

    @property
    def floor_y(self) -> float:
        return self.min_corner.y

    def contains(self, p: Vec3) -> bool:
        return Box(self.min_corner, self.max_corner).contains(p)


def default_room() -> RoomGeometry:
    """6 x 3 x 6 m empty room, the benchmark default."""
    return RoomGeometry(Vec3(0.0, 0.0, 0.0), Vec3(6.0, 3.0, 6.0))


def angles_to(p: Vec3) -> tuple[float, float]:
    """Camera yaw/pitch pointing along p: theta = atan2(p_x, p_z) about the y axis,
    phi the elevation from the horizontal plane. Full-quadrant; theta in (-pi, pi],
    phi in [-pi/2, pi/2]."""
    theta = math.atan2(p.x, p.z)
    phi = math.atan2(p.y, math.hypot(p.x, p.z))
    return theta, phi


def direction_from_angles(theta: float, phi: float) -> Vec3:
    ch = math.cos(phi)
    return Vec3(math.sin(theta) * ch, math.sin(phi), math.cos(theta) * ch)
