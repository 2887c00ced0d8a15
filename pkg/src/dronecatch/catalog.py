"""Object catalog I/O. One CSV record per ObjectSpec."""

from __future__ import annotations

import csv
import io
from importlib import resources
from pathlib import Path

from .physics import ObjectSpec

_FIELDS = ("id", "mass", "bounciness", "drag", "angular_drag", "radius")


def _parse_rows(rows) -> list[ObjectSpec]:
    specs = []
    for row in rows:
        specs.append(ObjectSpec(
            id=row["id"],
            mass=float(row["mass"]),
            bounciness=float(row["bounciness"]),
            drag=float(row["drag"]),
            angular_drag=float(row["angular_drag"]),
            radius=float(row["radius"]),
        ))
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate object ids in catalog")
    if not specs:
        raise ValueError("empty catalog")
    return specs


def load_catalog(path: str | Path) -> list[ObjectSpec]:
    with open(path, newline="") as fh:
        return _parse_rows(csv.DictReader(fh))


def save_catalog(specs: list[ObjectSpec], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_FIELDS)
        writer.writeheader()
        for s in specs:
            writer.writerow({
                "id": s.id, "mass": repr(s.mass), "bounciness": repr(s.bounciness),
                "drag": repr(s.drag), "angular_drag": repr(s.angular_drag),
                "radius": repr(s.radius),
            })


def default_catalog() -> list[ObjectSpec]:
    """Ten synthetic objects spanning mass 0.05-2.5 kg, bounciness 0.0-0.9, drag 0.0-1.0."""
    text = resources.files("dronecatch.data").joinpath("default_catalog.csv").read_text()
    return _parse_rows(csv.DictReader(io.StringIO(text)))


def by_id(specs: list[ObjectSpec]) -> dict[str, ObjectSpec]:
    return {s.id: s for s in specs}
