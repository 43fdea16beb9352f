"""Planar geometry primitives shared by the protocol, mobility and analysis code.

All lengths are in normalized units (node density one per unit area); any
conversion to meters/seconds happens at the presentation layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Point2:
    """A point in the plane."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"coordinates must be finite, got ({self.x}, {self.y})")

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True, slots=True)
class Annulus:
    """An annular region: inner radius and radial thickness around a center."""

    center: Point2
    inner_radius: float
    thickness: float

    def __post_init__(self):
        if self.inner_radius <= 0:
            raise ValueError(f"inner_radius must be > 0, got {self.inner_radius}")
        if self.thickness <= 0:
            raise ValueError(f"thickness must be > 0, got {self.thickness}")

    @property
    def outer_radius(self) -> float:
        return self.inner_radius + self.thickness

    @property
    def area(self) -> float:
        d = self.thickness
        return math.pi * (2.0 * self.inner_radius * d + d * d)


@dataclass(frozen=True, slots=True)
class BoxRegion:
    """Axis-aligned square deployment region [0, side] x [0, side]."""

    side: float

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError(f"side must be > 0, got {self.side}")

    def contains(self, p: Point2) -> bool:
        return 0.0 <= p.x <= self.side and 0.0 <= p.y <= self.side


def distance(a: Point2, b: Point2) -> float:
    """Euclidean distance between two points."""
    return math.hypot(a.x - b.x, a.y - b.y)


def in_annulus(p: Point2, ring: Annulus) -> bool:
    """Membership test for an annulus, inclusive on both boundaries."""
    d = distance(p, ring.center)
    return ring.inner_radius <= d <= ring.outer_radius


def point_to_annulus_distance(p: Point2, ring: Annulus) -> float:
    """Distance from a point to the annular set (zero if inside it)."""
    d = distance(p, ring.center)
    if d < ring.inner_radius:
        return ring.inner_radius - d
    if d > ring.outer_radius:
        return d - ring.outer_radius
    return 0.0


def fold_coordinate(v: float, side: float) -> float:
    """Mirror-fold a scalar coordinate into [0, side].

    Folding iterates naturally through the modulo, so displacements larger
    than one box side are handled by repeated reflection.
    """
    period = 2.0 * side
    m = v % period
    return m if m <= side else period - m


def reflect_into_box(p: Point2, box: BoxRegion) -> Point2:
    """Mirror-reflect a point into the box, independently per axis.

    Interior points are fixed points of the map.
    """
    return Point2(fold_coordinate(p.x, box.side), fold_coordinate(p.y, box.side))


def reflect_direction(dx: float, dy: float, hit_axis: str) -> tuple[float, float]:
    """Specular reflection of a direction vector about a box boundary.

    ``hit_axis`` names the boundary that was hit: "x" for a vertical wall
    (flips the x component), "y" for a horizontal wall.
    """
    if dx == 0.0 and dy == 0.0:
        raise ValueError("cannot reflect a zero direction vector")
    if hit_axis == "x":
        return (-dx, dy)
    if hit_axis == "y":
        return (dx, -dy)
    raise ValueError(f"hit_axis must be 'x' or 'y', got {hit_axis!r}")
