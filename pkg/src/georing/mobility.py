"""World of mobile nodes: diffusive stepping with boundary reflection and a
spatial grid for neighbor queries.

Positions live in a (n, 2) float array at one node per unit area. A step of
any duration is exact for the reflected diffusion (Gaussian increment
followed by mirror folding), so drivers are free to advance the world in
large jumps between the instants where positions actually matter.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import BoxRegion, Point2
from .params import ProtocolParams


@dataclass(frozen=True)
class MobilityConfig:
    """Diffusion scale and default step duration."""

    sigma: float
    dt: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")


def fold_array(x: np.ndarray, side: float) -> np.ndarray:
    """Mirror-fold coordinates into [0, side] (vectorized, any overshoot)."""
    period = 2.0 * side
    m = np.mod(x, period)
    return np.where(m <= side, m, period - m)


class SpatialGrid:
    """Uniform-cell index over a fixed positions array.

    Cells are cell_size wide; a query of radius <= cell_size touches at
    most a 3x3 block. Built with a counting sort so construction is a
    single argsort.
    """

    def __init__(self, positions: np.ndarray, cell_size: float, side: float):
        self.positions = positions
        self.cell = cell_size
        self.side = side
        self.ncells = max(1, int(math.ceil(side / cell_size)))
        cx = np.clip((positions[:, 0] / cell_size).astype(np.int64), 0, self.ncells - 1)
        cy = np.clip((positions[:, 1] / cell_size).astype(np.int64), 0, self.ncells - 1)
        keys = cx * self.ncells + cy
        self.order = np.argsort(keys, kind="stable")
        self.sorted_keys = keys[self.order]

    def candidate_ids(self, x: float, y: float, radius: float) -> np.ndarray:
        """Node ids in all grid cells overlapping the query disc."""
        nc = self.ncells
        cx0 = min(max(int((x - radius) / self.cell), 0), nc - 1)
        cx1 = min(max(int((x + radius) / self.cell), 0), nc - 1)
        cy0 = min(max(int((y - radius) / self.cell), 0), nc - 1)
        cy1 = min(max(int((y + radius) / self.cell), 0), nc - 1)
        chunks = []
        for cx in range(cx0, cx1 + 1):
            lo = np.searchsorted(self.sorted_keys, cx * nc + cy0, side="left")
            hi = np.searchsorted(self.sorted_keys, cx * nc + cy1, side="right")
            if hi > lo:
                chunks.append(self.order[lo:hi])
        if not chunks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(chunks)

    def query(self, x: float, y: float, radius: float) -> tuple[np.ndarray, np.ndarray]:
        """Ids and squared distances of nodes within radius (inclusive)."""
        cand = self.candidate_ids(x, y, radius)
        if len(cand) == 0:
            return cand, np.empty(0)
        pos = self.positions[cand]
        d2 = (pos[:, 0] - x) ** 2 + (pos[:, 1] - y) ** 2
        keep = d2 <= radius * radius
        return cand[keep], d2[keep]


class World:
    """n mobile nodes in a square box, with clock, rng and spatial index."""

    def __init__(self, positions: np.ndarray, box: BoxRegion, cell_size: float,
                 rng: np.random.Generator, clock: float = 0.0):
        self.positions = positions
        self.box = box
        self.cell_size = cell_size
        self.rng = rng
        self.clock = clock
        self._grid: SpatialGrid | None = None

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def grid(self) -> SpatialGrid:
        if self._grid is None:
            self._grid = SpatialGrid(self.positions, self.cell_size, self.box.side)
        return self._grid

    def invalidate_grid(self) -> None:
        self._grid = None

    def set_position(self, node_id: int, p: Point2) -> None:
        """Overwrite one node's position (e.g. a separately-stepped node)."""
        self.positions[node_id, 0] = p.x
        self.positions[node_id, 1] = p.y
        self.invalidate_grid()

    def position_of(self, node_id: int) -> Point2:
        return Point2(float(self.positions[node_id, 0]), float(self.positions[node_id, 1]))


def init_world(params: ProtocolParams, seed: int) -> World:
    """Uniform i.i.d. node placement over the density-one square."""
    rng = np.random.default_rng(seed)
    side = params.side
    positions = rng.uniform(0.0, side, size=(params.n, 2))
    return World(positions=positions, box=BoxRegion(side), cell_size=params.r, rng=rng)


def brownian_step(p: Point2, cfg: MobilityConfig, box: BoxRegion,
                  rng: np.random.Generator) -> Point2:
    """One diffusive step: independent Normal(0, sigma^2 dt) per coordinate,
    mirror-reflected into the box."""
    scale = cfg.sigma * math.sqrt(cfg.dt)
    dx, dy = rng.normal(0.0, 1.0, size=2) * scale
    return Point2(
        float(fold_array(np.array(p.x + dx), box.side)),
        float(fold_array(np.array(p.y + dy), box.side)),
    )


def advance_world(world: World, dt: float, cfg: MobilityConfig) -> World:
    """Step every node once by duration dt and advance the clock.

    The Gaussian-increment-plus-fold transition is exact for the reflected
    diffusion at any dt, so callers may jump directly between event times.
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if dt > 0 and cfg.sigma > 0:
        scale = cfg.sigma * math.sqrt(dt)
        world.positions += world.rng.normal(0.0, scale, size=world.positions.shape)
        world.positions[:] = fold_array(world.positions, world.box.side)
        world.invalidate_grid()
    world.clock += dt
    return world


def neighbors_within(world: World, p: Point2, radius: float) -> list[int]:
    """Ids of all nodes within radius of p, sorted by distance then id."""
    ids, d2 = world.grid.query(p.x, p.y, radius)
    if len(ids) == 0:
        return []
    order = np.lexsort((ids, d2))
    return [int(i) for i in ids[order]]


def dump_positions(world: World, path: str | Path) -> None:
    """Write a node-position snapshot as CSV (id, x, y)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(world.positions):
            writer.writerow([i, f"{x:.12g}", f"{y:.12g}"])
