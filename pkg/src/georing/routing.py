"""Greedy geographic routing over ring-structured location updates.

Relays store the most recent update per (destination, ring index) and may
apply one to a packet only while they are physically inside that update's
annulus (spatial validity). Packets prefer lower ring indices, then
recency. A packet without an estimate travels in a straight line
(reflecting off the deployment boundary) until it bootstraps. Greedy
dead ends fall back to left-hand face traversal on the local Gabriel
planarization until progress resumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Point2, distance
from .mobility import World
from .params import ProtocolParams, RingSchedule
from .publish import UpdateRecord

DIRECTIONAL = "directional"
GREEDY = "greedy"
FACE = "face"

FAIL_TTL = "ttl"
FAIL_ISOLATED = "isolated"
FAIL_FACE_LOOP = "face_loop"


class NodeStore:
    """One node's update table, keyed by (destination id, ring index)."""

    __slots__ = ("records",)

    def __init__(self):
        self.records: dict[tuple[int, int], UpdateRecord] = {}


def store_update(store: NodeStore, record: UpdateRecord) -> NodeStore:
    """Keep the most recent record per (destination, ring index).

    Records for other ring indices are retained: a node sitting inside two
    overlapping rings of different indices must keep the lower-indexed
    estimate available, so recency overwrites apply within an index only.
    """
    key = (record.dest_id, record.ring_index)
    old = store.records.get(key)
    if old is None or record.issue_time >= old.issue_time:
        store.records[key] = record
    return store


def best_active_update(store: NodeStore | None, node_pos: Point2, t: float,
                       dest_id: int, schedule: RingSchedule) -> UpdateRecord | None:
    """Lowest-ring-index record that is unexpired and spatially valid here.

    A record is usable only while the holder is inside the record's
    annulus; expired records are ignored (ties within an index cannot
    arise since only the most recent record per index is stored).
    """
    if store is None:
        return None
    best = None
    best_index = None
    for (d, i), rec in store.records.items():
        if d != dest_id or (best_index is not None and i >= best_index):
            continue
        if t >= rec.expiry_time:
            continue
        ring = schedule.rings[i]
        dist_c = math.hypot(node_pos.x - rec.center.x, node_pos.y - rec.center.y)
        if ring.r_i <= dist_c <= ring.r_i + ring.d_i:
            best, best_index = rec, i
    return best


def node_update_status(store: NodeStore | None, node_pos: Point2, t: float,
                       dest_id: int, schedule: RingSchedule) -> str:
    """Classify a node: "active" (usable update), "invalid" (holds an
    unexpired update but none spatially valid), or "none"."""
    if store is None:
        return "none"
    if best_active_update(store, node_pos, t, dest_id, schedule) is not None:
        return "active"
    for (d, _i), rec in store.records.items():
        if d == dest_id and t < rec.expiry_time:
            return "invalid"
    return "none"


class StoreTable:
    """Lazily materialized per-node stores for a whole world."""

    __slots__ = ("_stores",)

    def __init__(self):
        self._stores: dict[int, NodeStore] = {}

    def for_node(self, node_id: int) -> NodeStore:
        store = self._stores.get(node_id)
        if store is None:
            store = NodeStore()
            self._stores[node_id] = store
        return store

    def get(self, node_id: int) -> NodeStore | None:
        return self._stores.get(node_id)

    def node_ids(self) -> list[int]:
        return sorted(self._stores)

    def deliver(self, record: UpdateRecord, node_ids) -> None:
        for nid in node_ids:
            store_update(self.for_node(int(nid)), record)


# ---------------------------------------------------------------------------
# Packet
# ---------------------------------------------------------------------------


@dataclass
class Packet:
    """In-flight routing state.

    Before bootstrap the packet carries a travel direction with the
    sentinel ring index +inf and update time -inf; afterwards it carries a
    position estimate with the index and issue time of the update applied.
    """

    dest_id: int
    ttl: int
    estimate: Point2 | None = None
    direction: tuple[float, float] | None = None
    ring_index: float = math.inf
    update_time: float = -math.inf
    mode: str = DIRECTIONAL
    hop_count: int = 0
    prev_node: int | None = None
    face_entry: Point2 | None = None
    face_first_edge: tuple[int, int] | None = None
    failure: str | None = None

    @property
    def bootstrapped(self) -> bool:
        return self.estimate is not None


def maybe_overwrite_packet(packet: Packet, record: UpdateRecord | None) -> bool:
    """Replace the packet's estimate if the record is strictly better.

    Better means a smaller ring index, or the same index with a more
    recent issue time. A directional (pre-bootstrap) packet accepts any
    active record. Returns True when the packet was updated.
    """
    if record is None:
        return False
    if not packet.bootstrapped:
        packet.estimate = record.estimate
        packet.ring_index = record.ring_index
        packet.update_time = record.issue_time
        packet.direction = None
        packet.mode = GREEDY if packet.mode == DIRECTIONAL else packet.mode
        return True
    if record.ring_index < packet.ring_index or (
            record.ring_index == packet.ring_index
            and record.issue_time > packet.update_time):
        packet.estimate = record.estimate
        packet.ring_index = record.ring_index
        packet.update_time = record.issue_time
        return True
    return False


# ---------------------------------------------------------------------------
# Forwarding
# ---------------------------------------------------------------------------


def gabriel_neighbor_ids(world: World, u_id: int, cand_ids: np.ndarray) -> np.ndarray:
    """Candidates v whose edge (u, v) survives Gabriel planarization.

    Edge (u, v) is kept iff no third node lies strictly inside the disc
    with diameter u-v; all possible witnesses sit within the communication
    radius of u, so the local candidate set is a complete witness set.
    """
    pu = world.positions[u_id]
    pts = world.positions[cand_ids]
    keep = np.zeros(len(cand_ids), dtype=bool)
    for k in range(len(cand_ids)):
        mid = 0.5 * (pu + pts[k])
        rad2 = 0.25 * ((pts[k, 0] - pu[0]) ** 2 + (pts[k, 1] - pu[1]) ** 2)
        d2 = (pts[:, 0] - mid[0]) ** 2 + (pts[:, 1] - mid[1]) ** 2
        d2[k] = np.inf
        keep[k] = not np.any(d2 < rad2)
    return cand_ids[keep]


def _face_next(world: World, packet: Packet, relay_id: int, relay_pos: Point2,
               target: Point2, cand_ids: np.ndarray) -> int | None:
    """Left-hand-rule step on the Gabriel planarization."""
    planar = gabriel_neighbor_ids(world, relay_id, cand_ids)
    if len(planar) == 0:
        packet.failure = FAIL_ISOLATED
        return None
    if packet.face_first_edge is None:
        ref = math.atan2(target.y - relay_pos.y, target.x - relay_pos.x)
    else:
        prev = world.positions[packet.prev_node]
        ref = math.atan2(prev[1] - relay_pos.y, prev[0] - relay_pos.x)

    pts = world.positions[planar]
    angles = np.arctan2(pts[:, 1] - relay_pos.y, pts[:, 0] - relay_pos.x)
    # first edge clockwise from the reference direction; a zero offset means
    # heading straight back, which is allowed only as a dead-end bounce
    offsets = np.mod(ref - angles, 2.0 * math.pi)
    offsets[offsets < 1e-12] = 2.0 * math.pi
    next_id = int(planar[int(np.argmin(offsets))])

    edge = (relay_id, next_id)
    if packet.face_first_edge is None:
        packet.face_first_edge = edge
    elif edge == packet.face_first_edge:
        packet.failure = FAIL_FACE_LOOP
        return None
    return next_id


def forward_step(packet: Packet, relay_id: int, world: World,
                 params: ProtocolParams) -> int | None:
    """Select the next relay and update the packet's mode and ttl.

    Within the exact-location radius of the destination the true position
    is the target; otherwise the packet's estimate is, or a far virtual
    point along the stored direction pre-bootstrap (reflected at the
    boundary). Greedy forwarding requires strict progress toward the
    target; a dead end switches to face traversal until the packet gets
    strictly closer to the target than where greedy failed. Returns None
    and sets ``packet.failure`` on ttl exhaustion, isolation, or a
    completed face loop.
    """
    if packet.ttl <= 0:
        packet.failure = FAIL_TTL
        return None
    packet.ttl -= 1

    pos = world.position_of(relay_id)
    dest_pos = world.position_of(packet.dest_id)
    r = params.r
    exact = distance(pos, dest_pos) <= params.exact_location_radius

    if exact:
        target = dest_pos
    elif packet.bootstrapped:
        target = packet.estimate
    else:
        dx, dy = packet.direction
        side = world.box.side
        if not 0.0 <= pos.x + dx * r <= side:
            dx = -dx
        if not 0.0 <= pos.y + dy * r <= side:
            dy = -dy
        packet.direction = (dx, dy)
        far = 10.0 * math.sqrt(2.0) * side
        target = Point2(pos.x + dx * far, pos.y + dy * far)

    cand_ids, _ = world.grid.query(pos.x, pos.y, r)
    cand_ids = cand_ids[cand_ids != relay_id]
    if len(cand_ids) == 0:
        packet.failure = FAIL_ISOLATED
        return None

    if packet.mode == FACE:
        if distance(pos, target) < distance(packet.face_entry, target):
            packet.mode = GREEDY if packet.bootstrapped or exact else DIRECTIONAL
            packet.face_entry = None
            packet.face_first_edge = None
        else:
            next_id = _face_next(world, packet, relay_id, pos, target, cand_ids)
            if next_id is not None:
                packet.prev_node = relay_id
                packet.hop_count += 1
            return next_id

    pts = world.positions[cand_ids]
    d_target = np.hypot(pts[:, 0] - target.x, pts[:, 1] - target.y)
    here = math.hypot(pos.x - target.x, pos.y - target.y)
    progress = d_target < here
    if np.any(progress):
        masked = np.where(progress, d_target, np.inf)
        next_id = int(cand_ids[int(np.argmin(masked))])
        packet.mode = GREEDY if (packet.bootstrapped or exact) else DIRECTIONAL
        packet.prev_node = relay_id
        packet.hop_count += 1
        return next_id

    # greedy dead end: walk the face until strictly closer than this point
    packet.mode = FACE
    packet.face_entry = pos
    packet.face_first_edge = None
    next_id = _face_next(world, packet, relay_id, pos, target, cand_ids)
    if next_id is not None:
        packet.prev_node = relay_id
        packet.hop_count += 1
    return next_id


# ---------------------------------------------------------------------------
# Full route
# ---------------------------------------------------------------------------


@dataclass
class HopRecord:
    node_id: int
    x: float
    y: float
    mode: str
    ring_index: float
    uncertainty: float | None


@dataclass
class RouteResult:
    delivered: bool
    hops: int
    path_length: float
    straight_line: float
    hop_log: list[HopRecord] = field(default_factory=list)
    bootstrap_hop: int | None = None
    rings_acquired: list[int] = field(default_factory=list)
    misses_detected: list[int] = field(default_factory=list)
    failure: str | None = None

    @property
    def stretch(self) -> float | None:
        if not self.delivered or self.straight_line == 0.0:
            return None
        return self.path_length / self.straight_line


def default_ttl(params: ProtocolParams) -> int:
    """Hop budget: twenty diameter-lengths of communication hops."""
    return math.ceil(20.0 * math.sqrt(2.0 * params.n) / params.r)


def route(world: World, stores: StoreTable, src_id: int, dest_id: int,
          params: ProtocolParams, rng: np.random.Generator,
          ttl: int | None = None) -> RouteResult:
    """Route one packet from src to dest against a frozen world snapshot.

    The packet starts from the source's best active update, or in a
    uniformly random direction when the source has none. Each relay may
    overwrite the packet's estimate with a better active record before
    forwarding. Per-hop uncertainty (estimate-to-destination distance over
    relay-to-destination distance, zero within the exact-location radius)
    is logged after bootstrap.
    """
    if src_id == dest_id:
        raise ValueError("source and destination must differ")
    schedule = params.schedule()
    t = world.clock
    dest_pos = world.position_of(dest_id)
    src_pos = world.position_of(src_id)
    straight = distance(src_pos, dest_pos)
    r_exact = params.exact_location_radius

    packet = Packet(dest_id=dest_id, ttl=ttl if ttl is not None else default_ttl(params))
    first = best_active_update(stores.get(src_id), src_pos, t, dest_id, schedule)
    bootstrap_hop: int | None = None
    rings_acquired: list[int] = []
    if first is not None:
        maybe_overwrite_packet(packet, first)
        bootstrap_hop = 0
        rings_acquired.append(first.ring_index)
    else:
        theta = rng.uniform(0.0, 2.0 * math.pi)
        packet.direction = (math.cos(theta), math.sin(theta))

    # rings whose inner envelope the source started outside of; only those
    # can be meaningfully crossed (miss detection is diagnostic)
    beta = params.beta
    eligible = [ring.index for ring in schedule.rings
                if straight >= (1.0 - beta) * ring.r_i]
    missed: set[int] = set()

    log: list[HopRecord] = []
    path_length = 0.0
    relay = src_id
    delivered = False

    while True:
        if relay == dest_id:
            delivered = True
            break
        pos = world.position_of(relay)
        rec = best_active_update(stores.get(relay), pos, t, dest_id, schedule)
        if maybe_overwrite_packet(packet, rec):
            if bootstrap_hop is None:
                bootstrap_hop = packet.hop_count
            if not rings_acquired or rings_acquired[-1] != rec.ring_index:
                rings_acquired.append(rec.ring_index)

        d_dest = distance(pos, dest_pos)
        if packet.bootstrapped:
            if d_dest <= r_exact:
                unc: float | None = 0.0
            else:
                unc = distance(dest_pos, packet.estimate) / d_dest
        else:
            unc = None

        next_id = forward_step(packet, relay, world, params)
        log.append(HopRecord(node_id=relay, x=pos.x, y=pos.y, mode=packet.mode,
                             ring_index=packet.ring_index, uncertainty=unc))
        if next_id is None:
            break

        next_pos = world.position_of(next_id)
        path_length += distance(pos, next_pos)
        relay = next_id

        d_now = distance(next_pos, dest_pos)
        for i in eligible:
            if i not in missed and packet.ring_index > i and \
                    d_now < (1.0 - beta) * schedule.rings[i].r_i:
                missed.add(i)

    return RouteResult(
        delivered=delivered, hops=packet.hop_count, path_length=path_length,
        straight_line=straight, hop_log=log, bootstrap_hop=bootstrap_hop,
        rings_acquired=rings_acquired, misses_detected=sorted(missed),
        failure=packet.failure)
