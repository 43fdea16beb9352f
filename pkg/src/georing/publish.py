"""Per-destination position-publish state machine and transmission accounting.

A destination keeps one guaranteed fresh update per ring index alive at all
times: a timer renewal re-centers the ring at the current position, and an
early exit from an update's confidence disc triggers a compensating update
to the old ring (inheriting the remaining lifetime) plus, for fresh
updates, a renewal. Dissemination is logically instantaneous; transmission
costs are charged from the ring geometry alone.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .geometry import Annulus, Point2, point_to_annulus_distance
from .mobility import World, fold_array
from .params import ProtocolParams, RingSchedule

NORMAL = "normal"
ABNORMAL = "abnormal"


@dataclass(frozen=True)
class UpdateRecord:
    """One published location update."""

    dest_id: int
    ring_index: int
    center: Point2
    estimate: Point2
    issue_time: float
    expiry_time: float
    kind: str

    def __post_init__(self):
        if self.expiry_time <= self.issue_time:
            raise ValueError(
                f"expiry {self.expiry_time} must exceed issue {self.issue_time}")
        if self.kind == NORMAL and self.center != self.estimate:
            raise ValueError("fresh updates are centered on their estimate")
        if self.kind not in (NORMAL, ABNORMAL):
            raise ValueError(f"unknown update kind {self.kind!r}")

    def annulus(self, schedule: RingSchedule) -> Annulus:
        ring = schedule.rings[self.ring_index]
        return Annulus(center=self.center, inner_radius=ring.r_i, thickness=ring.d_i)


@dataclass
class _RingState:
    normal: UpdateRecord | None = None
    abnormals: list[UpdateRecord] = field(default_factory=list)


@dataclass
class DestPublishState:
    """Live published records for one destination, per ring index.

    ``rings[i].normal`` is the currently guaranteed fresh update for ring
    i; ``rings[i].abnormals`` are compensating updates that still carry a
    confidence guarantee. Records are dropped from tracking as soon as
    they expire or are compensated for.
    """

    dest_id: int
    x: float
    y: float
    tick: int
    dt: float
    rings: list[_RingState]
    initialized: bool = False

    @property
    def t(self) -> float:
        return self.tick * self.dt

    @property
    def position(self) -> Point2:
        return Point2(self.x, self.y)

    @classmethod
    def fresh(cls, dest_id: int, start: Point2, schedule: RingSchedule,
              dt: float) -> "DestPublishState":
        return cls(dest_id=dest_id, x=start.x, y=start.y, tick=0, dt=dt,
                   rings=[_RingState() for _ in schedule.rings])

    def live_records(self) -> list[UpdateRecord]:
        out = []
        for rs in self.rings:
            if rs.normal is not None:
                out.append(rs.normal)
            out.extend(rs.abnormals)
        return out


# ---------------------------------------------------------------------------
# Transmission cost model
# ---------------------------------------------------------------------------


def multicast_cost(area: float, r: float) -> int:
    """Transmissions to multicast over an area, tiled by squares of side r/sqrt(5)."""
    if area < 0:
        raise ValueError(f"area must be >= 0, got {area}")
    if r <= 0:
        raise ValueError(f"r must be > 0, got {r}")
    if area == 0.0:
        return 0
    return math.ceil(5.0 * area / (r * r))


def line_cost(dist: float, r: float) -> int:
    """Transmissions to relay an update packet a given straight-line distance."""
    if dist < 0:
        raise ValueError(f"dist must be >= 0, got {dist}")
    if r <= 0:
        raise ValueError(f"r must be > 0, got {r}")
    return math.ceil(dist / r)


@dataclass
class CostLedger:
    """Cumulative update-transmission accounting for one destination.

    Ring categories cover update dissemination only; the ``local_tx``
    bucket is reserved for neighbor-list broadcasts and is excluded from
    ring sums (that chatter occupies constant bandwidth regardless of
    network size, so it never enters the scaling comparisons).
    """

    total_tx: int = 0
    local_tx: int = 0
    ring_tx: dict = field(default_factory=dict)
    kind_tx: dict = field(default_factory=lambda: {NORMAL: 0, ABNORMAL: 0})
    issues: dict = field(default_factory=dict)
    issues_by_kind: dict = field(default_factory=lambda: {NORMAL: 0, ABNORMAL: 0})
    empty_disseminations: list = field(default_factory=list)

    def charge(self, record: UpdateRecord, schedule: RingSchedule, r: float) -> int:
        """Charge line + multicast cost for one record; returns the cost."""
        ring = record.annulus(schedule)
        cost = line_cost(point_to_annulus_distance(record.estimate, ring), r)
        cost += multicast_cost(ring.area, r)
        i = record.ring_index
        self.total_tx += cost
        self.ring_tx[i] = self.ring_tx.get(i, 0) + cost
        self.kind_tx[record.kind] += cost
        self.issues[i] = self.issues.get(i, 0) + 1
        self.issues_by_kind[record.kind] += 1
        return cost

    def flag_empty(self, record: UpdateRecord) -> None:
        self.empty_disseminations.append((record.issue_time, record.ring_index))

    def to_dict(self) -> dict:
        return {
            "total_tx": self.total_tx,
            "local_tx": self.local_tx,
            "ring_tx": {str(k): v for k, v in sorted(self.ring_tx.items())},
            "kind_tx": dict(self.kind_tx),
            "issues": {str(k): v for k, v in sorted(self.issues.items())},
            "issues_by_kind": dict(self.issues_by_kind),
            "empty_disseminations": len(self.empty_disseminations),
        }

    def dump_csv(self, path: str | Path, elapsed: float) -> None:
        rates = measured_update_rate(self, elapsed)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["ring", "issues", "tx", "rate_per_time"])
            for i in sorted(self.issues):
                writer.writerow([i, self.issues[i], self.ring_tx.get(i, 0),
                                 f"{rates[i]:.12g}"])


def measured_update_rate(ledger: CostLedger, elapsed: float) -> dict[int, float]:
    """Per-ring update issue rates, issue counts divided by elapsed time."""
    if elapsed <= 0:
        raise ValueError(f"elapsed must be > 0, got {elapsed}")
    return {i: count / elapsed for i, count in sorted(ledger.issues.items())}


# ---------------------------------------------------------------------------
# Triggers
# ---------------------------------------------------------------------------


def _process_tick(state: DestPublishState, x: float, y: float, t: float,
                  schedule: RingSchedule, beta: float) -> list[UpdateRecord]:
    """Apply all publish triggers for one tick at position (x, y), time t."""
    emitted: list[UpdateRecord] = []
    here = None  # built lazily; most ticks emit nothing
    for ring, rs in zip(schedule.rings, state.rings):
        conf2 = (beta * ring.r_i) ** 2

        if rs.normal is None or rs.normal.expiry_time <= t:
            # timer renewal (or very first issue): re-center on the current position
            if here is None:
                here = Point2(x, y)
            rs.normal = UpdateRecord(
                dest_id=state.dest_id, ring_index=ring.index, center=here,
                estimate=here, issue_time=t, expiry_time=t + ring.T_i, kind=NORMAL)
            emitted.append(rs.normal)
        else:
            ex, ey = rs.normal.estimate.x, rs.normal.estimate.y
            if (x - ex) ** 2 + (y - ey) ** 2 > conf2:
                # early confidence exit: compensate the old ring, then renew
                if here is None:
                    here = Point2(x, y)
                ab = UpdateRecord(
                    dest_id=state.dest_id, ring_index=ring.index,
                    center=rs.normal.center, estimate=here, issue_time=t,
                    expiry_time=rs.normal.expiry_time, kind=ABNORMAL)
                rs.abnormals.append(ab)
                rs.normal = UpdateRecord(
                    dest_id=state.dest_id, ring_index=ring.index, center=here,
                    estimate=here, issue_time=t, expiry_time=t + ring.T_i,
                    kind=NORMAL)
                emitted.extend([ab, rs.normal])

        if rs.abnormals:
            kept = []
            for ab in rs.abnormals:
                if ab.expiry_time <= t:
                    continue
                ex, ey = ab.estimate.x, ab.estimate.y
                if (x - ex) ** 2 + (y - ey) ** 2 > conf2:
                    if here is None:
                        here = Point2(x, y)
                    rep = UpdateRecord(
                        dest_id=state.dest_id, ring_index=ring.index,
                        center=ab.center, estimate=here, issue_time=t,
                        expiry_time=ab.expiry_time, kind=ABNORMAL)
                    kept.append(rep)
                    emitted.append(rep)
                else:
                    kept.append(ab)
            rs.abnormals = kept
    return emitted


def tick_destination(state: DestPublishState, d_now: Point2, t: float,
                     schedule: RingSchedule, beta: float) -> list[UpdateRecord]:
    """Advance the publish state machine one tick; returns records issued.

    Per ring index, independently: an expired (or absent) guaranteed
    update is renewed at the current position; leaving a fresh update's
    confidence disc early emits a compensating update to the old ring plus
    a renewal; leaving a compensating update's disc emits a replacement
    compensation only. Positions between ticks are not observed, so exits
    are detected at tick granularity.
    """
    if t < state.t - 1e-12:
        raise ValueError(f"tick time {t} precedes state time {state.t}")
    emitted = _process_tick(state, d_now.x, d_now.y, t, schedule, beta)
    state.x, state.y = d_now.x, d_now.y
    state.initialized = True
    return emitted


# ---------------------------------------------------------------------------
# Dissemination
# ---------------------------------------------------------------------------


def disseminate(record: UpdateRecord, world: World, schedule: RingSchedule,
                ledger: CostLedger | None) -> np.ndarray:
    """Deliver a record to every node currently inside its annulus.

    Returns the recipient node ids (sorted). The geometric transmission
    cost is charged whether or not anyone is inside; an empty annulus is
    flagged. Pass ``ledger=None`` if the record's cost was already charged
    at issue time.
    """
    ring = record.annulus(schedule)
    dx = world.positions[:, 0] - ring.center.x
    dy = world.positions[:, 1] - ring.center.y
    dist = np.sqrt(dx * dx + dy * dy)
    mask = (dist >= ring.inner_radius) & (dist <= ring.outer_radius)
    ids = np.nonzero(mask)[0]
    if ledger is not None:
        ledger.charge(record, schedule, world.cell_size)
        if len(ids) == 0:
            ledger.flag_empty(record)
    return ids


# ---------------------------------------------------------------------------
# Chunked publish driver
# ---------------------------------------------------------------------------


def simulate_publish(params: ProtocolParams, schedule: RingSchedule,
                     state: DestPublishState, t_to: float,
                     rng: np.random.Generator | None = None,
                     ledger: CostLedger | None = None,
                     on_record: Callable[[UpdateRecord], None] | None = None,
                     sample_times: Sequence[float] = (),
                     trajectory: np.ndarray | None = None,
                     chunk: int = 256) -> list[tuple[float, Point2]]:
    """Run the publish state machine from state.t up to t_to.

    The destination trajectory is generated internally (reflected
    diffusion at the state's tick duration) unless an explicit per-tick
    ``trajectory`` array is supplied. Trigger decisions are identical to
    driving :func:`tick_destination` tick by tick; between triggers the
    driver fast-forwards in vectorized chunks. Records are charged to
    ``ledger`` and passed to ``on_record`` in issue order. Returns the
    destination positions at ``sample_times`` (snapped up to the tick
    grid).
    """
    dt = state.dt
    beta = params.beta
    side = params.side
    scale = params.sigma * math.sqrt(dt)
    m_total = max(0, round((t_to - state.t) / dt))
    if trajectory is None and rng is None and m_total > 0:
        raise ValueError("need an rng when no explicit trajectory is given")

    sample_ticks = []
    for ts in sample_times:
        k = max(0, math.ceil((ts - 1e-9) / dt))
        sample_ticks.append(k)
    sample_order = np.argsort(np.array(sample_ticks, dtype=np.int64),
                              kind="stable") if sample_ticks else np.empty(0, int)
    samples: list[tuple[float, Point2] | None] = [None] * len(sample_ticks)

    def emit(records: list[UpdateRecord]) -> None:
        for rec in records:
            if ledger is not None:
                ledger.charge(rec, schedule, params.r)
            if on_record is not None:
                on_record(rec)

    if not state.initialized:
        emit(_process_tick(state, state.x, state.y, state.t, schedule, beta))
        state.initialized = True
    for si in sample_order:
        if sample_ticks[si] <= state.tick and samples[si] is None:
            samples[si] = (state.t, state.position)

    done = 0
    while done < m_total:
        m = min(chunk, m_total - done)
        if trajectory is not None:
            xs = trajectory[done:done + m, 0]
            ys = trajectory[done:done + m, 1]
        else:
            steps = rng.normal(0.0, scale, size=(m, 2))
            xs = fold_array(state.x + np.cumsum(steps[:, 0]), side)
            ys = fold_array(state.y + np.cumsum(steps[:, 1]), side)
        base_tick = state.tick
        t_js = (base_tick + 1 + np.arange(m)) * dt

        j = 0
        while j < m:
            # earliest trigger over all live records in the remaining window
            j_event = m
            for ring, rs in zip(schedule.rings, state.rings):
                conf2 = (beta * ring.r_i) ** 2
                for rec in ([rs.normal] if rs.normal else []) + rs.abnormals:
                    k = int(np.searchsorted(t_js[j:], rec.expiry_time, side="left"))
                    if j + k < j_event:
                        j_event = j + k
                    if j_event == j:
                        break
                    win = slice(j, j_event)
                    d2 = (xs[win] - rec.estimate.x) ** 2 + (ys[win] - rec.estimate.y) ** 2
                    hits = np.nonzero(d2 > conf2)[0]
                    if len(hits) and j + int(hits[0]) < j_event:
                        j_event = j + int(hits[0])
                if j_event == j:
                    break
            if j_event >= m:
                break
            emit(_process_tick(state, float(xs[j_event]), float(ys[j_event]),
                               float(t_js[j_event]), schedule, beta))
            j = j_event + 1

        state.x = float(xs[m - 1])
        state.y = float(ys[m - 1])
        state.tick = base_tick + m
        done += m

        for si in sample_order:
            k = sample_ticks[si]
            if samples[si] is None and base_tick < k <= state.tick:
                off = k - base_tick - 1
                samples[si] = (float(t_js[off]), Point2(float(xs[off]), float(ys[off])))

    for si in sample_order:
        if samples[si] is None:
            samples[si] = (state.t, state.position)
    return [s for s in samples if s is not None]
