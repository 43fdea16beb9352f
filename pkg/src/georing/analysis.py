"""Closed-form and numerical evaluation of the protocol's performance bounds.

Covers the worst-case uncertainty ratio, the route-stretch bound and its
numerical-maximization oracle, ring-miss probability bounds (asymptotic,
product and integral forms), the diffused update-density profile, overhead
rates, the greedy-forwarding angle geometry, and the supporting modified
Bessel function. Everything here is a pure function; Monte Carlo helpers
take an explicit numpy Generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable

import numpy as np

from .geometry import Annulus, Point2

if TYPE_CHECKING:  # pragma: no cover
    from .params import ProtocolParams, RingSchedule


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature fails to converge."""


# ---------------------------------------------------------------------------
# Modified Bessel function I0
# ---------------------------------------------------------------------------

_I0_SERIES_CUTOFF = 15.0
_I0_SERIES_TERMS = 60
_I0_ASYMPTOTIC_TERMS = 20


def _i0e_array(x: np.ndarray) -> np.ndarray:
    """Exponentially scaled I0, exp(-x) * I0(x), vectorized for x >= 0.

    Power series below x = 15 (all terms positive, no cancellation),
    truncated asymptotic expansion above. Both branches are accurate to
    well under 1e-9 relative error; the branches agree to ~1e-13 at the
    cutoff.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)

    small = x < _I0_SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        z = 0.25 * xs * xs
        term = np.ones_like(xs)
        acc = np.ones_like(xs)
        for k in range(1, _I0_SERIES_TERMS + 1):
            term = term * z / (k * k)
            acc += term
        out[small] = np.exp(-xs) * acc

    large = ~small
    if np.any(large):
        xl = x[large]
        term = np.ones_like(xl)
        acc = np.ones_like(xl)
        for k in range(1, _I0_ASYMPTOTIC_TERMS + 1):
            term = term * (2 * k - 1) ** 2 / (8.0 * k * xl)
            acc += term
        out[large] = acc / np.sqrt(2.0 * math.pi * xl)

    return out


def bessel_i0e(x: float) -> float:
    """Exponentially scaled modified Bessel function exp(-x) * I0(x)."""
    if x < 0:
        raise ValueError(f"argument must be >= 0, got {x}")
    return float(_i0e_array(np.array([x]))[0])


def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero.

    Overflows to inf for x beyond ~709 (use :func:`bessel_i0e` there).
    """
    if x < 0:
        raise ValueError(f"argument must be >= 0, got {x}")
    if x > 709.0:
        return math.inf
    return math.exp(x) * bessel_i0e(x)


# ---------------------------------------------------------------------------
# Uncertainty and route stretch
# ---------------------------------------------------------------------------


def u_max(alpha: float, beta: float) -> float:
    """Worst-case post-bootstrap uncertainty ratio, alpha*beta/(1-beta)."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    return alpha * beta / (1.0 - beta)


def _check_stretch_domain(alpha: float, beta: float) -> None:
    if u_max(alpha, beta) >= 1.0:
        raise ValueError(
            f"unbounded stretch regime: alpha*beta/(1-beta) = "
            f"{u_max(alpha, beta):.6g} >= 1"
        )


def stretch_bound(alpha: float, beta: float) -> float:
    """Closed-form worst-case route stretch.

    sqrt(1 + (sqrt(a^2 (1+b)^2 / (1-b)^2 - 1) + a (1+b) / sqrt((1-b)^2 - a^2 b^2))^2)
    for ring growth factor a and confidence fraction b. Requires
    a*b/(1-b) < 1, otherwise the stretch is unbounded.
    """
    _check_stretch_domain(alpha, beta)
    c = 1.0 - beta
    outer = alpha * (1.0 + beta)
    b_term = math.sqrt(outer * outer / (c * c) - 1.0) + outer / math.sqrt(
        c * c - alpha * alpha * beta * beta
    )
    return math.sqrt(1.0 + b_term * b_term)


def _stretch_profile(x: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Stretch of the worst-case trajectory from normalized source distance x."""
    c = 1.0 - beta
    outer = alpha * (1.0 + beta)
    post = alpha * (1.0 - beta * beta) / math.sqrt(c * c - alpha * alpha * beta * beta)
    launch = np.sqrt(np.maximum(x * x - c * c, 0.0))
    tail = math.sqrt(outer * outer - c * c)
    return (launch + post + tail) / x


def bootstrap_distance(x: float, alpha: float, beta: float) -> float:
    """Worst-case distance traveled before acquiring a first estimate.

    x is the source-destination distance normalized by the inner ring
    radius; it must lie between the inner envelope 1-beta and the outer
    envelope alpha*(1+beta).
    """
    c = 1.0 - beta
    outer = alpha * (1.0 + beta)
    if not (c - 1e-12 <= x <= outer + 1e-12):
        raise ValueError(f"x = {x} outside the envelope range [{c}, {outer}]")
    return math.sqrt(max(x * x - c * c, 0.0)) + math.sqrt(outer * outer - c * c)


def stretch_oracle(alpha: float, beta: float, grid_points: int = 10000) -> float:
    """Numerical maximum of the worst-case stretch profile.

    Dense grid over the valid source-distance interval followed by
    golden-section refinement around the best grid point. Independent of
    the closed form in :func:`stretch_bound`.
    """
    _check_stretch_domain(alpha, beta)
    c = 1.0 - beta
    outer = alpha * (1.0 + beta)
    xs = np.linspace(c, outer, grid_points)
    vals = _stretch_profile(xs, alpha, beta)
    i = int(np.argmax(vals))
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, grid_points - 1)]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1 = float(_stretch_profile(np.array([x1]), alpha, beta)[0])
    f2 = float(_stretch_profile(np.array([x2]), alpha, beta)[0])
    while b - a > 1e-13 * max(1.0, b):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = float(_stretch_profile(np.array([x2]), alpha, beta)[0])
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = float(_stretch_profile(np.array([x1]), alpha, beta)[0])
    return max(f1, f2, float(vals[i]))


def stretch_bound_is_tight(alpha: float, beta: float) -> bool:
    """Whether the closed-form bound is attained inside the envelope range.

    The closed form is the unconstrained maximum of the stretch profile
    over source distances x >= 1-beta; it coincides with the constrained
    maximum iff the stationary point falls at or below the outer envelope
    alpha*(1+beta). Otherwise the closed form is a strict upper bound on
    the oracle maximum (only reachable for alpha near 1 with small beta).
    """
    _check_stretch_domain(alpha, beta)
    c = 1.0 - beta
    outer = alpha * (1.0 + beta)
    post = alpha * (1.0 - beta * beta) / math.sqrt(c * c - alpha * alpha * beta * beta)
    tail = math.sqrt(outer * outer - c * c)
    a_const = post + tail
    x_star = c * math.sqrt(1.0 + (c / a_const) ** 2)
    return x_star <= outer + 1e-12


# ---------------------------------------------------------------------------
# Ring-miss probability bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MissBoundInputs:
    """Inputs to the ring-miss probability bounds for one ring."""

    d_i: float
    T_i: float
    r_i: float
    sigma: float
    r: float

    def __post_init__(self):
        if self.d_i < 0 or min(self.T_i, self.r_i, self.sigma, self.r) <= 0:
            raise ValueError(f"invalid miss-bound inputs: {self}")


def pmiss_asymptotic(inputs: MissBoundInputs) -> float:
    """Asymptotic upper bound on the worst-case ring-miss probability.

    exp(-d^2 / (sigma * r * sqrt(2 pi T))) for ring thickness d, relay
    radius r and update lifetime T, clamped to at most 1. Accurate for
    outer rings; for inner rings it can differ from the exact product
    bound by a constant log-scale factor.
    """
    expo = inputs.d_i**2 / (inputs.sigma * inputs.r * math.sqrt(2.0 * math.pi * inputs.T_i))
    return min(1.0, math.exp(-expo))


def _adaptive_simpson(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                      rtol: float = 1e-6, max_doublings: int = 16) -> float:
    """Composite Simpson rule with panel doubling until relative convergence."""
    if hi <= lo:
        return 0.0
    n = 16
    prev = None
    for _ in range(max_doublings):
        xs = np.linspace(lo, hi, n + 1)
        ys = f(xs)
        h = (hi - lo) / n
        est = h / 3.0 * (ys[0] + ys[-1] + 4.0 * ys[1:-1:2].sum() + 2.0 * ys[2:-1:2].sum())
        if prev is not None and abs(est - prev) <= rtol * max(abs(est), 1e-12):
            return float(est)
        prev = est
        n *= 2
    raise QuadratureError(
        f"Simpson rule failed to converge on [{lo}, {hi}] after {max_doublings} "
        f"doublings (last estimate {prev})"
    )


def update_density(a: float, t: float, ring: Annulus, sigma: float) -> float:
    """Density of update-holding nodes at distance a from the ring center.

    Starts as the indicator of the annulus at t = 0 and diffuses under the
    radial heat kernel: for t > 0 the value is the quadrature of

        (rho / (sigma^2 t)) * exp(-(a - rho)^2 / (2 sigma^2 t)) * i0e(a rho / (sigma^2 t))

    over rho in the annulus, using the exponentially scaled Bessel form to
    avoid overflow. The result lies in [0, 1].
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if a < 0:
        raise ValueError(f"radius a must be >= 0, got {a}")
    if t == 0.0:
        return 1.0 if ring.inner_radius <= a <= ring.outer_radius else 0.0

    s2 = sigma * sigma * t
    s = math.sqrt(s2)
    lo = max(ring.inner_radius, a - 12.0 * s)
    hi = min(ring.outer_radius, a + 12.0 * s)
    if lo >= hi:
        return 0.0

    def integrand(rho: np.ndarray) -> np.ndarray:
        gap = a - rho
        return rho / s2 * np.exp(-gap * gap / (2.0 * s2)) * _i0e_array(a * rho / s2)

    val = _adaptive_simpson(integrand, lo, hi)
    return min(1.0, max(0.0, val))


@dataclass(frozen=True)
class DensityProfile:
    """Sampled radial update-density profile for one ring at elapsed time t."""

    radii: np.ndarray
    values: np.ndarray
    ring: Annulus
    t: float

    @classmethod
    def compute(cls, ring: Annulus, t: float, sigma: float,
                n_radii: int = 200, pad_sigmas: float = 8.0) -> "DensityProfile":
        pad = pad_sigmas * sigma * math.sqrt(max(t, 0.0))
        lo = max(0.0, ring.inner_radius - pad)
        hi = ring.outer_radius + pad
        radii = np.linspace(lo, hi, n_radii)
        values = np.array([update_density(a, t, ring, sigma) for a in radii])
        return cls(radii=radii, values=values, ring=ring, t=t)

    def mass(self) -> float:
        """Total mass of the profile, integral of value * 2 pi a da."""
        return float(np.trapz(self.values * 2.0 * math.pi * self.radii, self.radii))


def miss_product(densities: Iterable[float]) -> float:
    """Probability that none of a sequence of independent relay encounters hits,
    prod (1 - density)."""
    prod = 1.0
    for lam in densities:
        prod *= 1.0 - lam
    return max(0.0, prod)


@dataclass(frozen=True)
class MissBound:
    """Product and integral forms of the ring-miss probability bound."""

    product: float
    integral: float


def pmiss_product_bound(i: int, params: "ProtocolParams", schedule: "RingSchedule",
                        t: float | None = None) -> MissBound:
    """Ring-miss bound from the diffused update density for ring index i.

    The product form multiplies miss factors (1 - density) at the minimum
    relay spacing r across the ring. The integral form exponentiates
    -(1/r) * integral of the density across the ring thickness; the
    asymptotic bound is the outer-ring limit of these expressions.
    """
    entry = schedule.rings[i]
    r = params.r
    elapsed = entry.T_i if t is None else t
    ring = Annulus(center=Point2(0.0, 0.0), inner_radius=entry.r_i,
                   thickness=entry.d_i)

    m = int(entry.d_i / r)
    lams = [update_density(entry.r_i + k * r, elapsed, ring, params.sigma)
            for k in range(1, m + 1)]
    product = miss_product(lams)

    if elapsed == 0.0:
        integral = entry.d_i  # indicator density integrates to the thickness
    else:
        integral = _adaptive_simpson(
            lambda a: np.array([update_density(float(av), elapsed, ring, params.sigma)
                                for av in np.atleast_1d(a)]),
            entry.r_i, entry.r_i + entry.d_i,
        )
    return MissBound(product=product, integral=math.exp(-integral / r))


def pmiss_union_bound(params: "ProtocolParams", schedule: "RingSchedule") -> float:
    """Union bound over all ring indices of the asymptotic miss bound."""
    total = 0.0
    for entry in schedule.rings:
        total += pmiss_asymptotic(MissBoundInputs(
            d_i=entry.d_i, T_i=entry.T_i, r_i=entry.r_i,
            sigma=params.sigma, r=params.r))
    return total


# ---------------------------------------------------------------------------
# Overhead rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OverheadRate:
    """Steady-state per-destination update transmission rate prediction."""

    total: float
    area_terms: tuple[float, ...]
    line_terms: tuple[float, ...]
    ring_ratio: float
    contracting: bool


def overhead_rate(params: "ProtocolParams", schedule: "RingSchedule") -> OverheadRate:
    """Predicted update overhead rate, sum over rings of (multicast + line) / lifetime.

    Uses one update per lifetime per ring (the timer-only rate). The
    multicast term for ring i is r_i d_i / r^2 and the line term r_i / r;
    successive multicast terms form a geometric sequence with ratio
    alpha^(1 + mu - gamma), so the sum converges iff that ratio is < 1.
    """
    r2 = params.r * params.r
    area_terms = []
    line_terms = []
    for entry in schedule.rings[1:]:
        area_terms.append((entry.r_i * entry.d_i / r2) / entry.T_i)
        line_terms.append((entry.r_i / params.r) / entry.T_i)
    ratio = params.alpha ** (1.0 + params.mu - params.gamma)
    return OverheadRate(
        total=float(sum(area_terms) + sum(line_terms)),
        area_terms=tuple(area_terms),
        line_terms=tuple(line_terms),
        ring_ratio=ratio,
        contracting=ratio < 1.0,
    )


def uniform_update_overhead(n: float, r: float, sigma: float) -> float:
    """Per-node overhead rate needed to hold uncertainty uniform network-wide.

    (sigma^2 / r^2) * (1 + ln(sqrt(n) / r)) with all scheme constants set
    to one; exhibits the log(n) divergence relative to the constant
    per-node capacity share. A frozen network (sigma = 0) needs nothing.
    """
    if n < 1 or r <= 0:
        raise ValueError(f"need n >= 1 and r > 0, got n={n}, r={r}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    return sigma * sigma / (r * r) * (1.0 + math.log(math.sqrt(n) / r))


# ---------------------------------------------------------------------------
# Greedy-forwarding angle geometry
# ---------------------------------------------------------------------------


def theorem1_min_epsilon(delta: float, tight: bool = False) -> float:
    """Minimum radius slack guaranteeing greedy hops within angle delta.

    pi / (delta - sin delta) - 1 for 0 < delta <= pi/3. With tight=True
    the alternative constant pi / (delta - 0.5 sin(2 delta)) - 1 is used.
    """
    if not 0.0 < delta <= math.pi / 3.0:
        raise ValueError(f"delta must be in (0, pi/3], got {delta}")
    denom = delta - (0.5 * math.sin(2.0 * delta) if tight else math.sin(delta))
    return math.pi / denom - 1.0


def anchor_area(delta: float, r: float) -> float:
    """Area of one lens-shaped anchor region, (delta - sin delta) * r^2."""
    return (delta - math.sin(delta)) * r * r


def anchor_occupancy_mc(n: int, epsilon: float, delta: float, trials: int,
                        rng: np.random.Generator) -> float:
    """Monte Carlo estimate of the probability that all anchor regions
    around a probe point are occupied.

    Drops n nodes uniformly at density one, then for each probe point
    (kept far enough from the boundary that no anchor is clipped) tests
    occupancy of ceil(2 pi / delta) lens regions formed by intersecting
    the communication disc with discs centered 2 r cos(delta/2) away.
    """
    side = math.sqrt(n)
    r = math.sqrt((1.0 + epsilon) * math.log(n) / math.pi)
    m = math.ceil(2.0 * math.pi / delta)
    anchor_dist = 2.0 * r * math.cos(delta / 2.0)
    buffer = anchor_dist + r
    if side <= 2.0 * buffer:
        raise ValueError(
            f"deployment side {side:.3g} too small for unclipped anchors "
            f"(needs > {2 * buffer:.3g}); increase n or decrease epsilon")

    pos = rng.uniform(0.0, side, size=(n, 2))
    probes = rng.uniform(buffer, side - buffer, size=(trials, 2))
    angles = 2.0 * math.pi * np.arange(m) / m
    offsets = anchor_dist * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    r2 = r * r
    occupied_all = 0
    for probe in probes:
        d2 = np.sum((pos - probe) ** 2, axis=1)
        near = pos[d2 <= r2]
        if len(near) == 0:
            continue
        ok = True
        for off in offsets:
            u = probe + off
            if not np.any(np.sum((near - u) ** 2, axis=1) <= r2):
                ok = False
                break
        if ok:
            occupied_all += 1
    return occupied_all / trials


# ---------------------------------------------------------------------------
# Bounds table export
# ---------------------------------------------------------------------------


def bounds_table(params: "ProtocolParams", schedule: "RingSchedule") -> list[dict]:
    """Per-ring summary of geometry, lifetimes and every miss/overhead bound."""
    rate = overhead_rate(params, schedule)
    rows = []
    for entry in schedule.rings:
        bound = pmiss_asymptotic(MissBoundInputs(
            d_i=entry.d_i, T_i=entry.T_i, r_i=entry.r_i,
            sigma=params.sigma, r=params.r))
        prod = pmiss_product_bound(entry.index, params, schedule)
        idx = entry.index - 1
        rows.append({
            "ring": entry.index,
            "r_i": entry.r_i,
            "d_i": entry.d_i,
            "T_i": entry.T_i,
            "pmiss_asymptotic": bound,
            "pmiss_product": prod.product,
            "pmiss_integral": prod.integral,
            "overhead_area_term": rate.area_terms[idx] if idx >= 0 else 0.0,
            "overhead_line_term": rate.line_terms[idx] if idx >= 0 else 0.0,
        })
    return rows
