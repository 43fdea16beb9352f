"""Protocol tunables, the derived ring schedule, and parameter-regime validation.

The schedule grows the ring radius, thickness and lifetime exponentially
with the ring index (factors alpha, alpha^mu, alpha^gamma). The validator
evaluates every inequality required for a scalable publish protocol with
reliable, bounded-stretch routing, and reports the communication-radius
slack needed for the greedy-angle guarantee as advisory info (the
simulation profiles deliberately run below it).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .analysis import theorem1_min_epsilon, u_max

GREEDY_EPSILON_THRESHOLD = 1.6  # empirical slack needed by plain greedy forwarding


def comm_radius(n: float, epsilon: float) -> float:
    """Connectivity communication radius, sqrt((1+eps) ln(n) / pi)."""
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    return math.sqrt((1.0 + epsilon) * math.log(n) / math.pi)


def derive_defaults(n: float, epsilon: float, beta: float, sigma: float) -> tuple[float, float, float]:
    """Reference zero-ring parameters (r0, d0, T0) from the communication radius.

    r0 = r / beta, d0 = 2 r, T0 = (beta r0 / sigma)^2 / 8 = r^2 / (8 sigma^2).
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    r = comm_radius(n, epsilon)
    r0 = r / beta
    d0 = 2.0 * r
    t0 = (beta * r0 / sigma) ** 2 / 8.0
    return r0, d0, t0


def effective_sigma_waypoint(mean_v2: float, mean_d: float, mean_d2: float) -> float:
    """Diffusion scale of a waypoint walker seen from afar.

    A walker drawing i.i.d. speeds and leg durations looks, over long
    horizons, like a diffusion of mean-square velocity E[V^2] E[D^2] / E[D];
    this returns the sigma with 2 sigma^2 equal to that.
    """
    if mean_v2 <= 0 or mean_d <= 0 or mean_d2 <= 0:
        raise ValueError("moments must be positive")
    return math.sqrt(mean_v2 * mean_d2 / (2.0 * mean_d))


@dataclass(frozen=True)
class ProtocolParams:
    """All protocol tunables plus the derived communication radius helpers."""

    n: int
    sigma: float
    epsilon: float
    alpha: float
    beta: float
    mu: float
    gamma: float
    r0: float
    d0: float
    T0: float
    bandwidth_W: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.alpha <= 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must be in (0, 1), got {self.mu}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if min(self.r0, self.d0, self.T0) <= 0:
            raise ValueError("r0, d0 and T0 must be > 0")

    @property
    def r(self) -> float:
        """Communication radius for this network size and slack."""
        return comm_radius(self.n, self.epsilon)

    @property
    def side(self) -> float:
        """Deployment square side at density one."""
        return math.sqrt(self.n)

    @property
    def u_max(self) -> float:
        """Worst-case post-bootstrap uncertainty ratio."""
        return u_max(self.alpha, self.beta)

    @property
    def exact_location_radius(self) -> float:
        """Radius within which nodes know each other's positions exactly,
        2 r / (1 - u_max). Requires u_max < 1."""
        um = self.u_max
        if um >= 1.0:
            raise ValueError(f"u_max = {um:.4g} >= 1: no exact-location radius")
        return 2.0 * self.r / (1.0 - um)

    def schedule(self, k_override: int | None = None) -> "RingSchedule":
        return ring_schedule(self, k_override=k_override)


def make_params(n: int, epsilon: float, sigma: float = 1.0, alpha: float = 2.0,
                beta: float = 0.25, mu: float = 0.55, gamma: float = 1.95,
                r0: float | None = None, d0: float | None = None,
                T0: float | None = None, bandwidth_W: float | None = None) -> ProtocolParams:
    """Build params with any unset zero-ring values derived from (n, epsilon)."""
    dr0, dd0, dt0 = derive_defaults(n, epsilon, beta, sigma)
    return ProtocolParams(
        n=n, sigma=sigma, epsilon=epsilon, alpha=alpha, beta=beta, mu=mu,
        gamma=gamma, r0=r0 if r0 is not None else dr0,
        d0=d0 if d0 is not None else dd0, T0=T0 if T0 is not None else dt0,
        bandwidth_W=bandwidth_W)


PROFILES = {
    "paper-eps0": {"epsilon": 0.0},
    "paper-eps2": {"epsilon": 2.0},
    # Slack above the delta = pi/3 greedy-angle threshold (about 16.34);
    # meant for forwarding-geometry experiments at small n.
    "theorem": {"epsilon": 17.5},
}


def profile_params(name: str, n: int, sigma: float = 1.0, **overrides) -> ProtocolParams:
    """Params for a named simulation profile at the given network size."""
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choices: {sorted(PROFILES)}")
    kwargs = dict(PROFILES[name])
    kwargs.update(overrides)
    return make_params(n=n, sigma=sigma, **kwargs)


def params_from_json(source: str | Path | dict) -> ProtocolParams:
    """Load params from a JSON document (path, JSON text, or parsed dict).

    Required keys: n, sigma, epsilon, alpha, beta, mu, gamma. Optional:
    r0, d0, T0 (derived from n/epsilon/beta/sigma when omitted),
    bandwidth_W.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(source).read_text()
        doc = json.loads(text)
    required = ["n", "sigma", "epsilon", "alpha", "beta", "mu", "gamma"]
    missing = [k for k in required if k not in doc]
    if missing:
        raise ValueError(f"config missing required keys: {missing}")
    return make_params(
        n=int(doc["n"]), sigma=float(doc["sigma"]), epsilon=float(doc["epsilon"]),
        alpha=float(doc["alpha"]), beta=float(doc["beta"]), mu=float(doc["mu"]),
        gamma=float(doc["gamma"]),
        r0=doc.get("r0"), d0=doc.get("d0"), T0=doc.get("T0"),
        bandwidth_W=doc.get("bandwidth_W"))


def params_to_dict(params: ProtocolParams) -> dict:
    return {
        "n": params.n, "sigma": params.sigma, "epsilon": params.epsilon,
        "alpha": params.alpha, "beta": params.beta, "mu": params.mu,
        "gamma": params.gamma, "r0": params.r0, "d0": params.d0,
        "T0": params.T0, "bandwidth_W": params.bandwidth_W,
        "r": params.r, "u_max": params.u_max,
    }


# ---------------------------------------------------------------------------
# Ring schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ring:
    index: int
    r_i: float
    d_i: float
    T_i: float


@dataclass(frozen=True)
class RingSchedule:
    """Ordered update-ring geometry: r_i = r0 a^i, d_i = d0 a^(mu i), T_i = T0 a^(gamma i)."""

    rings: tuple[Ring, ...]
    K: int
    degenerate: bool = False  # single ring already spans the deployment diagonal

    def __iter__(self):
        return iter(self.rings)

    @property
    def max_lifetime(self) -> float:
        return self.rings[-1].T_i


@lru_cache(maxsize=128)
def ring_schedule(params: ProtocolParams, k_override: int | None = None) -> RingSchedule:
    """Derive the ring schedule for the given params.

    K is the smallest index whose inner radius meets or exceeds the
    deployment diagonal sqrt(2 n), so every source position is enclosed by
    the outermost ring's envelope. A zero-ring radius already past the
    diagonal yields the flagged single-ring schedule.
    """
    diag = math.sqrt(2.0 * params.n)
    degenerate = False
    if k_override is not None:
        if k_override < 0:
            raise ValueError(f"k_override must be >= 0, got {k_override}")
        k = k_override
    elif params.r0 >= diag:
        k = 0
        degenerate = True
    else:
        k = max(1, math.ceil(math.log(diag / params.r0) / math.log(params.alpha)))
        # settle float wobble at exact powers: keep the smallest adequate K
        while k > 1 and params.r0 * params.alpha ** (k - 1) >= diag:
            k -= 1
        while params.r0 * params.alpha**k < diag:
            k += 1

    rings = tuple(
        Ring(index=i,
             r_i=params.r0 * params.alpha**i,
             d_i=params.d0 * params.alpha ** (params.mu * i),
             T_i=params.T0 * params.alpha ** (params.gamma * i))
        for i in range(k + 1))
    return RingSchedule(rings=rings, K=k, degenerate=degenerate)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    name: str
    passed: bool
    detail: str
    advisory: bool = False


@dataclass(frozen=True)
class ValidationReport:
    conditions: tuple[Condition, ...]
    u_max: float
    min_epsilon: float
    profile_class: str
    overall_pass: bool = field(default=False)

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "overall_pass": self.overall_pass,
            "u_max": self.u_max,
            "min_epsilon_for_delta": self.min_epsilon,
            "profile_class": self.profile_class,
            "conditions": [
                {"name": c.name, "passed": c.passed, "detail": c.detail,
                 "advisory": c.advisory}
                for c in self.conditions
            ],
        }


def validate(params: ProtocolParams, delta: float) -> ValidationReport:
    """Evaluate the full parameter regime for scalability, reliability and
    bounded stretch.

    Core conditions (all must hold): alpha > 1, beta < 1/(1+alpha),
    1/3 < mu < 1, 1+mu < gamma, gamma < 2, gamma < 4 mu. The
    communication-radius slack condition 1 + epsilon > pi/(delta - sin delta)
    and the corollary range for delta are reported as advisory rows: the
    reference simulation profiles run below that slack on purpose, so the
    report distinguishes a fully theorem-satisfying configuration from a
    simulation profile.
    """
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta}")

    a, b, m, g = params.alpha, params.beta, params.mu, params.gamma
    um = params.u_max
    core = [
        Condition("alpha_gt_1", a > 1.0, f"alpha = {a:.6g} > 1"),
        Condition("beta_lt_inv_1_plus_alpha", 0.0 < b < 1.0 / (1.0 + a),
                  f"beta = {b:.6g} vs 1/(1+alpha) = {1.0 / (1.0 + a):.6g}"),
        Condition("mu_in_third_to_one", 1.0 / 3.0 < m < 1.0,
                  f"mu = {m:.6g} in (1/3, 1)"),
        Condition("gamma_gt_1_plus_mu", g > 1.0 + m,
                  f"gamma = {g:.6g} > 1 + mu = {1.0 + m:.6g}"),
        Condition("gamma_lt_2", g < 2.0, f"gamma = {g:.6g} < 2"),
        Condition("gamma_lt_4mu", g < 4.0 * m,
                  f"gamma = {g:.6g} < 4 mu = {4.0 * m:.6g}"),
    ]

    min_eps = theorem1_min_epsilon(min(delta, math.pi / 3.0))
    eps_ok = 1.0 + params.epsilon > math.pi / (delta - math.sin(delta))
    delta_cap = math.pi / 3.0 if um >= 1.0 else min(math.pi / 3.0,
                                                    math.pi / 2.0 - math.asin(min(um, 1.0)))
    advisory = [
        Condition("epsilon_angle_guarantee", eps_ok,
                  f"epsilon = {params.epsilon:.6g} vs required > {min_eps:.6g} "
                  f"for delta = {delta:.6g}", advisory=True),
        Condition("delta_in_corollary_range", 0.0 < delta < delta_cap,
                  f"delta = {delta:.6g} vs cap {delta_cap:.6g}", advisory=True),
        Condition("epsilon_greedy_threshold", params.epsilon > GREEDY_EPSILON_THRESHOLD,
                  f"epsilon = {params.epsilon:.6g} vs greedy threshold "
                  f"{GREEDY_EPSILON_THRESHOLD}", advisory=True),
    ]

    overall = all(c.passed for c in core)
    if overall and eps_ok and advisory[1].passed:
        profile_class = "theorem-satisfying"
    elif overall:
        profile_class = "paper-simulation-profile"
    else:
        profile_class = "invalid"

    return ValidationReport(
        conditions=tuple(core + advisory), u_max=um, min_epsilon=min_eps,
        profile_class=profile_class, overall_pass=overall)
