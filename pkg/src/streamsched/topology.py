"""Network geometry: node placement, pathloss, connectivity graph, gain snapshots.

Distances live on a square torus (wrap-around) to avoid boundary effects.
Gains are large-scale pathloss only; the per-slot snapshot is deterministic
given positions, so a static layout yields a time-invariant state.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError

PATHLOSS_REF_DISTANCE_M = 40.0
PATHLOSS_EXPONENT = 3.5

# Default: transmit power in linear SNR-reference units, calibrated so a user
# 40 m from a lone helper sees 10 dB SNR (P * g(40) = P/2 = 10).
DEFAULT_TX_POWER = 20.0


@dataclass(frozen=True)
class Helper:
    id: int
    x: float
    y: float
    antennas: int
    max_streams: int
    tx_power: float

    def __post_init__(self) -> None:
        if self.antennas < 1:
            raise ConfigError(f"helper {self.id}: antennas must be positive")
        if not 1 <= self.max_streams <= self.antennas:
            raise ConfigError(f"helper {self.id}: max_streams must lie in [1, antennas]")
        if self.tx_power <= 0:
            raise ConfigError(f"helper {self.id}: tx_power must be positive")


@dataclass(frozen=True)
class UserNode:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class NetworkGraph:
    """Bipartite helper/user graph with per-edge file availability.

    adjacency[h, u] marks an edge; availability[h, u] marks that helper h
    caches the file user u streams (only meaningful on edges). Every user
    has at least one edge.
    """

    helpers: tuple[Helper, ...]
    users: tuple[UserNode, ...]
    side: float
    adjacency: np.ndarray
    availability: np.ndarray

    def __post_init__(self) -> None:
        h, u = len(self.helpers), len(self.users)
        if self.adjacency.shape != (h, u) or self.availability.shape != (h, u):
            raise ConfigError("adjacency/availability shape must be (helpers, users)")
        if u and not self.adjacency.any(axis=0).all():
            orphan = int(np.flatnonzero(~self.adjacency.any(axis=0))[0])
            raise ConfigError(f"user {orphan} has no edge to any helper")

    def neighbors_of_helper(self, h: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[h])

    def neighbors_of_user(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[:, u])


@dataclass(frozen=True)
class TopologyState:
    """Snapshot of large-scale gains for every helper-user pair at slot t."""

    gains: np.ndarray
    t: int

    def __post_init__(self) -> None:
        if (self.gains < 0).any() or not np.isfinite(self.gains).all():
            raise ValueError("gains must be finite and nonnegative")


def torus_distance(a: Sequence[float], b: Sequence[float], side: float) -> float:
    """Euclidean distance with coordinate-wise wraparound on a square of the given side."""
    if side <= 0:
        raise ConfigError(f"torus side must be positive (got {side})")
    total = 0.0
    for ac, bc in zip(a, b):
        delta = abs(ac - bc)
        delta = min(delta, side - delta)
        total += delta * delta
    return math.sqrt(total)


def pathloss_gain(d: float, ref_distance: float = PATHLOSS_REF_DISTANCE_M, exponent: float = PATHLOSS_EXPONENT) -> float:
    """Linear power gain 1 / (1 + (d / d0)^eta) at distance d meters."""
    if d < 0:
        raise ValueError(f"distance must be nonnegative (got {d})")
    return 1.0 / (1.0 + (d / ref_distance) ** exponent)


def place_users(
    side: float,
    hotspot_side: float,
    mean_users: float,
    hotspot_ratio: float,
    seed: int | np.random.SeedSequence,
) -> np.ndarray:
    """Draw user positions from a two-stratum Poisson point process.

    A central hotspot square of the given side has point density hotspot_ratio
    times the outer density; intensities are scaled so the expected total count
    is mean_users. Returns an (n, 2) array, deterministic for a fixed seed.
    """
    if side <= 0:
        raise ConfigError("region side must be positive")
    if not 0 < hotspot_side <= side:
        raise ConfigError("hotspot must be positive and fit inside the region")
    if mean_users < 0 or hotspot_ratio <= 0:
        raise ConfigError("mean_users must be >= 0 and hotspot_ratio > 0")
    rng = np.random.default_rng(seed)
    hot_area = hotspot_side * hotspot_side
    out_area = side * side - hot_area
    base_density = mean_users / (out_area + hotspot_ratio * hot_area)

    n_out = rng.poisson(base_density * out_area)
    n_hot = rng.poisson(base_density * hotspot_ratio * hot_area)

    lo = (side - hotspot_side) / 2.0
    hi = lo + hotspot_side
    outer: list[np.ndarray] = []
    # Rejection-sample the outer stratum: uniform over the region minus hotspot.
    while sum(len(p) for p in outer) < n_out:
        cand = rng.uniform(0.0, side, size=(max(n_out, 16), 2))
        inside = (cand[:, 0] >= lo) & (cand[:, 0] < hi) & (cand[:, 1] >= lo) & (cand[:, 1] < hi)
        outer.append(cand[~inside])
    outer_pts = np.concatenate(outer)[:n_out] if n_out else np.empty((0, 2))
    hot_pts = rng.uniform(lo, hi, size=(n_hot, 2)) if n_hot else np.empty((0, 2))
    return np.concatenate([outer_pts, hot_pts])


def default_helper_layout(side: float) -> list[tuple[float, float]]:
    """One helper at the region center, four at the quarter points."""
    c = side / 2.0
    q = side / 4.0
    return [(c, c), (q, q), (q, 3 * q), (3 * q, q), (3 * q, 3 * q)]


def build_graph(
    helpers: Sequence[Helper],
    users: Sequence[UserNode],
    side: float,
    edge_rule: str = "all",
    snr_threshold: float = 0.0,
    availability: np.ndarray | None = None,
) -> NetworkGraph:
    """Assemble the bipartite graph under an edge rule.

    "all" connects every pair; "snr" keeps edges with tx_power * gain >= the
    threshold, falling back to each user's best-gain helper so no user is
    isolated.
    """
    if not helpers or not users:
        raise ConfigError("need at least one helper and one user")
    if edge_rule not in ("all", "snr"):
        raise ConfigError(f"unknown edge rule: {edge_rule!r}")
    h_count, u_count = len(helpers), len(users)
    if edge_rule == "all":
        adjacency = np.ones((h_count, u_count), dtype=bool)
    else:
        rssi = _gain_matrix(helpers, users, side) * np.array([h.tx_power for h in helpers])[:, None]
        adjacency = rssi >= snr_threshold
        for u in range(u_count):
            if not adjacency[:, u].any():
                adjacency[int(np.argmax(rssi[:, u])), u] = True
    if availability is None:
        availability = np.ones((h_count, u_count), dtype=bool)
    else:
        availability = np.asarray(availability, dtype=bool)
    return NetworkGraph(
        helpers=tuple(helpers),
        users=tuple(users),
        side=side,
        adjacency=adjacency,
        availability=availability & adjacency,
    )


class StaticMobility:
    """Positions fixed at their construction-time values."""

    def positions(self, graph: NetworkGraph, t: int) -> np.ndarray:
        return np.array([(u.x, u.y) for u in graph.users])


class WaypointMobility:
    """Users drift toward successive random waypoints at constant speed.

    Waypoint legs are derived deterministically from the seed; positions are a
    pure function of t so snapshots stay reproducible.
    """

    def __init__(self, speed_m_per_slot: float, seed: int = 0):
        if speed_m_per_slot <= 0:
            raise ConfigError("waypoint speed must be positive")
        self.speed = speed_m_per_slot
        self.seed = seed

    def positions(self, graph: NetworkGraph, t: int) -> np.ndarray:
        start = np.array([(u.x, u.y) for u in graph.users])
        if not len(start):
            return start
        rng = np.random.default_rng(self.seed)
        side = graph.side
        pos = start.copy()
        remaining = np.full(len(start), float(t) * self.speed)
        # Advance each user along its waypoint legs; legs are resampled per user
        # in a fixed order, so the trajectory depends only on (seed, t).
        targets = rng.uniform(0.0, side, size=(len(start), 2))
        for _ in range(64):
            vec = targets - pos
            dist = np.linalg.norm(vec, axis=1)
            step = np.minimum(dist, remaining)
            moving = dist > 1e-12
            pos[moving] += vec[moving] / dist[moving, None] * step[moving, None]
            remaining -= step
            if (remaining <= 1e-9).all():
                break
            arrived = remaining > 1e-9
            targets[arrived] = rng.uniform(0.0, side, size=(int(arrived.sum()), 2))
        return pos


def topology_state(graph: NetworkGraph, t: int = 0, mobility: object | None = None) -> TopologyState:
    """Gain snapshot at slot t under the given mobility model (default static)."""
    if mobility is None or isinstance(mobility, StaticMobility):
        user_pos = np.array([(u.x, u.y) for u in graph.users])
    else:
        user_pos = mobility.positions(graph, t)
    gains = np.empty((len(graph.helpers), len(graph.users)))
    for h, helper in enumerate(graph.helpers):
        for u in range(len(graph.users)):
            d = torus_distance((helper.x, helper.y), user_pos[u], graph.side)
            gains[h, u] = pathloss_gain(d)
    return TopologyState(gains=gains, t=t)


def _gain_matrix(helpers: Sequence[Helper], users: Sequence[UserNode], side: float) -> np.ndarray:
    gains = np.empty((len(helpers), len(users)))
    for h, helper in enumerate(helpers):
        for u, user in enumerate(users):
            gains[h, u] = pathloss_gain(torus_distance((helper.x, helper.y), (user.x, user.y), side))
    return gains


def dump_nodes_csv(graph: NetworkGraph, path: str) -> None:
    """Write node positions as CSV rows (nodeType, id, x, y)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["nodeType", "id", "x", "y"])
        for h in graph.helpers:
            writer.writerow(["helper", h.id, repr(h.x), repr(h.y)])
        for u in graph.users:
            writer.writerow(["user", u.id, repr(u.x), repr(u.y)])


def dump_gains_csv(state: TopologyState, path: str) -> None:
    """Write the gain snapshot as CSV rows (helperId, userId, gainLinear)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["helperId", "userId", "gainLinear"])
        n_h, n_u = state.gains.shape
        for h in range(n_h):
            for u in range(n_u):
                writer.writerow([h, u, repr(float(state.gains[h, u]))])
