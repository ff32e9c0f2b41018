"""Per-slot transmission scheduling.

The max-weight problem decouples per helper: because a scheduled user's rate
depends only on the active-subset cardinality, the best subset of a given size
S is the top-S users by weighted rate, and scanning S = 1..s_max is optimal.
An exhaustive enumerator over all subsets serves as the testing oracle, and a
queue-oblivious max-RSSI + round-robin scheme serves as the baseline.

Both the greedy path and the oracle draw their per-user weighted rates from
the same precomputed rate rows and sum them in ascending user-id order, so
their objectives are comparable bit-for-bit.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .phy import MimoConfig, sinr_matrix, slot_bits
from .topology import NetworkGraph, TopologyState

EXHAUSTIVE_NEIGHBORHOOD_CAP = 20


@dataclass(frozen=True)
class RateAllocation:
    """One slot's scheduling outcome: per-edge and aggregated per-user bits."""

    t: int
    per_edge_bits: np.ndarray
    per_user_bits: np.ndarray
    active_subsets: dict[int, tuple[int, ...]]


@dataclass
class RoundRobinState:
    """Per-helper rotating cursor over its associated users."""

    users_by_helper: dict[int, list[int]]
    cursors: dict[int, int] = field(default_factory=dict)

    def next_user(self, h: int) -> int | None:
        users = self.users_by_helper.get(h)
        if not users:
            return None
        cursor = self.cursors.get(h, 0) % len(users)
        self.cursors[h] = cursor + 1
        return users[cursor]


def helper_rate_rows(h: int, state: TopologyState, graph: NetworkGraph, s_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Eligible user ids of helper h and their rates for every subset size.

    Returns (user_ids ascending, rows) with rows[S-1, j] the bits/symbol of
    user_ids[j] when h serves S streams. Eligibility = edge + file available.
    """
    helper = graph.helpers[h]
    eligible = graph.adjacency[h] & graph.availability[h]
    ids = np.flatnonzero(eligible)
    if not len(ids):
        return ids, np.empty((0, 0))
    sinr_vec = sinr_matrix(state, graph)[h, ids]
    s_eff = min(s_max, helper.max_streams, helper.antennas)
    sizes = np.arange(1, s_eff + 1)
    prefactor = (helper.antennas - sizes + 1) / sizes
    rows = np.log2(1.0 + prefactor[:, None] * sinr_vec[None, :])
    return ids, rows


def greedy_from_rates(weights: np.ndarray, rows: np.ndarray, ids: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Sort-&-greedy subset selection from precomputed rate rows.

    For each size S, candidates are the top-S users by weight * rate (stable
    sort, so equal values break toward the lower id); the best size wins, ties
    toward smaller S. The returned objective sums the chosen users' weighted
    rates in ascending-id order, the same reduction the exhaustive oracle uses.
    """
    if not len(ids):
        return (), 0.0
    s_eff = min(rows.shape[0], len(ids))
    weighted = weights * rows[:s_eff]
    order = np.argsort(-weighted, axis=1, kind="stable")
    ranked = np.take_along_axis(weighted, order, axis=1)
    diag = np.arange(s_eff)
    objectives = np.cumsum(ranked, axis=1)[diag, diag]
    best_s = int(np.argmax(objectives))  # first max, so ties go to the smaller size
    chosen = np.sort(order[best_s, : best_s + 1])
    objective = _ordered_sum(weighted[best_s], chosen)
    return tuple(int(ids[j]) for j in chosen), objective


def greedy_select(
    h: int,
    weights: np.ndarray,
    state: TopologyState,
    graph: NetworkGraph,
    cfg: MimoConfig,
) -> tuple[tuple[int, ...], float]:
    """Optimal active subset for helper h under the cardinality-only rate model."""
    ids, rows = helper_rate_rows(h, state, graph, cfg.s_max)
    return greedy_from_rates(np.asarray(weights, dtype=float)[ids], rows, ids)


def exhaustive_select(
    h: int,
    weights: np.ndarray,
    state: TopologyState,
    graph: NetworkGraph,
    cfg: MimoConfig,
) -> tuple[tuple[int, ...], float]:
    """Exact argmax over every nonempty subset of the neighborhood; testing oracle."""
    ids, rows = helper_rate_rows(h, state, graph, cfg.s_max)
    if len(ids) > EXHAUSTIVE_NEIGHBORHOOD_CAP:
        raise ValueError(f"neighborhood of helper {h} too large for enumeration ({len(ids)} users)")
    if not len(ids):
        return (), 0.0
    w = np.asarray(weights, dtype=float)[ids]
    best_subset: tuple[int, ...] = ()
    best_obj = -np.inf
    for s_index in range(rows.shape[0]):
        size = s_index + 1
        if size > len(ids):
            break
        weighted = w * rows[s_index]
        for combo in itertools.combinations(range(len(ids)), size):
            objective = _ordered_sum(weighted, combo)
            if objective > best_obj:
                best_obj = objective
                best_subset = tuple(int(ids[j]) for j in combo)
    return best_subset, best_obj


def _ordered_sum(weighted: np.ndarray, members) -> float:
    total = 0.0
    for j in members:
        total += float(weighted[j])
    return total


def schedule_network(
    weights: np.ndarray,
    state: TopologyState,
    graph: NetworkGraph,
    cfg: MimoConfig,
    receiver_model: str = "advanced",
) -> RateAllocation:
    """Run the per-helper greedy selection and aggregate per-user bits.

    Advanced receivers decode every stream (sum over helpers); dumb receivers
    keep only the strongest one.
    """
    _check_receiver(receiver_model)
    n_h, n_u = len(graph.helpers), len(graph.users)
    per_edge = np.zeros((n_h, n_u), dtype=np.int64)
    subsets: dict[int, tuple[int, ...]] = {}
    for h in range(n_h):
        ids, rows = helper_rate_rows(h, state, graph, cfg.s_max)
        subset, _ = greedy_from_rates(np.asarray(weights, dtype=float)[ids], rows, ids)
        subsets[h] = subset
        if not subset:
            continue
        s_index = len(subset) - 1
        pos = {int(u): j for j, u in enumerate(ids)}
        for u in subset:
            per_edge[h, u] = slot_bits(float(rows[s_index, pos[u]]), cfg)
    per_user = aggregate_per_user(per_edge, receiver_model)
    return RateAllocation(t=state.t, per_edge_bits=per_edge, per_user_bits=per_user, active_subsets=subsets)


def aggregate_per_user(per_edge_bits: np.ndarray, receiver_model: str) -> np.ndarray:
    _check_receiver(receiver_model)
    if receiver_model == "advanced":
        return per_edge_bits.sum(axis=0)
    return per_edge_bits.max(axis=0) if per_edge_bits.size else np.zeros(0, dtype=np.int64)


def max_rssi_associate(state: TopologyState, graph: NetworkGraph) -> np.ndarray:
    """Map each user to the neighbor helper with the strongest received power."""
    powers = np.array([h.tx_power for h in graph.helpers])
    rssi = powers[:, None] * state.gains
    rssi = np.where(graph.adjacency, rssi, -np.inf)
    return rssi.argmax(axis=0)


def build_round_robin(associations: np.ndarray, graph: NetworkGraph) -> RoundRobinState:
    users_by_helper: dict[int, list[int]] = {h: [] for h in range(len(graph.helpers))}
    for u, h in enumerate(associations):
        users_by_helper[int(h)].append(u)
    return RoundRobinState(users_by_helper=users_by_helper)


def baseline_schedule(
    rr: RoundRobinState,
    state: TopologyState,
    graph: NetworkGraph,
    cfg: MimoConfig,
) -> RateAllocation:
    """Queue-oblivious baseline: each helper serves its next associated user SU-MIMO."""
    n_h, n_u = len(graph.helpers), len(graph.users)
    per_edge = np.zeros((n_h, n_u), dtype=np.int64)
    subsets: dict[int, tuple[int, ...]] = {}
    all_sinr = sinr_matrix(state, graph)
    for h in range(n_h):
        u = rr.next_user(h)
        if u is None:
            subsets[h] = ()
            continue
        subsets[h] = (u,)
        rate = float(np.log2(1.0 + graph.helpers[h].antennas * all_sinr[h, u]))
        per_edge[h, u] = slot_bits(rate, cfg)
    per_user = per_edge.sum(axis=0)
    return RateAllocation(t=state.t, per_edge_bits=per_edge, per_user_bits=per_user, active_subsets=subsets)


def _check_receiver(receiver_model: str) -> None:
    if receiver_model not in ("advanced", "dumb"):
        raise ValueError(f"unknown receiver model: {receiver_model!r}")
