"""Randomized oracle suites for the scheduler, the line search, and the ledger.

These are the checks behind `streamsched validate`: the greedy subset
selection must match exhaustive enumeration exactly, the golden-section search
must match the analytic clamp forms, and the request-queue ledger must stay
consistent under arbitrary request/drain interleavings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import client as cl
from . import scheduler as sched
from . import topology as topo
from .phy import MimoConfig
from .video import VideoSession, synth_catalog

GAMMA_CLAMP_TOL = 1e-6


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: int
    total: int
    first_failure: dict | None = None

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def random_instance(rng: np.random.Generator):
    """One scheduling instance: a focal helper, random gains, random weights."""
    n_users = int(rng.integers(1, 13))
    n_helpers = int(rng.integers(1, 4))
    antennas = int(rng.choice([10, 20, 40]))
    s_max = int(rng.integers(1, min(10, antennas) + 1))
    helpers = [
        topo.Helper(id=h, x=0.0, y=0.0, antennas=antennas, max_streams=antennas, tx_power=float(rng.uniform(1, 50)))
        for h in range(n_helpers)
    ]
    users = [topo.UserNode(id=u, x=0.0, y=0.0) for u in range(n_users)]
    graph = topo.NetworkGraph(
        helpers=tuple(helpers),
        users=tuple(users),
        side=100.0,
        adjacency=np.ones((n_helpers, n_users), dtype=bool),
        availability=np.ones((n_helpers, n_users), dtype=bool),
    )
    gains = rng.uniform(0.0, 1.0, size=(n_helpers, n_users))
    state = topo.TopologyState(gains=gains, t=0)
    weights = rng.uniform(0.0, 1.0, size=n_users) * 10.0 ** rng.integers(0, 8)
    weights[rng.uniform(size=n_users) < 0.15] = 0.0
    cfg = MimoConfig(antennas=antennas, s_max=s_max, symbols_per_slot=1000)
    return graph, state, weights, cfg


def greedy_vs_exhaustive(instances: int = 10_000, seed: int = 7) -> SuiteResult:
    """Greedy objective must equal the exhaustive argmax exactly, instance by instance."""
    rng = np.random.default_rng(seed)
    passed = 0
    failure = None
    for case in range(instances):
        graph, state, weights, cfg = random_instance(rng)
        g_subset, g_obj = sched.greedy_select(0, weights, state, graph, cfg)
        e_subset, e_obj = sched.exhaustive_select(0, weights, state, graph, cfg)
        if g_obj == e_obj:
            passed += 1
        elif failure is None:
            failure = {
                "case": case,
                "greedy_subset": list(g_subset),
                "greedy_objective": g_obj,
                "exhaustive_subset": list(e_subset),
                "exhaustive_objective": e_obj,
                "weights": weights.tolist(),
                "gains": state.gains.tolist(),
                "antennas": cfg.antennas,
                "s_max": cfg.s_max,
            }
    return SuiteResult("greedy_vs_exhaustive", passed, instances, failure)


def gamma_closed_form(cases: int = 1000, seed: int = 11) -> SuiteResult:
    """Line search vs analytic clamp: exact for alpha=1, within 1e-6 for alpha=2."""
    rng = np.random.default_rng(seed)
    passed = 0
    failure = None
    for case in range(cases):
        d_min = float(rng.uniform(0.05, 0.6))
        d_max = float(rng.uniform(d_min + 0.05, 1.5))
        v = float(10.0 ** rng.uniform(-2, 6))
        theta = 0.0 if rng.uniform() < 0.1 else float(10.0 ** rng.uniform(-2, 8))
        alpha = 1.0 if case % 2 == 0 else 2.0
        got = cl.optimize_gamma(theta, cl.UtilityConfig(alpha=alpha, v=v), d_min, d_max)
        if theta == 0.0:
            expected = d_max
        elif alpha == 1.0:
            expected = min(max(v / theta, d_min), d_max)
        else:
            expected = min(max(math.sqrt(v / theta), d_min), d_max)
        tol = 0.0 if (alpha == 1.0 or theta == 0.0) else GAMMA_CLAMP_TOL
        if abs(got - expected) <= tol:
            passed += 1
        elif failure is None:
            failure = {"case": case, "alpha": alpha, "v": v, "theta": theta,
                       "d_min": d_min, "d_max": d_max, "got": got, "expected": expected}
    return SuiteResult("gamma_closed_form", passed, cases, failure)


def ledger_fuzz(cases: int = 200, seed: int = 13) -> SuiteResult:
    """Random request/drain interleavings keep the ledger and counters coherent."""
    rng = np.random.default_rng(seed)
    passed = 0
    failure = None
    for case in range(cases):
        profile = synth_catalog(
            [(int(rng.integers(2, 20)), int(rng.integers(1, 6)), float(rng.uniform(100, 5000)))],
            seed=int(rng.integers(0, 2**31)),
        )
        session = VideoSession(user_id=0, profile=profile, start_chunk=int(rng.integers(0, profile.num_chunks)),
                               session_length=int(rng.integers(1, 40)))
        qs = cl.RequestQueueState()
        qs.theta = float(rng.uniform(0, 1e6))
        n = 4
        completed_order: list[int] = []
        problem = None
        t = 0
        while not session.exhausted or qs.ledger:
            if t % n == 0 and not session.exhausted:
                cl.request_chunk(qs, session, profile, t, n)
            if rng.uniform() < 0.8:
                completed_order.extend(cl.drain_bits(qs, int(rng.integers(0, 60000))))
            if not qs.ledger_consistent():
                problem = {"case": case, "t": t, "reason": "ledger sum != q", "q": qs.q}
                break
            if qs.requested_bits != qs.consumed_bits + qs.q:
                problem = {"case": case, "t": t, "reason": "requested != consumed + residual"}
                break
            if qs.delivered_bits != qs.consumed_bits + qs.discarded_bits:
                problem = {"case": case, "t": t, "reason": "delivered != consumed + discarded"}
                break
            t += 1
        if problem is None and completed_order != sorted(completed_order):
            problem = {"case": case, "reason": "out-of-order completion", "order": completed_order}
        if problem is None and completed_order != list(range(len(completed_order))):
            problem = {"case": case, "reason": "completions not a contiguous prefix", "order": completed_order}
        if problem is None:
            passed += 1
        elif failure is None:
            failure = problem
    return SuiteResult("ledger_fuzz", passed, cases, failure)


def run_all(instances: int = 10_000, cases: int = 1000, seed: int = 7, inject_failure: bool = False) -> list[SuiteResult]:
    results = [
        greedy_vs_exhaustive(instances, seed),
        gamma_closed_form(cases, seed + 1),
        ledger_fuzz(max(cases // 5, 1), seed + 2),
    ]
    if inject_failure:
        results.append(SuiteResult("injected_failure", 0, 1, {"reason": "failure injection requested"}))
    return results
