"""Two-time-scale simulation loop.

Chunk requests happen every n transmission slots; scheduling and queue
draining happen every slot; playback advances once per video slot (n
transmission slots). All randomness flows from a single seed split per
subsystem, so a run is bit-reproducible.

Per transmission slot t the order is: (video-slot boundary: credit arrivals
and step playback), sample queue averages, place chunk requests and update the
virtual queues (chunk-boundary slots only), schedule, drain delivered bits.
A chunk completed during slot t is credited to the video slot containing t,
i.e. it becomes playable at the next boundary.
"""
from __future__ import annotations

import csv
import os
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import client as cl
from . import playback as pb
from . import scheduler as sched
from . import topology as topo
from .config import SimConfig, config_hash, flatten_config, build_config
from .errors import ConfigError
from .phy import sinr_matrix
from .video import VideoSession, synth_catalog

SWEEP_PARAMETERS = {
    "V": "utility.v",
    "M": "mimo.m",
    "sMax": "mimo.s_max",
    "policy": "policy",
    "receiverModel": "receiver",
    "userCount": "topology.mean_users",
}


@dataclass(frozen=True)
class UserResult:
    user_id: int
    requested_chunks: int
    delivered_chunks: int
    delivered_chunk_ids: tuple[int, ...]
    average_quality: float
    average_delay: float
    buffering_percent: float
    stall_count: int
    prebuffer_slots: int
    t_start: int | None
    mean_quality_over_requested: float
    mean_q_bits: float
    mean_theta: float
    playback_finished: bool
    queue_drained: bool


@dataclass(frozen=True)
class SimResult:
    config_hash: str
    seed: int
    policy: str
    receiver: str
    users: tuple[UserResult, ...]
    utility: float
    utility_defined: bool
    mean_q_total: float
    mean_theta_total: float
    drain_complete: bool
    all_finished: bool
    slots_run: int
    traces: dict | None = None

    @property
    def unstable(self) -> bool:
        return not self.drain_complete


def build_network(cfg: SimConfig, seed_users: np.random.SeedSequence) -> topo.NetworkGraph:
    """Helpers from the configured layout plus Poisson-placed users."""
    spec = cfg.topology
    if spec.helper_layout == "center+quarters":
        coords = topo.default_helper_layout(spec.side_m)
    else:
        coords = []
        for part in spec.helper_layout.split(";"):
            part = part.strip()
            if not part:
                continue
            try:
                x, y = part.split(":")
                coords.append((float(x), float(y)))
            except ValueError as exc:
                raise ConfigError(f"topology.helper_layout: cannot parse {part!r}") from exc
        if not coords:
            raise ConfigError("topology.helper_layout produced no helpers")
    helpers = [
        topo.Helper(id=i, x=x, y=y, antennas=cfg.mimo.antennas, max_streams=cfg.mimo.s_max, tx_power=spec.tx_power)
        for i, (x, y) in enumerate(coords)
    ]
    if spec.user_layout == "poisson":
        positions = topo.place_users(spec.side_m, spec.hotspot_side_m, spec.mean_users, spec.hotspot_ratio, seed_users)
    else:
        positions = []
        for part in spec.user_layout.split(";"):
            part = part.strip()
            if not part:
                continue
            try:
                x, y = part.split(":")
                positions.append((float(x), float(y)))
            except ValueError as exc:
                raise ConfigError(f"topology.user_layout: cannot parse {part!r}") from exc
    if len(positions) == 0:
        raise ConfigError("topology: the user draw produced zero users; raise the mean or change the seed")
    users = [topo.UserNode(id=i, x=float(p[0]), y=float(p[1])) for i, p in enumerate(positions)]
    return topo.build_graph(helpers, users, spec.side_m, spec.edge_rule, spec.edge_threshold)


def _mobility_model(cfg: SimConfig, seed: int):
    if cfg.topology.mobility == "static":
        return None
    return topo.WaypointMobility(cfg.topology.waypoint_speed, seed=seed)


def _helper_tables(graph: topo.NetworkGraph, state: topo.TopologyState, cfg: SimConfig):
    """Per-helper (ids, rate rows, bit budgets, id->column map), reused across slots."""
    tables = []
    for h in range(len(graph.helpers)):
        ids, rows = sched.helper_rate_rows(h, state, graph, cfg.mimo.s_max)
        bits = np.floor(rows * cfg.mimo.symbols_per_slot).astype(np.int64) if rows.size else np.zeros_like(rows, dtype=np.int64)
        pos = {int(u): j for j, u in enumerate(ids)}
        tables.append((ids, rows, bits, pos))
    return tables


def run(cfg: SimConfig, collect_traces: bool = False, check_invariants: bool = False) -> SimResult:
    """Simulate one configuration end to end and summarize per-user QoE.

    check_invariants asserts the queue/ledger accounting identities and the
    playback consumption bound on every slot (slower; used by the fuzz tests).
    """
    root = np.random.SeedSequence(cfg.seed)
    seed_users, seed_catalog, seed_starts = root.spawn(3)

    graph = build_network(cfg, seed_users)
    n_users = len(graph.users)
    profile = synth_catalog(
        cfg.video.segments,
        seed_catalog,
        d_min=cfg.video.d_min,
        d_max=cfg.video.d_max,
        sigma=cfg.video.sigma,
        ladder_ratio=cfg.video.ladder_ratio,
        t_gop_seconds=cfg.t_gop_seconds,
    )
    start_rng = np.random.default_rng(seed_starts)
    starts = start_rng.integers(0, profile.num_chunks, size=n_users)

    sessions = [
        VideoSession(user_id=u, profile=profile, start_chunk=int(starts[u]), session_length=cfg.session_chunks)
        for u in range(n_users)
    ]
    queues = [cl.RequestQueueState() for _ in range(n_users)]
    players = [
        pb.PlaybackState(total_chunks=cfg.session_chunks, window_size=cfg.playback.window_slots, rho=cfg.playback.rho)
        for _ in range(n_users)
    ]
    requested_quality: list[list[float]] = [[] for _ in range(n_users)]
    gammas = np.zeros(n_users)
    last_mode = np.zeros(n_users, dtype=int)
    last_bits = np.zeros(n_users, dtype=np.int64)

    mobility = _mobility_model(cfg, cfg.seed)
    static = mobility is None
    state = topo.topology_state(graph, 0, mobility)
    tables = _helper_tables(graph, state, cfg)
    if cfg.policy == "baseline":
        associations = sched.max_rssi_associate(state, graph)
        rr = sched.build_round_robin(associations, graph)
        all_sinr = sinr_matrix(state, graph)
        su_bits = np.floor(
            np.log2(1.0 + np.array([h.antennas for h in graph.helpers])[:, None] * all_sinr) * cfg.mimo.symbols_per_slot
        ).astype(np.int64)

    n = cfg.n
    session_slots = cfg.session_chunks * n
    max_slots = session_slots + cfg.effective_drain_limit
    weight_history: deque[np.ndarray] = deque(maxlen=cfg.scheduler_staleness + 1)

    arrival_buffer: list[list[int]] = [[] for _ in range(n_users)]
    sum_q = np.zeros(n_users)
    sum_theta = np.zeros(n_users)
    sampled_slots = 0

    traces: dict[str, list] | None = None
    if collect_traces:
        traces = {"schedule": [], "client": [], "playback": [], "per_user_bits_sum": [], "per_user_bits_max": []}

    t = 0
    while t < max_slots:
        # Video-slot boundary: flush completions of the finished video slot.
        if t % n == 0 and t > 0:
            i = t // n
            for u in range(n_users):
                ps = players[u]
                if ps.phase == pb.FINISHED:
                    continue
                pb.record_arrivals(ps, arrival_buffer[u], i)
                a_i = len(arrival_buffer[u])
                arrival_buffer[u].clear()
                pb.playback_step(ps, i)
                if traces is not None:
                    traces["playback"].append((i, u, ps.psi, ps.phase, ps.e_last, a_i))

        sum_q += [qs.q for qs in queues]
        sum_theta += [qs.theta for qs in queues]
        sampled_slots += 1

        # Chunk-boundary slots: pick quality, enqueue the request, advance theta.
        requesting = t % n == 0 and (t // n) < cfg.session_chunks
        if requesting:
            for u in range(n_users):
                qs = queues[u]
                gamma = cl.optimize_gamma(qs.theta, cfg.utility, cfg.video.d_min, cfg.video.d_max)
                gammas[u] = gamma
                req = cl.request_chunk(qs, sessions[u], profile, t, n)
                assert req is not None
                requested_quality[u].append(req.quality)
                last_mode[u], last_bits[u] = req.mode, req.bits
                cl.update_virtual_queue(qs, gamma, req.quality)

        if not static:
            state = topo.topology_state(graph, t, mobility)
            tables = _helper_tables(graph, state, cfg)
            if cfg.policy == "baseline":
                all_sinr = sinr_matrix(state, graph)
                su_bits = np.floor(
                    np.log2(1.0 + np.array([h.antennas for h in graph.helpers])[:, None] * all_sinr)
                    * cfg.mimo.symbols_per_slot
                ).astype(np.int64)

        weights = np.fromiter((qs.q for qs in queues), dtype=float, count=n_users)
        weight_history.append(weights)
        effective_weights = weight_history[0]

        delivered_sum = np.zeros(n_users, dtype=np.int64)
        delivered_max = np.zeros(n_users, dtype=np.int64)
        if cfg.policy == "dpp":
            for h in range(len(graph.helpers)):
                ids, rows, bits, pos = tables[h]
                subset, _ = sched.greedy_from_rates(effective_weights[ids], rows, ids)
                if not subset:
                    continue
                s_index = len(subset) - 1
                total = 0
                for u in subset:
                    b = int(bits[s_index, pos[u]])
                    total += b
                    delivered_sum[u] += b
                    if b > delivered_max[u]:
                        delivered_max[u] = b
                if traces is not None:
                    traces["schedule"].append((t, h, len(subset), subset, total))
        else:
            for h in range(len(graph.helpers)):
                u = rr.next_user(h)
                if u is None:
                    continue
                b = int(su_bits[h, u])
                delivered_sum[u] += b
                if b > delivered_max[u]:
                    delivered_max[u] = b
                if traces is not None:
                    traces["schedule"].append((t, h, 1, (u,), b))

        delivered = delivered_sum if cfg.receiver == "advanced" else delivered_max
        if traces is not None:
            traces["per_user_bits_sum"].append(delivered_sum)
            traces["per_user_bits_max"].append(delivered_max)

        for u in np.flatnonzero(delivered):
            completed = cl.drain_bits(queues[u], int(delivered[u]))
            arrival_buffer[u].extend(completed)

        if check_invariants:
            for u in range(n_users):
                qs = queues[u]
                if not qs.ledger_consistent():
                    raise RuntimeError(f"slot {t}: user {u} backlog != ledger remaining sum")
                if qs.requested_bits != qs.consumed_bits + qs.q:
                    raise RuntimeError(f"slot {t}: user {u} requested != consumed + residual")
                if qs.delivered_bits != qs.consumed_bits + qs.discarded_bits:
                    raise RuntimeError(f"slot {t}: user {u} delivered != consumed + discarded")
                ledger_ids = [e.chunk_id for e in qs.ledger]
                if ledger_ids != sorted(ledger_ids):
                    raise RuntimeError(f"slot {t}: user {u} ledger out of chunk order")
                if players[u].consumed_count > players[u].arrived_count:
                    raise RuntimeError(f"slot {t}: user {u} played a chunk that never arrived")

        if traces is not None and requesting:
            for u in range(n_users):
                qs = queues[u]
                traces["client"].append(
                    (t, u, qs.q, qs.theta, gammas[u], int(last_mode[u]), int(last_bits[u]), int(delivered[u]))
                )

        t += 1
        if t >= session_slots and all(s.exhausted for s in sessions) and all(qs.q == 0 for qs in queues):
            break

    drain_complete = all(qs.q == 0 for qs in queues)
    slots_run = t

    # Playback epilogue: flush whatever completed in the final partial video
    # slot (late chunks still count toward delay metrics); if every queue
    # drained, the remaining playout is deterministic, so step video slots
    # through to the finish without the scheduler.
    for u in range(n_users):
        ps = players[u]
        if ps.phase == pb.FINISHED:
            continue
        i = ps.last_slot + 1
        pb.record_arrivals(ps, arrival_buffer[u], i)
        arrival_buffer[u].clear()
        pb.playback_step(ps, i)
        if not drain_complete:
            continue
        cap = i + ps.total_chunks + ps.window_size + 4
        while ps.phase != pb.FINISHED and i < cap:
            i += 1
            pb.playback_step(ps, i)

    users = []
    d_bar = np.zeros(n_users)
    for u in range(n_users):
        ps = players[u]
        delivered_ids = sorted(ps.delays)
        qualities = [requested_quality[u][k] for k in delivered_ids]
        qoe = pb.qoe_metrics(ps, qualities)
        requested = sessions[u].next_request_index
        d_bar[u] = sum(qualities) / requested if requested else 0.0
        users.append(
            UserResult(
                user_id=u,
                requested_chunks=requested,
                delivered_chunks=qoe.delivered_chunks,
                delivered_chunk_ids=tuple(delivered_ids),
                average_quality=qoe.average_quality,
                average_delay=qoe.average_delay,
                buffering_percent=qoe.buffering_percent,
                stall_count=qoe.stall_count,
                prebuffer_slots=qoe.prebuffer_slots,
                t_start=qoe.t_start,
                mean_quality_over_requested=float(d_bar[u]),
                mean_q_bits=float(sum_q[u] / sampled_slots),
                mean_theta=float(sum_theta[u] / sampled_slots),
                playback_finished=ps.phase == pb.FINISHED,
                queue_drained=queues[u].q == 0,
            )
        )

    utility_defined = bool(n_users and (d_bar > 0).all())
    utility = float(sum(cl.utility(cfg.utility.alpha, x) for x in d_bar)) if utility_defined else float("nan")

    return SimResult(
        config_hash=config_hash(cfg),
        seed=cfg.seed,
        policy=cfg.policy,
        receiver=cfg.receiver,
        users=tuple(users),
        utility=utility,
        utility_defined=utility_defined,
        mean_q_total=float(sum_q.sum() / sampled_slots),
        mean_theta_total=float(sum_theta.sum() / sampled_slots),
        drain_complete=drain_complete,
        all_finished=all(p.phase == pb.FINISHED for p in players),
        slots_run=slots_run,
        traces=traces,
    )


def sweep(cfg: SimConfig, parameter: str, values: Sequence) -> list[tuple[object, SimResult]]:
    """Run once per value of a named parameter, sharing the base seed."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"unknown sweep parameter {parameter!r}; known: {sorted(SWEEP_PARAMETERS)}")
    if not values:
        raise ConfigError("sweep requires at least one value")
    key = SWEEP_PARAMETERS[parameter]
    results = []
    for value in values:
        flat = flatten_config(cfg)
        flat[key] = str(value)
        results.append((value, run(build_config(flat))))
    return results


def time_average_series(trace: Sequence) -> np.ndarray:
    """Component-wise arithmetic mean over the slots of a vector trace."""
    arr = np.asarray(trace, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot average an empty trace")
    return arr.mean(axis=0)


# ---------------------------------------------------------------------------
# Result files
# ---------------------------------------------------------------------------

def _provenance_line(result: SimResult) -> list[str]:
    return [f"# config={result.config_hash} seed={result.seed}"]


def write_summary_csv(result: SimResult, path: str) -> None:
    """Per-user metrics, one row per user, with a provenance comment line."""
    with open(path, "w", newline="") as fh:
        fh.write(_provenance_line(result)[0] + "\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["userId", "requestedChunks", "deliveredChunks", "avgQuality", "avgDelaySlots",
             "bufferingPercent", "stallCount", "prebufferSlots", "tStart", "meanQBits", "meanTheta",
             "playbackFinished", "queueDrained"]
        )
        for u in result.users:
            writer.writerow(
                [u.user_id, u.requested_chunks, u.delivered_chunks, f"{u.average_quality:.6g}",
                 f"{u.average_delay:.6g}", f"{u.buffering_percent:.6g}", u.stall_count, u.prebuffer_slots,
                 "" if u.t_start is None else u.t_start, f"{u.mean_q_bits:.6g}", f"{u.mean_theta:.6g}",
                 int(u.playback_finished), int(u.queue_drained)]
            )


def write_run_csv(result: SimResult, cfg: SimConfig, path: str) -> None:
    """Run-level utility, mean backlogs, and the key config knobs."""
    flat = flatten_config(cfg)
    with open(path, "w", newline="") as fh:
        fh.write(_provenance_line(result)[0] + "\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["utility", "utilityDefined", "meanQTotal", "meanThetaTotal", "drainComplete", "allFinished",
             "slotsRun", "policy", "receiver", "V", "alpha", "M", "sMax", "users", "seed"]
        )
        writer.writerow(
            [f"{result.utility:.10g}", int(result.utility_defined), f"{result.mean_q_total:.10g}",
             f"{result.mean_theta_total:.10g}", int(result.drain_complete), int(result.all_finished),
             result.slots_run, result.policy, result.receiver, flat["utility.v"], flat["utility.alpha"],
             flat["mimo.m"], flat["mimo.s_max"], len(result.users), result.seed]
        )


def write_trace_csvs(result: SimResult, outdir: str) -> list[str]:
    """Optional per-slot traces; returns the paths written."""
    if result.traces is None:
        return []
    os.makedirs(outdir, exist_ok=True)
    written = []
    headers = {
        "schedule": ["t", "helperId", "subsetSize", "userIds", "bits"],
        "client": ["t", "userId", "qBits", "theta", "gamma", "requestedMode", "requestedBits", "deliveredBits"],
        "playback": ["i", "userId", "psi", "phase", "eWindow", "arrivals"],
    }
    for name in ("schedule", "client", "playback"):
        path = os.path.join(outdir, f"trace_{name}.csv")
        with open(path, "w", newline="") as fh:
            fh.write(_provenance_line(result)[0] + "\n")
            writer = csv.writer(fh)
            writer.writerow(headers[name])
            for row in result.traces[name]:
                writer.writerow([" ".join(map(str, v)) if isinstance(v, tuple) else v for v in row])
        written.append(path)
    return written
