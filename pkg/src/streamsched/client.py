"""Per-user pull congestion control.

Each user keeps a request queue Q (bits requested but not yet delivered,
backed by a head-of-line ledger of outstanding chunks) and a virtual queue
used to steer the long-run requested quality. Chunk quality is chosen by
minimizing Q * bits - theta * quality over the mode ladder; the auxiliary
variable gamma maximizes V * utility(gamma) - theta * gamma over the quality
range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .video import QualityRateProfile, VideoSession, chunk_quality, chunk_size_bits, session_chunk

GOLDEN_SECTION_TOL = 1e-9
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class LedgerEntry:
    chunk_id: int
    mode: int
    total_bits: int
    remaining_bits: int


@dataclass
class RequestQueueState:
    """Request-queue backlog, virtual queue, and the outstanding-chunk ledger.

    The backlog q always equals the ledger's remaining-bits sum; cumulative
    counters make the conservation identity checkable at any slot:
    requested_bits == consumed_bits + q, delivered == consumed + discarded.
    """

    q: float = 0.0
    theta: float = 0.0
    ledger: list[LedgerEntry] = field(default_factory=list)
    requested_bits: int = 0
    consumed_bits: int = 0
    discarded_bits: int = 0
    delivered_bits: int = 0

    def ledger_consistent(self) -> bool:
        return self.q == float(sum(e.remaining_bits for e in self.ledger))


@dataclass(frozen=True)
class UtilityConfig:
    alpha: float = 1.0
    v: float = 2e14

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ConfigError("utility.alpha must be nonnegative")
        if self.v <= 0:
            raise ConfigError("utility.v must be positive")


@dataclass(frozen=True)
class ChunkRequest:
    chunk_id: int
    catalog_index: int
    mode: int
    bits: int
    quality: float


def utility(alpha: float, x: float) -> float:
    """Fairness utility: log for alpha=1, power form otherwise."""
    if x <= 0:
        raise ValueError(f"utility argument must be positive (got {x})")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 1.0:
        return math.log(x)
    return x ** (1.0 - alpha) / (1.0 - alpha)


def select_mode(qs: RequestQueueState, profile: QualityRateProfile, i: int) -> int:
    """Mode minimizing q * size - theta * quality over chunk i's ladder; ties to the lowest mode."""
    best_mode = 1
    best_score = math.inf
    for m in range(1, profile.modes_per_chunk(i) + 1):
        score = qs.q * chunk_size_bits(profile, i, m) - qs.theta * chunk_quality(profile, i, m)
        if score < best_score:
            best_score = score
            best_mode = m
    return best_mode


def request_chunk(
    qs: RequestQueueState,
    session: VideoSession,
    profile: QualityRateProfile,
    t: int,
    n: int,
) -> ChunkRequest | None:
    """Place the session's next chunk request; None once the session is exhausted.

    Only valid on chunk-boundary slots (t multiple of n). The requested bits
    join the queue immediately; delivery happens over later drain calls.
    """
    if n < 1:
        raise ConfigError("n (slots per chunk) must be positive")
    if t % n != 0:
        raise ValueError(f"chunk requests only happen on slots that are multiples of {n} (got t={t})")
    if session.exhausted:
        return None
    k = session.next_request_index
    i = session_chunk(session, k)
    m = select_mode(qs, profile, i)
    bits = chunk_size_bits(profile, i, m)
    qs.ledger.append(LedgerEntry(chunk_id=k, mode=m, total_bits=bits, remaining_bits=bits))
    qs.q += bits
    qs.requested_bits += bits
    session.next_request_index += 1
    return ChunkRequest(chunk_id=k, catalog_index=i, mode=m, bits=bits, quality=chunk_quality(profile, i, m))


def drain_bits(qs: RequestQueueState, delivered_bits: int) -> list[int]:
    """Consume delivered bits head-of-line; returns the chunk ids completed now.

    Bits beyond the outstanding backlog are discarded (the queue never goes
    negative), and the discard is accounted.
    """
    if delivered_bits < 0:
        raise ValueError("delivered bits must be nonnegative")
    qs.delivered_bits += delivered_bits
    remaining = delivered_bits
    completed: list[int] = []
    while remaining > 0 and qs.ledger:
        head = qs.ledger[0]
        eat = min(remaining, head.remaining_bits)
        head.remaining_bits -= eat
        remaining -= eat
        qs.q -= eat
        qs.consumed_bits += eat
        if head.remaining_bits == 0:
            completed.append(head.chunk_id)
            qs.ledger.pop(0)
    if remaining > 0:
        qs.discarded_bits += remaining
    return completed


def optimize_gamma(theta: float, cfg: UtilityConfig, d_min: float, d_max: float) -> float:
    """Maximize v * utility(gamma) - theta * gamma over [d_min, d_max].

    alpha=1 admits the closed form clamp(v / theta); other alphas use a
    golden-section search (the objective is concave).
    """
    if not d_min < d_max:
        raise ConfigError("d_min must be < d_max")
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if theta == 0.0:
        return d_max
    if cfg.alpha == 1.0:
        return min(max(cfg.v / theta, d_min), d_max)

    def objective(g: float) -> float:
        return cfg.v * utility(cfg.alpha, g) - theta * g

    lo, hi = d_min, d_max
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    while hi - lo > GOLDEN_SECTION_TOL:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = objective(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = objective(x2)
    # Boundary optima are common (the clamp); snap to an endpoint when it wins.
    return max((0.5 * (lo + hi), d_min, d_max), key=objective)


def update_virtual_queue(qs: RequestQueueState, gamma: float, delivered_quality: float) -> float:
    """Advance theta by gamma minus the quality requested this slot, floored at zero."""
    qs.theta = max(qs.theta + gamma - delivered_quality, 0.0)
    return qs.theta
