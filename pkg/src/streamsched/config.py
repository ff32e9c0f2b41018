"""Simulation configuration: defaults, flat key-value files, dotted overrides.

The canonical form of a configuration is a flat string map (the same keys the
config file and --set overrides use); `build_config` turns that map into typed
dataclasses and validates it. Hashing the flat map gives a stable provenance
tag for output files.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable

from .client import UtilityConfig
from .errors import ConfigError
from .phy import MimoConfig
from .topology import DEFAULT_TX_POWER
from .video import DEFAULT_D_MAX, DEFAULT_D_MIN, DEFAULT_SEGMENTS

POLICIES = ("dpp", "baseline")
RECEIVERS = ("advanced", "dumb")


@dataclass(frozen=True)
class TopologySpec:
    side_m: float = 80.0
    helper_layout: str = "center+quarters"
    user_layout: str = "poisson"
    tx_power: float = DEFAULT_TX_POWER
    mean_users: float = 500.0
    hotspot_side_m: float = 80.0 / 3.0
    hotspot_ratio: float = 10.0
    edge_rule: str = "all"
    edge_threshold: float = 0.0
    mobility: str = "static"
    waypoint_speed: float = 0.0

    def __post_init__(self) -> None:
        if self.side_m <= 0:
            raise ConfigError("topology.side_m must be positive")
        if not 0 < self.hotspot_side_m <= self.side_m:
            raise ConfigError("topology.hotspot_side_m must be positive and fit in the region")
        if self.hotspot_ratio <= 0:
            raise ConfigError("topology.hotspot_ratio must be positive")
        if self.mean_users < 0:
            raise ConfigError("topology.mean_users must be nonnegative")
        if self.tx_power <= 0:
            raise ConfigError("topology.tx_power must be positive")
        if self.edge_rule not in ("all", "snr"):
            raise ConfigError("topology.edge_rule must be 'all' or 'snr'")
        if self.mobility not in ("static", "waypoint"):
            raise ConfigError("topology.mobility must be 'static' or 'waypoint'")
        if self.mobility == "waypoint" and self.waypoint_speed <= 0:
            raise ConfigError("topology.waypoint_speed must be positive under waypoint mobility")


@dataclass(frozen=True)
class VideoSpec:
    # d_min/d_max are placeholder quality bounds; the experiment's source clips
    # publish no per-mode quality scores, so only ordering and range matter.
    segments: tuple[tuple[int, int, float], ...] = DEFAULT_SEGMENTS
    d_min: float = DEFAULT_D_MIN
    d_max: float = DEFAULT_D_MAX
    sigma: float = 0.2
    ladder_ratio: float = 0.67

    def __post_init__(self) -> None:
        if not self.segments:
            raise ConfigError("video.segments must not be empty")
        for seg in self.segments:
            chunks, modes, kbps = seg
            if chunks < 1 or modes < 1 or kbps <= 0:
                raise ConfigError(f"video.segments: invalid segment {seg}")
        if not self.d_min < self.d_max:
            raise ConfigError("video.d_min must be < video.d_max")
        if self.sigma < 0:
            raise ConfigError("video.sigma must be nonnegative")
        if not 0 < self.ladder_ratio < 1:
            raise ConfigError("video.ladder_ratio must lie in (0, 1)")


@dataclass(frozen=True)
class PlaybackSpec:
    window_slots: int = 20
    rho: float = 3.0

    def __post_init__(self) -> None:
        if self.window_slots < 1:
            raise ConfigError("playback.window_slots must be positive")
        if self.rho <= 0:
            raise ConfigError("playback.rho must be positive")


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    policy: str = "dpp"
    receiver: str = "advanced"
    n: int = 50
    session_chunks: int = 1000
    drain_limit_slots: int = 0  # 0 means the default of 200 * n
    t_gop_seconds: float = 0.5
    slot_seconds: float = 0.01
    scheduler_staleness: int = 0
    utility: UtilityConfig = field(default_factory=UtilityConfig)
    mimo: MimoConfig = field(default_factory=MimoConfig)
    topology: TopologySpec = field(default_factory=TopologySpec)
    video: VideoSpec = field(default_factory=VideoSpec)
    playback: PlaybackSpec = field(default_factory=PlaybackSpec)

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}")
        if self.receiver not in RECEIVERS:
            raise ConfigError(f"receiver must be one of {RECEIVERS}")
        if self.n < 1:
            raise ConfigError("n must be a positive integer")
        if self.session_chunks < 1:
            raise ConfigError("session_chunks must be positive")
        if self.drain_limit_slots < 0:
            raise ConfigError("drain_limit_slots must be nonnegative")
        if self.t_gop_seconds <= 0 or self.slot_seconds <= 0:
            raise ConfigError("t_gop_seconds and slot_seconds must be positive")
        if self.scheduler_staleness < 0:
            raise ConfigError("scheduler_staleness must be nonnegative")

    @property
    def effective_drain_limit(self) -> int:
        return self.drain_limit_slots if self.drain_limit_slots > 0 else 200 * self.n


def _parse_segments(text: str) -> tuple[tuple[int, int, float], ...]:
    """Parse '200x8@631,200x4@3908,...' into (chunks, modes, kbps) triples."""
    segments = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            count_modes, kbps = part.split("@")
            count, modes = count_modes.lower().split("x")
            segments.append((int(count), int(modes), float(kbps)))
        except ValueError as exc:
            raise ConfigError(f"video.segments: cannot parse segment {part!r}") from exc
    if not segments:
        raise ConfigError("video.segments: empty segment list")
    return tuple(segments)


def _format_segments(segments: Iterable[tuple[int, int, float]]) -> str:
    return ",".join(f"{c}x{m}@{kbps:g}" for c, m, kbps in segments)


def _parse_bool_policy(name: str, allowed: tuple[str, ...]):
    def cast(text: str) -> str:
        if text not in allowed:
            raise ConfigError(f"{name} must be one of {allowed} (got {text!r})")
        return text

    return cast


# key -> (caster from string, formatter to canonical string)
_KEY_CASTERS = {
    "seed": (int, str),
    "policy": (_parse_bool_policy("policy", POLICIES), str),
    "receiver": (_parse_bool_policy("receiver", RECEIVERS), str),
    "n": (int, str),
    "session_chunks": (int, str),
    "drain_limit_slots": (int, str),
    "t_gop_seconds": (float, repr),
    "slot_seconds": (float, repr),
    "scheduler_staleness": (int, str),
    "utility.alpha": (float, repr),
    "utility.v": (float, repr),
    "mimo.m": (int, str),
    "mimo.s_max": (int, str),
    "mimo.symbols_per_slot": (int, str),
    "topology.side_m": (float, repr),
    "topology.helper_layout": (str, str),
    "topology.user_layout": (str, str),
    "topology.tx_power": (float, repr),
    "topology.mean_users": (float, repr),
    "topology.hotspot_side_m": (float, repr),
    "topology.hotspot_ratio": (float, repr),
    "topology.edge_rule": (str, str),
    "topology.edge_threshold": (float, repr),
    "topology.mobility": (str, str),
    "topology.waypoint_speed": (float, repr),
    "video.segments": (_parse_segments, _format_segments),
    "video.d_min": (float, repr),
    "video.d_max": (float, repr),
    "video.sigma": (float, repr),
    "video.ladder_ratio": (float, repr),
    "playback.window_slots": (int, str),
    "playback.rho": (float, repr),
}

KNOWN_KEYS = tuple(sorted(_KEY_CASTERS))


def default_flat() -> dict[str, str]:
    """The default configuration as a flat key -> string map."""
    return flatten_config(SimConfig())


def flatten_config(cfg: SimConfig) -> dict[str, str]:
    values = {
        "seed": cfg.seed,
        "policy": cfg.policy,
        "receiver": cfg.receiver,
        "n": cfg.n,
        "session_chunks": cfg.session_chunks,
        "drain_limit_slots": cfg.drain_limit_slots,
        "t_gop_seconds": cfg.t_gop_seconds,
        "slot_seconds": cfg.slot_seconds,
        "scheduler_staleness": cfg.scheduler_staleness,
        "utility.alpha": cfg.utility.alpha,
        "utility.v": cfg.utility.v,
        "mimo.m": cfg.mimo.antennas,
        "mimo.s_max": cfg.mimo.s_max,
        "mimo.symbols_per_slot": cfg.mimo.symbols_per_slot,
        "topology.side_m": cfg.topology.side_m,
        "topology.helper_layout": cfg.topology.helper_layout,
        "topology.user_layout": cfg.topology.user_layout,
        "topology.tx_power": cfg.topology.tx_power,
        "topology.mean_users": cfg.topology.mean_users,
        "topology.hotspot_side_m": cfg.topology.hotspot_side_m,
        "topology.hotspot_ratio": cfg.topology.hotspot_ratio,
        "topology.edge_rule": cfg.topology.edge_rule,
        "topology.edge_threshold": cfg.topology.edge_threshold,
        "topology.mobility": cfg.topology.mobility,
        "topology.waypoint_speed": cfg.topology.waypoint_speed,
        "video.segments": cfg.video.segments,
        "video.d_min": cfg.video.d_min,
        "video.d_max": cfg.video.d_max,
        "video.sigma": cfg.video.sigma,
        "video.ladder_ratio": cfg.video.ladder_ratio,
        "playback.window_slots": cfg.playback.window_slots,
        "playback.rho": cfg.playback.rho,
    }
    return {key: _KEY_CASTERS[key][1](val) for key, val in values.items()}


def build_config(flat: dict[str, str]) -> SimConfig:
    """Construct and validate a SimConfig from a flat string map."""
    merged = default_flat()
    for key, raw in flat.items():
        if key not in _KEY_CASTERS:
            raise ConfigError(f"unknown configuration key: {key!r}")
        merged[key] = raw
    typed = {}
    for key, raw in merged.items():
        caster = _KEY_CASTERS[key][0]
        try:
            typed[key] = caster(raw) if isinstance(raw, str) else raw
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return SimConfig(
        seed=typed["seed"],
        policy=typed["policy"],
        receiver=typed["receiver"],
        n=typed["n"],
        session_chunks=typed["session_chunks"],
        drain_limit_slots=typed["drain_limit_slots"],
        t_gop_seconds=typed["t_gop_seconds"],
        slot_seconds=typed["slot_seconds"],
        scheduler_staleness=typed["scheduler_staleness"],
        utility=UtilityConfig(alpha=typed["utility.alpha"], v=typed["utility.v"]),
        mimo=MimoConfig(
            antennas=typed["mimo.m"],
            s_max=typed["mimo.s_max"],
            symbols_per_slot=typed["mimo.symbols_per_slot"],
        ),
        topology=TopologySpec(
            side_m=typed["topology.side_m"],
            helper_layout=typed["topology.helper_layout"],
            user_layout=typed["topology.user_layout"],
            tx_power=typed["topology.tx_power"],
            mean_users=typed["topology.mean_users"],
            hotspot_side_m=typed["topology.hotspot_side_m"],
            hotspot_ratio=typed["topology.hotspot_ratio"],
            edge_rule=typed["topology.edge_rule"],
            edge_threshold=typed["topology.edge_threshold"],
            mobility=typed["topology.mobility"],
            waypoint_speed=typed["topology.waypoint_speed"],
        ),
        video=VideoSpec(
            segments=typed["video.segments"],
            d_min=typed["video.d_min"],
            d_max=typed["video.d_max"],
            sigma=typed["video.sigma"],
            ladder_ratio=typed["video.ladder_ratio"],
        ),
        playback=PlaybackSpec(window_slots=typed["playback.window_slots"], rho=typed["playback.rho"]),
    )


def parse_config_file(path: str) -> list[tuple[str, str]]:
    """Read 'key = value' lines; '#' starts a comment, blank lines are skipped."""
    pairs: list[tuple[str, str]] = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
                key, _, value = stripped.partition("=")
                pairs.append((key.strip(), value.strip()))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return pairs


def parse_override(text: str) -> tuple[str, str]:
    """Parse a --set style 'key=value' override."""
    if "=" not in text:
        raise ConfigError(f"override must look like key=value (got {text!r})")
    key, _, value = text.partition("=")
    key, value = key.strip(), value.strip()
    if not key or not value:
        raise ConfigError(f"override must look like key=value (got {text!r})")
    return key, value


def config_from_sources(
    config_path: str | None = None,
    overrides: Iterable[str] = (),
    seed: int | None = None,
) -> SimConfig:
    """Merge defaults <- config file <- --set overrides <- --seed; last one wins."""
    flat = default_flat()
    if config_path is not None:
        for key, value in parse_config_file(config_path):
            if key not in _KEY_CASTERS:
                raise ConfigError(f"unknown configuration key in {config_path}: {key!r}")
            flat[key] = value
    for text in overrides:
        key, value = parse_override(text)
        if key not in _KEY_CASTERS:
            raise ConfigError(f"unknown configuration key in override: {key!r}")
        flat[key] = value
    if seed is not None:
        flat["seed"] = str(seed)
    return build_config(flat)


def config_hash(cfg: SimConfig) -> str:
    """Stable 12-hex-digit digest of the canonical flat form."""
    flat = flatten_config(cfg)
    payload = "\n".join(f"{k}={flat[k]}" for k in sorted(flat))
    return hashlib.sha256(payload.encode()).hexdigest()[:12]
