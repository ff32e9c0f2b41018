"""VBR video catalogs: per-chunk quality/size ladders and a synthetic generator.

A catalog stores, for every chunk of a file, the ladder of encoding modes
(mode 1 = fewest bits) with a quality score and a size in bits per mode.
Profiles are immutable after construction and safe to share across workers.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Default experiment catalog: four segments of 200 chunks each,
# (chunks, modes, mean kbps of the top mode).
DEFAULT_SEGMENTS = (
    (200, 8, 631.0),
    (200, 4, 3908.0),
    (200, 4, 6679.0),
    (200, 8, 556.0),
)

DEFAULT_D_MIN = 0.3
DEFAULT_D_MAX = 1.0


@dataclass(frozen=True)
class QualityRateProfile:
    """Per-chunk, per-mode quality and size table for one video file.

    quality[i][m-1] and size_bits[i][m-1] hold the values for chunk i at
    mode m (modes are 1-indexed). Within a chunk, sizes strictly increase
    with mode and quality never decreases.
    """

    file_id: str
    quality: tuple[tuple[float, ...], ...]
    size_bits: tuple[tuple[int, ...], ...]
    d_min: float
    d_max: float

    def __post_init__(self) -> None:
        if len(self.quality) != len(self.size_bits):
            raise ValueError("quality and size_bits must have one row per chunk")
        if not self.quality:
            raise ValueError("profile must contain at least one chunk")
        if not self.d_min < self.d_max:
            raise ValueError(f"d_min must be < d_max (got {self.d_min}, {self.d_max})")
        for i, (qs, bs) in enumerate(zip(self.quality, self.size_bits)):
            if len(qs) != len(bs) or len(qs) < 1:
                raise ValueError(f"chunk {i}: mismatched or empty mode ladder")
            for m in range(len(qs)):
                if not (self.d_min <= qs[m] <= self.d_max):
                    raise ValueError(f"chunk {i} mode {m + 1}: quality {qs[m]} outside bounds")
                if bs[m] < 0:
                    raise ValueError(f"chunk {i} mode {m + 1}: negative size")
                if m > 0:
                    if bs[m] <= bs[m - 1]:
                        raise ValueError(f"chunk {i}: sizes not strictly increasing at mode {m + 1}")
                    if qs[m] < qs[m - 1]:
                        raise ValueError(f"chunk {i}: quality decreases at mode {m + 1}")

    @property
    def num_chunks(self) -> int:
        return len(self.quality)

    def modes_per_chunk(self, i: int) -> int:
        if not 0 <= i < self.num_chunks:
            raise ValueError(f"chunk index {i} out of range [0, {self.num_chunks})")
        return len(self.quality[i])


@dataclass
class VideoSession:
    """One user's streaming session over a catalog, cycling modulo its length."""

    user_id: int
    profile: QualityRateProfile
    start_chunk: int
    session_length: int
    next_request_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.start_chunk < self.profile.num_chunks:
            raise ValueError(f"start_chunk {self.start_chunk} outside catalog")
        if self.session_length < 1:
            raise ValueError("session_length must be positive")

    @property
    def exhausted(self) -> bool:
        return self.next_request_index >= self.session_length


def chunk_quality(profile: QualityRateProfile, i: int, m: int) -> float:
    """Quality score of chunk i at mode m (1-indexed)."""
    _check_indices(profile, i, m)
    return profile.quality[i][m - 1]


def chunk_size_bits(profile: QualityRateProfile, i: int, m: int) -> int:
    """Size in bits of chunk i at mode m (1-indexed)."""
    _check_indices(profile, i, m)
    return profile.size_bits[i][m - 1]


def session_chunk(session: VideoSession, k: int) -> int:
    """Catalog chunk index for the k-th chunk of the session (wraps around)."""
    if not 0 <= k < session.session_length:
        raise ValueError(f"session chunk counter {k} outside [0, {session.session_length})")
    return (session.start_chunk + k) % session.profile.num_chunks


def _check_indices(profile: QualityRateProfile, i: int, m: int) -> None:
    if not 0 <= i < profile.num_chunks:
        raise ValueError(f"chunk index {i} out of range [0, {profile.num_chunks})")
    if not 1 <= m <= len(profile.quality[i]):
        raise ValueError(f"mode {m} out of range [1, {len(profile.quality[i])}] at chunk {i}")


def synth_catalog(
    segments: Sequence[tuple[int, int, float]] = DEFAULT_SEGMENTS,
    seed: int = 0,
    *,
    d_min: float = DEFAULT_D_MIN,
    d_max: float = DEFAULT_D_MAX,
    sigma: float = 0.2,
    ladder_ratio: float = 0.67,
    t_gop_seconds: float = 0.5,
    file_id: str = "synthetic",
) -> QualityRateProfile:
    """Generate a VBR catalog from segment descriptors (chunks, modes, mean kbps).

    The mean bitrate of a segment is the target for its top (reference) mode;
    lower modes follow a geometric ladder with the given ratio. Per-chunk sizes
    jitter around the segment mean with a lognormal multiplier of unit mean
    (sigma on the log scale), and quality maps from size through a log-shaped
    concave curve spanning [d_min, d_max]. Deterministic for a fixed seed.
    """
    if not segments:
        raise ValueError("segment list is empty")
    if not d_min < d_max:
        raise ValueError("d_min must be < d_max")
    if not 0.0 < ladder_ratio < 1.0:
        raise ValueError("ladder_ratio must lie in (0, 1)")
    rng = np.random.default_rng(seed)

    quality_rows: list[tuple[float, ...]] = []
    size_rows: list[tuple[int, ...]] = []
    for seg_index, (n_chunks, n_modes, mean_kbps) in enumerate(segments):
        if n_chunks < 1 or n_modes < 1:
            raise ValueError(f"segment {seg_index}: chunks and modes must be positive")
        if mean_kbps <= 0:
            raise ValueError(f"segment {seg_index}: mean bitrate must be positive")
        mean_bits = mean_kbps * 1e3 * t_gop_seconds
        # Unit-mean lognormal multipliers model chunk-to-chunk VBR variation.
        mults = np.exp(rng.normal(-0.5 * sigma * sigma, sigma, size=n_chunks)) if sigma > 0 else np.ones(n_chunks)
        for c in range(n_chunks):
            ref = mean_bits * float(mults[c])
            sizes: list[int] = []
            prev = 0
            for m in range(1, n_modes + 1):
                raw = int(round(ref * ladder_ratio ** (n_modes - m)))
                raw = max(raw, prev + 1)
                sizes.append(raw)
                prev = raw
            quals = _quality_ladder(sizes, d_min, d_max)
            size_rows.append(tuple(sizes))
            quality_rows.append(quals)

    return QualityRateProfile(
        file_id=file_id,
        quality=tuple(quality_rows),
        size_bits=tuple(size_rows),
        d_min=d_min,
        d_max=d_max,
    )


def _quality_ladder(sizes: Sequence[int], d_min: float, d_max: float) -> tuple[float, ...]:
    n = len(sizes)
    if n == 1:
        return (d_max,)
    span = math.log(sizes[-1] / sizes[0])
    return tuple(d_min + (d_max - d_min) * math.log(s / sizes[0]) / span for s in sizes)


def export_catalog_csv(profile: QualityRateProfile, path: str) -> None:
    """Write a catalog as CSV rows (fileId, chunkIndex, mode, qualityD, sizeBits)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fileId", "chunkIndex", "mode", "qualityD", "sizeBits"])
        for i in range(profile.num_chunks):
            for m in range(1, profile.modes_per_chunk(i) + 1):
                writer.writerow([profile.file_id, i, m, repr(profile.quality[i][m - 1]), profile.size_bits[i][m - 1]])


def import_catalog_csv(path: str, d_min: float | None = None, d_max: float | None = None) -> QualityRateProfile:
    """Rebuild a catalog from its CSV export.

    Bounds default to the min/max quality present in the data; pass them
    explicitly for catalogs that do not attain their bounds.
    """
    rows: dict[int, dict[int, tuple[float, int]]] = {}
    file_id = "imported"
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"empty catalog file: {path}")
        for rec in reader:
            if not rec:
                continue
            file_id = rec[0]
            i, m = int(rec[1]), int(rec[2])
            rows.setdefault(i, {})[m] = (float(rec[3]), int(rec[4]))
    if not rows:
        raise ValueError(f"catalog file has no data rows: {path}")
    quality_rows, size_rows = [], []
    for i in range(len(rows)):
        if i not in rows:
            raise ValueError(f"catalog file missing chunk {i}")
        ladder = rows[i]
        quals, sizes = [], []
        for m in range(1, len(ladder) + 1):
            if m not in ladder:
                raise ValueError(f"catalog file missing mode {m} at chunk {i}")
            q, b = ladder[m]
            quals.append(q)
            sizes.append(b)
        quality_rows.append(tuple(quals))
        size_rows.append(tuple(sizes))
    all_q = [q for qs in quality_rows for q in qs]
    return QualityRateProfile(
        file_id=file_id,
        quality=tuple(quality_rows),
        size_bits=tuple(size_rows),
        d_min=min(all_q) if d_min is None else d_min,
        d_max=max(all_q) if d_max is None else d_max,
    )
