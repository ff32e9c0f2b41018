import numpy as np
import pytest

from streamsched.video import (
    DEFAULT_SEGMENTS,
    QualityRateProfile,
    VideoSession,
    chunk_quality,
    chunk_size_bits,
    export_catalog_csv,
    import_catalog_csv,
    session_chunk,
    synth_catalog,
)


def tiny_profile():
    return QualityRateProfile(
        file_id="t",
        quality=((0.8, 0.95), (0.5, 0.7, 0.9)),
        size_bits=((100, 200), (50, 80, 130)),
        d_min=0.3,
        d_max=1.0,
    )


def test_chunk_quality_lookup():
    assert chunk_quality(tiny_profile(), 0, 2) == 0.95
    assert chunk_quality(tiny_profile(), 1, 1) == 0.5


def test_top_mode_is_max_quality():
    p = tiny_profile()
    for i in range(p.num_chunks):
        top = chunk_quality(p, i, p.modes_per_chunk(i))
        assert top == max(p.quality[i])


def test_chunk_size_lookup_and_monotonicity():
    p = tiny_profile()
    assert chunk_size_bits(p, 1, 2) == 80
    for i in range(p.num_chunks):
        sizes = [chunk_size_bits(p, i, m) for m in range(1, p.modes_per_chunk(i) + 1)]
        assert sizes[0] == min(sizes)
        assert all(a < b for a, b in zip(sizes, sizes[1:]))


@pytest.mark.parametrize("i,m", [(-1, 1), (2, 1), (0, 0), (0, 3), (1, 4)])
def test_lookup_range_errors(i, m):
    with pytest.raises(ValueError):
        chunk_quality(tiny_profile(), i, m)
    with pytest.raises(ValueError):
        chunk_size_bits(tiny_profile(), i, m)


def test_default_catalog_structure():
    p = synth_catalog(seed=0)
    assert p.num_chunks == 800
    for i in range(800):
        expected_modes = (8, 4, 4, 8)[i // 200]
        assert p.modes_per_chunk(i) == expected_modes


def test_default_catalog_mode_count_in_second_segment():
    p = synth_catalog(seed=1)
    for i in (200, 250, 399):
        assert len(set(p.quality[i])) == 4


def test_segment_mean_bitrates_hit_targets():
    # Top-mode chunk sizes must average to the segment target within 5%.
    p = synth_catalog(seed=0)
    targets = [kbps * 1e3 * 0.5 for (_, _, kbps) in DEFAULT_SEGMENTS]
    for seg in range(4):
        chunks = range(200 * seg, 200 * (seg + 1))
        mean_top = np.mean([p.size_bits[i][-1] for i in chunks])
        assert abs(mean_top - targets[seg]) <= 0.05 * targets[seg]


def test_catalog_determinism():
    assert synth_catalog(seed=42) == synth_catalog(seed=42)
    assert synth_catalog(seed=42) != synth_catalog(seed=43)


def test_catalog_invariants_fuzz():
    rng = np.random.default_rng(5)
    for _ in range(30):
        segments = [
            (int(rng.integers(1, 30)), int(rng.integers(1, 9)), float(rng.uniform(10, 8000)))
            for _ in range(int(rng.integers(1, 4)))
        ]
        p = synth_catalog(segments, seed=int(rng.integers(0, 2**31)), sigma=float(rng.uniform(0, 0.5)))
        for i in range(p.num_chunks):
            sizes, quals = p.size_bits[i], p.quality[i]
            assert all(a < b for a, b in zip(sizes, sizes[1:]))
            assert all(a <= b for a, b in zip(quals, quals[1:]))
            assert all(p.d_min <= q <= p.d_max for q in quals)


def test_one_mode_catalog():
    p = synth_catalog([(5, 1, 100.0)], seed=0)
    assert all(p.modes_per_chunk(i) == 1 for i in range(5))


def test_bad_generator_config():
    with pytest.raises(ValueError):
        synth_catalog([], seed=0)
    with pytest.raises(ValueError):
        synth_catalog([(10, 4, -5.0)], seed=0)


def test_session_chunk_wraparound():
    p = synth_catalog(seed=0)
    s = VideoSession(user_id=0, profile=p, start_chunk=799, session_length=1000)
    assert session_chunk(s, 1) == 0
    s0 = VideoSession(user_id=0, profile=p, start_chunk=0, session_length=10)
    assert session_chunk(s0, 0) == 0
    s100 = VideoSession(user_id=0, profile=p, start_chunk=100, session_length=1000)
    assert session_chunk(s100, 999) == 299


def test_session_chunk_range_error():
    p = synth_catalog([(4, 2, 100.0)], seed=0)
    s = VideoSession(user_id=0, profile=p, start_chunk=0, session_length=5)
    with pytest.raises(ValueError):
        session_chunk(s, 5)
    with pytest.raises(ValueError):
        session_chunk(s, -1)


def test_profile_invariant_validation():
    with pytest.raises(ValueError):
        QualityRateProfile("x", ((0.5, 0.4),), ((10, 20),), 0.3, 1.0)  # quality drops
    with pytest.raises(ValueError):
        QualityRateProfile("x", ((0.5, 0.6),), ((20, 20),), 0.3, 1.0)  # sizes not strict
    with pytest.raises(ValueError):
        QualityRateProfile("x", ((0.2,),), ((10,),), 0.3, 1.0)  # below d_min
    with pytest.raises(ValueError):
        QualityRateProfile("x", ((0.5,),), ((10,),), 1.0, 0.3)  # bounds inverted


def test_csv_roundtrip(tmp_path):
    p = synth_catalog([(6, 3, 500.0), (4, 2, 1500.0)], seed=9)
    path = tmp_path / "catalog.csv"
    export_catalog_csv(p, str(path))
    q = import_catalog_csv(str(path))
    assert q.size_bits == p.size_bits
    assert q.quality == p.quality
    assert q.d_min == p.d_min and q.d_max == p.d_max


def test_csv_import_rejects_gaps(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("fileId,chunkIndex,mode,qualityD,sizeBits\nf,0,1,0.5,100\nf,2,1,0.6,120\n")
    with pytest.raises(ValueError):
        import_catalog_csv(str(path))
