import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from htsprecode.framing import (P2_PILOT, PAYLOAD, SF_PILOT, SOSF, SOSF_SYMBOLS, ModcodTable, SuperframeConfig,
                                beam_signature, build_superframe_layout, bundle_composition, correlate,
                                default_modcod_table, modcod_lookup, payload_scrambler, reference_scrambler,
                                walsh_hadamard, walsh_hadamard_matrix)


@pytest.mark.parametrize("bits,per_frame,frames", [(2, 32400, 2), (3, 21600, 3), (4, 16200, 4), (5, 12960, 5)])
def test_bundle_composition(bits, per_frame, frames):
    b = bundle_composition(bits, 64800, 64800)
    assert (b.symbols_per_frame, b.frames_per_bundle) == (per_frame, frames)
    assert b.frames_per_bundle * b.symbols_per_frame == b.bundle_payload_symbols


def test_bundle_short_codeword():
    b = bundle_composition(2, 16200, 64800)
    assert b.frames_per_bundle == 8


@pytest.mark.parametrize("args", [(7, 64800, 64800), (4, 64800, 64801), (0, 64800, 64800)])
def test_bundle_rejects_non_divisible(args):
    with pytest.raises(ValueError):
        bundle_composition(*args)


def test_wh_base_case():
    assert walsh_hadamard(1, 0).tolist() == [1]


@pytest.mark.parametrize("n", [2, 32, 256])
def test_wh_matches_sylvester_oracle(n):
    assert np.array_equal(walsh_hadamard_matrix(n), scipy.linalg.hadamard(n))


@pytest.mark.parametrize("n", [32, 256])
def test_wh_orthogonal(n):
    W = walsh_hadamard_matrix(n)
    assert np.array_equal(W @ W.T, n * np.eye(n, dtype=int))
    assert walsh_hadamard(n, 5) @ walsh_hadamard(n, 5) == n


def test_wh_errors():
    with pytest.raises(IndexError):
        walsh_hadamard(32, 32)
    with pytest.raises(IndexError):
        walsh_hadamard(32, -1)
    with pytest.raises(ValueError):
        walsh_hadamard(24, 0)


def test_scramblers_unimodular_and_restart():
    r = reference_scrambler(3, 500)
    assert np.allclose(np.abs(r), 1)
    assert np.array_equal(r, reference_scrambler(3, 500))
    p0, p1 = payload_scrambler(3, 0, 100), payload_scrambler(3, 1, 100)
    assert np.allclose(np.abs(p0), 1) and not np.allclose(p0, p1)


def test_signature_orthogonal_before_and_after_scrambling():
    a, b = walsh_hadamard(256, 3), walsh_hadamard(256, 77)
    assert a @ b == 0
    sa, sb = beam_signature(3, 0, 9), beam_signature(77, 0, 9)
    assert abs(correlate(sa.sosf, sb.sosf)) < 1e-9


def test_signature_same_indices_identical():
    a, b = beam_signature(10, 4, 1), beam_signature(10, 4, 1)
    assert np.array_equal(a.sosf, b.sosf) and np.array_equal(a.pilot, b.pilot)


def test_all_256_signatures_orthogonal():
    S = np.stack([beam_signature(i, i % 32, 5).sosf for i in range(256)])
    G = S.conj() @ S.T
    assert np.allclose(G, 256 * np.eye(256), atol=1e-9)
    P = np.stack([beam_signature(0, j, 5).pilot for j in range(32)])
    assert np.allclose(P.conj() @ P.T, 32 * np.eye(32), atol=1e-9)


def test_signature_pairs_distinct():
    seen = {beam_signature(i, j, 0).sosf.tobytes() + beam_signature(i, j, 0).pilot.tobytes()
            for i in (0, 1, 255) for j in (0, 1, 31)}
    assert len(seen) == 9


def _check_tiling(layout):
    pos = 0
    for f in layout.fields:
        assert f.offset == pos and f.length > 0
        pos += f.length
        if f.kind in (SOSF, SF_PILOT):
            assert not f.precoded and f.scrambler == "reference"
        else:
            assert f.precoded and f.scrambler == "payload"
    assert pos == layout.total_symbols


def test_minimal_layout():
    lay = build_superframe_layout(SuperframeConfig())
    assert [f.kind for f in lay.fields] == [SOSF, PAYLOAD]
    assert lay.fields[0].length == SOSF_SYMBOLS == 270
    _check_tiling(lay)


@pytest.mark.parametrize("period,bundles", [(1000, 1), (64800, 2), (7, 1), (50000, 3)])
def test_pilot_count(period, bundles):
    cfg = SuperframeConfig(n_bundles=bundles, bundle_symbols=64800, pilot_period=period, pilot_symbols=36)
    lay = build_superframe_layout(cfg)
    assert lay.count(SF_PILOT) == (bundles * 64800) // period
    _check_tiling(lay)


def test_p2_fields_precoded():
    lay = build_superframe_layout(SuperframeConfig(n_bundles=2, p2_symbols=36, pilot_period=20000))
    assert lay.count(P2_PILOT) == 2
    _check_tiling(lay)
    assert "SOSF" in lay.dump()


def test_total_mismatch_rejected():
    with pytest.raises(ValueError):
        build_superframe_layout(SuperframeConfig(total_symbols=1000))
    lay = build_superframe_layout(SuperframeConfig(total_symbols=270 + 64800))
    assert lay.total_symbols == 65070


def test_layout_bad_pilot_config():
    with pytest.raises(ValueError):
        build_superframe_layout(SuperframeConfig(pilot_period=100, pilot_symbols=0))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 4), b=st.integers(1, 5000), p=st.integers(0, 3000), p2=st.integers(0, 50),
       ps=st.integers(1, 40))
def test_layout_tiles(n, b, p, p2, ps):
    lay = build_superframe_layout(SuperframeConfig(n_bundles=n, bundle_symbols=b, pilot_period=p,
                                                   pilot_symbols=ps, p2_symbols=p2))
    _check_tiling(lay)
    if p:
        assert lay.count(SF_PILOT) == (n * (b + p2)) // p


def test_modcod_outage_and_boundary():
    t = default_modcod_table()
    assert modcod_lookup(t, -15.0) == 0.0
    for th, eff in t.rows[::7]:
        assert modcod_lookup(t, th) == eff
    assert modcod_lookup(t, -10.0) > 0


def test_modcod_zero_db():
    t = default_modcod_table()
    assert modcod_lookup(t, 0.0) == pytest.approx(0.8 * np.log2(2))


def test_modcod_generator_formula():
    t = default_modcod_table()
    snr = 10 ** (t.thresholds_db / 10)
    assert np.allclose(t.efficiencies, np.minimum(5.9, 0.8 * np.log2(1 + snr)))
    assert t.thresholds_db[0] == -10.0


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-40, 40), b=st.floats(-40, 40))
def test_modcod_monotone(a, b):
    t = default_modcod_table()
    lo, hi = sorted((a, b))
    assert modcod_lookup(t, lo) <= modcod_lookup(t, hi)


def test_modcod_vectorised():
    t = default_modcod_table()
    x = np.array([-20, 0, 30])
    assert np.allclose(modcod_lookup(t, x), [modcod_lookup(t, v) for v in x])


def test_modcod_table_validation():
    with pytest.raises(ValueError):
        ModcodTable(np.array([-10, -10.0]), np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        ModcodTable(np.array([-10, -5.0]), np.array([0.3, 0.2]))
    with pytest.raises(ValueError):
        ModcodTable(np.array([-9.0]), np.array([0.3]))


def test_modcod_csv_round_trip(tmp_path):
    t = default_modcod_table()
    t.write_csv(tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().startswith("snir_db,eff_bits_per_symbol")
    u = ModcodTable.from_csv(tmp_path / "m.csv")
    assert np.array_equal(t.thresholds_db, u.thresholds_db)
    assert np.array_equal(t.efficiencies, u.efficiencies)
