import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htsprecode.impairments import (IDEAL, REAL, ImpairmentStats, apply_estimation_errors,
                                    apply_estimation_threshold, apply_outdated_phase, draw_outdated_phase,
                                    estimation_mask, impair_rows)
from htsprecode.rng import substream


def row_db(*rel_db):
    return np.sqrt(10 ** (np.array(rel_db) / 10)) * np.exp(1j * np.arange(len(rel_db)))


def test_real_profile_values():
    assert REAL.threshold_db == -21.0
    assert REAL.outdated_phase_std_deg == 4.14
    assert REAL.main_amp == (0.0093, 0.0143)
    assert REAL.main_phase == (-0.0115, 0.0115)
    assert REAL.intf_amp == (0.0064, 0.0191)
    assert REAL.intf_phase == (0.0102, 0.0282)
    assert IDEAL.threshold_db == -np.inf and IDEAL.is_ideal and not REAL.is_ideal


def test_negative_std_rejected():
    with pytest.raises(ValueError):
        ImpairmentStats(main_amp=(0, -1))


def test_threshold_inf_unchanged():
    r = row_db(0, -30, -50)
    assert np.array_equal(apply_estimation_threshold(r, 0, -np.inf), r)


def test_threshold_zeroes_weak():
    out = apply_estimation_threshold(row_db(0, -30, -5), 0, -21)
    assert out[1] == 0 and out[2] != 0 and out[0] != 0


def test_threshold_boundary_kept():
    r = np.array([1.0, 10 ** (-21 / 20)])
    out = apply_estimation_threshold(r, 0, -21.0)
    assert out[1] == r[1]


def test_threshold_relative_to_serving_not_first_column():
    r = row_db(-30, 0, -25)
    out = apply_estimation_threshold(r, 1, -21)
    assert out[0] == 0 and out[2] == 0 and out[1] == r[1]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6), t1=st.floats(-60, 0), t2=st.floats(-60, 0))
def test_threshold_monotone(seed, t1, t2):
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(8) * 10 ** rng.uniform(-3, 0, 8) + 1j * rng.standard_normal(8) * 1e-3
    r[0] = 1.0
    lo, hi = sorted((t1, t2))
    assert np.all(estimation_mask(r, 0, lo) >= estimation_mask(r, 0, hi))


def test_errors_ideal_identity():
    r = row_db(0, -3, -10)
    out = apply_estimation_errors(r, 0, IDEAL, substream(0, "x"))
    assert np.array_equal(out, r)


def test_ideal_chain_bit_identity():
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((5, 6)) + 1j * rng.standard_normal((5, 6))
    out = impair_rows(rows, np.arange(5), IDEAL, substream(0, "x"))
    assert np.array_equal(out, rows) and out is not rows


def test_zeroed_stay_zero():
    r = apply_estimation_threshold(row_db(0, -30, -5), 0, -21)
    out = apply_estimation_errors(r, 0, REAL, substream(1, "x"))
    assert out[1] == 0


def _error_samples(n, serving, col, stats, seed=0):
    rows = np.ones((n, 2), complex)
    out = apply_estimation_errors(rows, np.full(n, serving), stats, substream(seed, "errors"))
    z = out[:, col]
    return np.abs(z) - 1, np.angle(z)


def within_3se(samples, mean, std):
    n = len(samples)
    se_mean = std / np.sqrt(n)
    se_std = std / np.sqrt(2 * (n - 1))
    return abs(samples.mean() - mean) <= 3 * se_mean and abs(samples.std(ddof=1) - std) <= 3 * se_std


def test_main_error_statistics():
    ea, ep = _error_samples(100_000, 0, 0, REAL)
    assert within_3se(ea, *REAL.main_amp)
    assert within_3se(ep, *REAL.main_phase)


def test_interference_error_statistics():
    ea, ep = _error_samples(100_000, 0, 1, REAL)
    assert within_3se(ea, *REAL.intf_amp)
    assert within_3se(ep, *REAL.intf_phase)


def test_errors_independent_across_coefficients():
    n = 100_000
    rows = np.ones((n, 3), complex)
    out = apply_estimation_errors(rows, np.zeros(n, int), REAL, substream(2, "e"))
    a, b = np.abs(out[:, 1]), np.abs(out[:, 2])
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(n)


def test_outdated_zero_unchanged():
    r = row_db(0, -3)
    assert np.array_equal(apply_outdated_phase(r, 0.0, substream(0, "p")), r)
    assert np.all(draw_outdated_phase(4, 0.0, None) == 0)


def test_outdated_phase_statistics():
    rng = substream(3, "impairments.outdated_phase")
    draws = np.concatenate([draw_outdated_phase(63, 4.14, rng) for _ in range(1600)])
    assert len(draws) >= 100_000
    assert within_3se(np.degrees(draws), 0.0, 4.14)


def test_outdated_common_per_beam_column():
    rows = np.ones((2, 5), complex) * np.array([[1], [2]])
    out = apply_outdated_phase(rows, 4.14, substream(0, "p"))
    rot = out / rows
    assert np.allclose(rot[0], rot[1])
    assert np.allclose(np.abs(rot), 1)


def test_outdated_negative_rejected():
    with pytest.raises(ValueError):
        draw_outdated_phase(3, -1.0, None)


def test_real_chain_deterministic():
    rows = np.tile(row_db(0, -3, -25, -8), (4, 1))
    a = impair_rows(rows, np.zeros(4, int), REAL, substream(5, "c"))
    b = impair_rows(rows, np.zeros(4, int), REAL, substream(5, "c"))
    assert np.array_equal(a, b)
    assert np.all(a[:, 2] == 0)
