"""Multicast MMSE precoding and SINR evaluation.

One precoding vector serves a whole frame group: the group's CSI rows are
phase-aligned on their serving coefficient, averaged, and the averaged rows
of all co-channel beams form the matrix that is regularised and inverted.
"""
from dataclasses import dataclass

import numpy as np


class SingularPrecoderError(np.linalg.LinAlgError):
    """Zero-forcing requested on a rank-deficient channel."""


@dataclass(frozen=True)
class PrecodingMatrix:
    entries: np.ndarray          # (n_beams, n_groups)
    power_per_beam: np.ndarray   # row squared norms, unit symbol power

    @property
    def max_beam_power(self):
        return float(self.power_per_beam.max())


def align_rows(rows, serving_col):
    """Rotate each row so its serving coefficient is real and non-negative."""
    rows = np.atleast_2d(np.asarray(rows, complex))
    serving_col = np.broadcast_to(np.asarray(serving_col), (rows.shape[0],))
    ref = rows[np.arange(rows.shape[0]), serving_col]
    if np.any(ref == 0):
        raise ValueError("serving coefficient must be non-zero to align phases")
    return rows * (np.conj(ref) / np.abs(ref))[:, None]


def average_group_channels(csi_rows, serving_col):
    """Phase-aligned element-wise mean of a frame group's CSI rows."""
    rows = np.asarray(csi_rows, complex)
    if rows.size == 0 or rows.ndim == 2 and rows.shape[0] == 0:
        raise ValueError("cannot average an empty frame group")
    return align_rows(rows, serving_col).mean(axis=0)


def normalize_power(W, per_beam_limit):
    """Scale W by one scalar so the most loaded beam sits exactly at its limit."""
    W = np.asarray(W, complex)
    if not np.all(np.isfinite(W)):
        raise ValueError("precoder has non-finite entries")
    row_power = np.sum(np.abs(W) ** 2, axis=1)
    peak = row_power.max(initial=0.0)
    if peak == 0:
        raise ValueError("all-zero precoder cannot be normalised")
    s = np.sqrt(per_beam_limit / peak)
    return PrecodingMatrix(entries=W * s, power_per_beam=row_power * s * s)


def mmse_weights(H, alpha):
    """Unnormalised W = H^H (H H^H + alpha I)^-1 for H of shape (groups, beams)."""
    H = np.atleast_2d(np.asarray(H, complex))
    k = H.shape[0]
    A = H @ H.conj().T + alpha * np.eye(k)
    if alpha == 0:
        if np.linalg.matrix_rank(A) < k or np.linalg.cond(A) > 1e13:
            raise SingularPrecoderError("H H^H is singular; zero-forcing undefined")
    try:
        X = np.linalg.solve(A, H)   # A^-1 H; A is Hermitian so W = X^H
    except np.linalg.LinAlgError as exc:
        raise SingularPrecoderError(str(exc)) from exc
    return X.conj().T


def mmse_precoder(group_channels, noise_power, total_power, per_beam_limit=None):
    """Regularised channel inversion with loading alpha = K * noise / total_power.

    ``group_channels`` has one averaged row per served group (K rows) over
    the M co-channel beams. The result is power-normalised so no beam
    exceeds ``per_beam_limit`` (default: total_power / M).
    """
    H = np.atleast_2d(np.asarray(group_channels, complex))
    k, m = H.shape
    if noise_power < 0 or total_power <= 0:
        raise ValueError("noise_power must be >= 0 and total_power > 0")
    alpha = k * noise_power / total_power
    if per_beam_limit is None:
        per_beam_limit = total_power / m
    return normalize_power(mmse_weights(H, alpha), per_beam_limit)


def sinr_linear(rows, W, serving, noise_power=1.0, external_interference_power=0.0):
    """Per-row SINR for precoded reception.

    rows: (n, M) true channels; W: (M, K) precoder; serving: (n,) column of W
    carrying each row's stream. External interference adds to the noise.
    """
    rows = np.atleast_2d(np.asarray(rows, complex))
    W = np.asarray(W.entries if isinstance(W, PrecodingMatrix) else W, complex)
    serving = np.broadcast_to(np.asarray(serving), (rows.shape[0],))
    p = np.abs(rows @ W) ** 2
    sig = p[np.arange(rows.shape[0]), serving]
    intf = p.sum(axis=1) - sig
    return sig / (intf + external_interference_power + noise_power)


def sinr_db(true_channel_row, W, serving_group_index, noise_power=1.0, external_interference_power=0.0):
    s = sinr_linear(true_channel_row, W, serving_group_index, noise_power, external_interference_power)
    out = 10 * np.log10(s)
    return float(out[0]) if np.ndim(true_channel_row) == 1 else out


def benchmark_sinr_linear(rows, beam_powers, serving_beam, noise_power=1.0):
    """Unprecoded SINR: serving beam over all other transmitting co-channel beams."""
    rows = np.atleast_2d(np.asarray(rows, complex))
    serving_beam = np.broadcast_to(np.asarray(serving_beam), (rows.shape[0],))
    p = np.abs(rows) ** 2 * np.asarray(beam_powers, float)
    sig = p[np.arange(rows.shape[0]), serving_beam]
    return sig / (p.sum(axis=1) - sig + noise_power)


def benchmark_sinr_db(true_channel_row, co_colour_beam_powers, serving_beam, noise_power=1.0):
    s = benchmark_sinr_linear(true_channel_row, co_colour_beam_powers, serving_beam, noise_power)
    out = 10 * np.log10(s)
    return float(out[0]) if np.ndim(true_channel_row) == 1 else out
