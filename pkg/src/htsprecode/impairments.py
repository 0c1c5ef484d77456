"""Turns true channel rows into the CSI a gateway actually holds.

Three effects, applied in order: coefficients too weak relative to the
carrier are not estimated at all; surviving coefficients carry relative
amplitude and phase errors (main and interference statistics differ); and
each beam chain's phase drifts between estimation and use.

Phase error means/stds of the main and interference terms are in radians;
the outdated-phase std is in degrees.
"""
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ImpairmentStats:
    threshold_db: float = -np.inf
    outdated_phase_std_deg: float = 0.0
    main_amp: tuple = (0.0, 0.0)       # (mean, std), relative
    main_phase: tuple = (0.0, 0.0)     # (mean, std), rad
    intf_amp: tuple = (0.0, 0.0)
    intf_phase: tuple = (0.0, 0.0)

    def __post_init__(self):
        stds = (self.outdated_phase_std_deg, self.main_amp[1], self.main_phase[1],
                self.intf_amp[1], self.intf_phase[1])
        if min(stds) < 0:
            raise ValueError("standard deviations must be non-negative")

    @property
    def is_ideal(self):
        return self == IDEAL

    def with_(self, **kw):
        return replace(self, **kw)


IDEAL = ImpairmentStats()
REAL = ImpairmentStats(
    threshold_db=-21.0,
    outdated_phase_std_deg=4.14,
    main_amp=(0.0093, 0.0143),
    main_phase=(-0.0115, 0.0115),
    intf_amp=(0.0064, 0.0191),
    intf_phase=(0.0102, 0.0282),
)
PROFILES = {"ideal": IDEAL, "real": REAL}


def estimation_mask(rows, serving_col, threshold_db):
    """True where a coefficient is within ``|threshold_db|`` of the serving power."""
    rows = np.atleast_2d(rows)
    serving_col = np.broadcast_to(np.asarray(serving_col), (rows.shape[0],))
    p = np.abs(rows) ** 2
    if threshold_db == -np.inf:
        return np.ones(rows.shape, bool)
    ref = p[np.arange(rows.shape[0]), serving_col][:, None]
    with np.errstate(divide="ignore"):
        rel = 10 * np.log10(p / ref)
    return rel >= threshold_db - 1e-12


def apply_estimation_threshold(true_row, serving_col, threshold_db):
    """Zero coefficients more than ``|threshold_db|`` below the serving one (boundary kept)."""
    row = np.asarray(true_row)
    if threshold_db == -np.inf:
        return row.copy()
    out = np.where(estimation_mask(row, serving_col, threshold_db), np.atleast_2d(row), 0)
    return out[0] if row.ndim == 1 else out


def apply_estimation_errors(masked_rows, serving_col, stats, rng):
    """Multiply each surviving coefficient by (1 + e_a) exp(j e_p)."""
    rows = np.asarray(masked_rows, complex)
    if stats.main_amp == (0, 0) and stats.main_phase == (0, 0) \
            and stats.intf_amp == (0, 0) and stats.intf_phase == (0, 0):
        return rows.copy()
    r2 = np.atleast_2d(rows)
    serving_col = np.broadcast_to(np.asarray(serving_col), (r2.shape[0],))
    main = np.zeros(r2.shape, bool)
    main[np.arange(r2.shape[0]), serving_col] = True
    # zeroed coefficients stay zero, so draw only for the surviving ones
    k, b = np.nonzero(r2)
    is_main = main[k, b]
    z = rng.standard_normal((2, len(k)))
    ea = np.where(is_main, stats.main_amp[0] + stats.main_amp[1] * z[0],
                  stats.intf_amp[0] + stats.intf_amp[1] * z[0])
    ep = np.where(is_main, stats.main_phase[0] + stats.main_phase[1] * z[1],
                  stats.intf_phase[0] + stats.intf_phase[1] * z[1])
    out = r2.copy()
    out[k, b] = r2[k, b] * (1 + ea) * np.exp(1j * ep)
    return out[0] if rows.ndim == 1 else out


def draw_outdated_phase(n_beams, std_deg, rng):
    """One Gaussian phase offset (rad) per beam chain for one CSI refresh."""
    if std_deg < 0:
        raise ValueError("std_deg must be non-negative")
    if std_deg == 0:
        return np.zeros(n_beams)
    return np.deg2rad(std_deg) * rng.standard_normal(n_beams)


def apply_outdated_phase(csi_rows, std_deg, rng, phases=None):
    """Rotate column b of every row by the same beam-chain phase drift."""
    rows = np.asarray(csi_rows, complex)
    if std_deg == 0 and phases is None:
        return rows.copy()
    if phases is None:
        phases = draw_outdated_phase(rows.shape[-1], std_deg, rng)
    return rows * np.exp(1j * phases)


def impair_rows(true_rows, serving_col, stats, rng, beam_phases=None):
    """Full chain for a block of rows sharing one CSI refresh."""
    if stats.is_ideal:
        return np.array(true_rows, complex, copy=True)
    rows = apply_estimation_threshold(true_rows, serving_col, stats.threshold_db)
    rows = apply_estimation_errors(rows, serving_col, stats, rng)
    return apply_outdated_phase(rows, stats.outdated_phase_std_deg, rng, phases=beam_phases)
