"""Antenna pattern, link budget and the complex user x beam channel matrix.

Channel entries are expressed in SNR units: ``|h_kb|**2`` is the C/N user k
would see from beam b transmitting at its full per-beam power, with the
receiver noise normalised to 1. A precoder therefore works with a per-beam
power budget of 1.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .rng import substream

BOLTZMANN_DBW = 10 * np.log10(1.380649e-23)   # dBW/K/Hz
SPEED_OF_LIGHT = 299_792_458.0
GEO_SLANT_RANGE_KM = 38_000.0


def free_space_loss_db(frequency_ghz, distance_km):
    wavelength = SPEED_OF_LIGHT / (frequency_ghz * 1e9)
    return 20 * np.log10(4 * np.pi * distance_km * 1e3 / wavelength)


@dataclass(frozen=True)
class LinkParams:
    """Forward-link budget inputs for one carrier (beam / polarization)."""

    bandwidth_hz: float = 250e6
    sat_power_w: float = 100.0
    frequency_ghz: float = 20.0
    rolloff: float = 0.2
    obo_db: float = 2.0
    terminal_gt_dbk: float = 16.9
    peak_sat_gain_dbi: float = 52.0
    slant_range_km: float = GEO_SLANT_RANGE_KM
    path_loss_db: float = field(default=None)

    def __post_init__(self):
        if self.bandwidth_hz <= 0 or self.sat_power_w <= 0:
            raise ValueError("bandwidth and power must be positive")
        if not 0 <= self.rolloff < 1:
            raise ValueError("rolloff must be in [0, 1)")
        if self.path_loss_db is None:
            object.__setattr__(self, "path_loss_db", float(free_space_loss_db(self.frequency_ghz, self.slant_range_km)))

    @property
    def symbol_rate(self):
        return self.bandwidth_hz / (1 + self.rolloff)

    @property
    def tx_power_w(self):
        """RF power after output back-off."""
        return self.sat_power_w * 10 ** (-self.obo_db / 10)

    @property
    def wavelength_m(self):
        return SPEED_OF_LIGHT / (self.frequency_ghz * 1e9)


@dataclass(frozen=True)
class AntennaPattern:
    """Gaussian main lobe (-3 dB at the 3 dB radius) floored at a sidelobe level."""

    peak_gain_dbi: float = 52.0
    sidelobe_floor_db: float = 25.0   # floor sits this far below peak

    def gain_db(self, distance_km, radius_3db_km):
        rel = -3.0 * (np.asarray(distance_km, float) / radius_3db_km) ** 2
        return self.peak_gain_dbi + np.maximum(rel, -self.sidelobe_floor_db)


def antenna_gain_db(grid, beam, position, pattern=None):
    """Satellite antenna gain (dBi) of ``beam`` towards a ground point."""
    pattern = pattern or AntennaPattern()
    position = np.asarray(position, float)
    if not np.all(np.isfinite(position)):
        raise ValueError("position must be finite")
    d = np.linalg.norm(position - grid.centers[beam], axis=-1)
    return pattern.gain_db(d, grid.radius_3db_km)


def carrier_to_noise_db(params, gain_db):
    """C/N in dB for a satellite antenna gain ``gain_db`` towards the user.

    Noise is integrated over the symbol rate (matched-filter bandwidth).
    """
    p_dbw = 10 * np.log10(params.tx_power_w)
    return (p_dbw + np.asarray(gain_db, float) + params.terminal_gt_dbk - params.path_loss_db
            - BOLTZMANN_DBW - 10 * np.log10(params.symbol_rate))


@dataclass(frozen=True)
class ChannelMatrix:
    entries: np.ndarray     # (n_users, n_beams) complex, SNR units
    serving: np.ndarray     # (n_users,) serving beam per user
    layer: int = 0
    noise_power: float = 1.0

    @property
    def shape(self):
        return self.entries.shape

    def serving_coefficients(self):
        return self.entries[np.arange(len(self.serving)), self.serving]

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["user", "beam", "re", "im"])
            for k, b in zip(*np.nonzero(self.entries)):
                h = self.entries[k, b]
                w.writerow([k, b, f"{h.real:.6g}", f"{h.imag:.6g}"])


def build_channel_matrix(grid, population, params, seed, layer=0, pattern=None,
                         attenuation_db=None, feed_spacing_m=0.1):
    """Complex channel matrix for one colour / polarization layer.

    Phase = geometric feed-offset term (deterministic in the user position)
    plus one uniform LO phase per beam chain, drawn once per (seed, layer).
    Beams of a different colour than the user's serving beam are zeroed.
    """
    pattern = pattern or AntennaPattern(peak_gain_dbi=params.peak_sat_gain_dbi)
    pos = population.positions
    d = np.linalg.norm(pos[:, None, :] - grid.centers[None, :, :], axis=2)
    cn_db = carrier_to_noise_db(params, pattern.gain_db(d, grid.radius_3db_km))
    if attenuation_db is not None:
        cn_db = cn_db - np.broadcast_to(np.asarray(attenuation_db, float), (len(pos),))[:, None]
    amp = np.sqrt(10 ** (cn_db / 10))

    # far-field phase of a feed displaced proportionally to its beam centre
    feed_xy = feed_spacing_m * grid.centers / grid.spacing_km
    geo = -2 * np.pi * (pos * 1e3) @ feed_xy.T / (params.wavelength_m * params.slant_range_km * 1e3)
    lo = substream(seed, "channel.lo_phase", layer).uniform(0, 2 * np.pi, grid.n_beams)
    h = amp * np.exp(1j * (geo + lo[None, :]))

    mask = grid.colours[None, :] == grid.colours[population.beam_of][:, None]
    h = np.where(mask, h, 0)
    h.flags.writeable = False
    return ChannelMatrix(entries=h, serving=population.beam_of, layer=layer)
