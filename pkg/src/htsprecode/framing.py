"""Superframe layout arithmetic, Walsh-Hadamard signatures and the ModCod table.

Nothing here produces waveform samples: layouts are symbol-index maps and
signatures are short complex sequences used for orthogonality bookkeeping.
"""
import csv
from dataclasses import dataclass

import numpy as np

from .rng import substream

SOSF_SYMBOLS = 270
SOSF_WH_LENGTH = 256
PILOT_WH_LENGTH = 32

SOSF = "SOSF"
SF_PILOT = "SF-PILOT"
P2_PILOT = "P2-PILOT"
PAYLOAD = "PAYLOAD"


@dataclass(frozen=True)
class BundleSpec:
    modulation_order_bits: int
    codeword_bits: int
    symbols_per_frame: int
    frames_per_bundle: int
    bundle_payload_symbols: int


def bundle_composition(modulation_order_bits, codeword_bits, bundle_payload_symbols):
    """How many PLFRAMEs of a given modulation fill a fixed-length bundle."""
    if modulation_order_bits < 1 or codeword_bits < 1 or bundle_payload_symbols < 1:
        raise ValueError("all bundle parameters must be positive")
    if codeword_bits % modulation_order_bits:
        raise ValueError(f"{codeword_bits}-bit codeword does not map onto whole "
                         f"{modulation_order_bits}-bit symbols")
    per_frame = codeword_bits // modulation_order_bits
    if bundle_payload_symbols % per_frame:
        raise ValueError(f"bundle of {bundle_payload_symbols} symbols is not a whole number "
                         f"of {per_frame}-symbol frames")
    return BundleSpec(modulation_order_bits, codeword_bits, per_frame,
                      bundle_payload_symbols // per_frame, bundle_payload_symbols)


def walsh_hadamard(length, index):
    """Row ``index`` of the Sylvester-Hadamard matrix of order ``length`` (+-1 ints)."""
    if length < 1 or length & (length - 1):
        raise ValueError(f"length must be a power of two, got {length}")
    if not 0 <= index < length:
        raise IndexError(f"index {index} out of range for length {length}")
    j = np.arange(length)
    parity = np.array([bin(index & x).count("1") & 1 for x in j])
    return 1 - 2 * parity


def walsh_hadamard_matrix(length):
    return np.stack([walsh_hadamard(length, i) for i in range(length)])


def _unit_qpsk(rng, n):
    return np.exp(1j * np.pi / 4 * (2 * rng.integers(0, 4, n) + 1))


def reference_scrambler(seed, length):
    """Common reference scrambler; restarts (same draw) at every superframe."""
    return _unit_qpsk(substream(seed, "framing.reference_scrambler"), length)


def payload_scrambler(seed, beam, length):
    return _unit_qpsk(substream(seed, "framing.payload_scrambler", beam), length)


@dataclass(frozen=True)
class BeamSignature:
    sosf: np.ndarray    # 256 symbols over the SOSF
    pilot: np.ndarray   # 32 symbols over each SF-pilot field


def beam_signature(sosf_index, pilot_index, reference_scrambler_seed):
    """Beam-specific Walsh-Hadamard selection overlaid with the common scrambler."""
    scr = reference_scrambler(reference_scrambler_seed, SOSF_WH_LENGTH + PILOT_WH_LENGTH)
    sosf = walsh_hadamard(SOSF_WH_LENGTH, sosf_index) * scr[:SOSF_WH_LENGTH]
    pilot = walsh_hadamard(PILOT_WH_LENGTH, pilot_index) * scr[SOSF_WH_LENGTH:]
    return BeamSignature(sosf=sosf, pilot=pilot)


def correlate(a, b):
    """Zero-lag complex cross-correlation sum(a * conj(b))."""
    return complex(np.vdot(b, a))


@dataclass(frozen=True)
class LayoutField:
    kind: str
    offset: int
    length: int
    precoded: bool
    scrambler: str   # "reference" or "payload"


@dataclass(frozen=True)
class SuperframeLayout:
    total_symbols: int
    fields: tuple

    def count(self, kind):
        return sum(f.kind == kind for f in self.fields)

    def dump(self):
        rows = [f"{f.offset:>8} {f.length:>7} {f.kind:<9} "
                f"{'precoded' if f.precoded else 'plain':<9} {f.scrambler}" for f in self.fields]
        return "\n".join([f"superframe {self.total_symbols} symbols"] + rows)


@dataclass(frozen=True)
class SuperframeConfig:
    n_bundles: int = 1
    bundle_symbols: int = 64800
    pilot_period: int = 0       # precoded symbols between SF-pilots; 0 = no SF-pilots
    pilot_symbols: int = PILOT_WH_LENGTH
    p2_symbols: int = 0         # P2 pilot prefix per bundle; 0 = none
    total_symbols: int = None   # optional consistency check


def build_superframe_layout(config):
    """Tile SOSF, bundles (optional P2 prefix + payload) and periodic SF-pilots.

    An SF-pilot follows every ``pilot_period`` precoded symbols, so ``L``
    precoded symbols carry ``L // pilot_period`` SF-pilot fields.
    """
    c = config
    if c.n_bundles < 1 or c.bundle_symbols < 1:
        raise ValueError("need at least one non-empty bundle")
    if c.pilot_period < 0 or c.p2_symbols < 0 or c.pilot_symbols < 0:
        raise ValueError("pilot lengths and period must be non-negative")
    if c.pilot_period and not c.pilot_symbols:
        raise ValueError("pilot_period set but pilot_symbols is 0")

    segments = []
    for _ in range(c.n_bundles):
        if c.p2_symbols:
            segments.append((P2_PILOT, c.p2_symbols))
        segments.append((PAYLOAD, c.bundle_symbols))

    fields = [LayoutField(SOSF, 0, SOSF_SYMBOLS, False, "reference")]
    pos = SOSF_SYMBOLS
    since_pilot = 0

    def emit(kind, n):
        nonlocal pos
        last = fields[-1]
        if last.kind == kind and last.offset + last.length == pos:
            fields[-1] = LayoutField(kind, last.offset, last.length + n, last.precoded, last.scrambler)
        else:
            fields.append(LayoutField(kind, pos, n, True, "payload"))
        pos += n

    for kind, n in segments:
        while n:
            step = n if not c.pilot_period else min(n, c.pilot_period - since_pilot)
            emit(kind, step)
            n -= step
            since_pilot += step
            if c.pilot_period and since_pilot == c.pilot_period:
                fields.append(LayoutField(SF_PILOT, pos, c.pilot_symbols, False, "reference"))
                pos += c.pilot_symbols
                since_pilot = 0

    if c.total_symbols is not None and c.total_symbols != pos:
        raise ValueError(f"fields tile {pos} symbols, config asks for {c.total_symbols}")
    return SuperframeLayout(total_symbols=pos, fields=tuple(fields))


@dataclass(frozen=True)
class ModcodTable:
    thresholds_db: np.ndarray
    efficiencies: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds_db, float)
        e = np.asarray(self.efficiencies, float)
        if t.ndim != 1 or t.shape != e.shape or len(t) == 0:
            raise ValueError("thresholds and efficiencies must be equal-length 1-D")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(e) <= 0):
            raise ValueError("thresholds and efficiencies must be strictly increasing")
        if t[0] > -10:
            raise ValueError("lowest ModCod threshold must be at or below -10 dB")
        object.__setattr__(self, "thresholds_db", t)
        object.__setattr__(self, "efficiencies", e)

    @property
    def rows(self):
        return list(zip(self.thresholds_db.tolist(), self.efficiencies.tolist()))

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["snir_db", "eff_bits_per_symbol"])
            for t, e in self.rows:
                w.writerow([repr(t), repr(e)])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        if not rows or set(rows[0]) != {"snir_db", "eff_bits_per_symbol"}:
            raise ValueError(f"{path}: expected columns snir_db,eff_bits_per_symbol")
        return cls(np.array([float(r["snir_db"]) for r in rows]),
                   np.array([float(r["eff_bits_per_symbol"]) for r in rows]))


def default_modcod_table(lo_db=-10.0, hi_db=20.0, step_db=0.5, cap=5.9):
    """Synthetic gapped-Shannon table, 0.8*log2(1+snr) capped at ``cap``."""
    t = np.arange(lo_db, hi_db + step_db / 2, step_db)
    e = np.minimum(cap, 0.8 * np.log2(1 + 10 ** (t / 10)))
    keep = np.concatenate([[True], np.diff(e) > 0])
    return ModcodTable(t[keep], e[keep])


def modcod_lookup(table, snir_db):
    """Efficiency of the highest threshold <= snir_db; 0 below the table (outage)."""
    s = np.asarray(snir_db, float)
    idx = np.searchsorted(table.thresholds_db, s, side="right") - 1
    eff = np.where(idx >= 0, table.efficiencies[np.clip(idx, 0, None)], 0.0)
    return float(eff) if eff.ndim == 0 else eff
