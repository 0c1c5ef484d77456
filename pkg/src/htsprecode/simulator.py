"""Scenario orchestration: pre-processing, the frame-level packet loop, reports.

A run has two stages. The pre-processor builds everything that stays fixed
for a configuration and seed (beams, users, channels, clusters, the static
part of the CSI). The packet loop then advances one bundled PLFRAME per
epoch: traffic arrives, every beam/layer slot picks a frame group, the
gateway precodes on impaired CSI (precoding mode), the ModCod follows the
weakest member of each group, and frames drain the queues.

Users of a beam are split round-robin over its polarization layers; each
layer is scheduled and precoded independently (no cross-polar coupling).
"""
import csv
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry
from .channel import AntennaPattern, build_channel_matrix
from .framing import modcod_lookup
from .impairments import apply_estimation_errors, draw_outdated_phase, estimation_mask
from .precoding import (align_rows, benchmark_sinr_linear, mmse_weights, normalize_power)
from .rng import substream
from .scheduler import (TrafficQueue, TrafficSource, drain_batch, first_users_batch,
                        group_batch, similarity_profiles)

log = logging.getLogger(__name__)


@dataclass
class Layer:
    """Static data for one polarization layer."""
    H: np.ndarray            # (U, B) true channel, SNR units
    est_mask: np.ndarray     # (U, B) coefficients the UT can estimate
    members: np.ndarray      # (B, J) user ids per beam slot, -1 padded
    profiles: np.ndarray     # (B, J, B) grouping profiles
    bench_sinr: np.ndarray   # (U,) unprecoded SINR with every co-channel beam on


@dataclass
class Preprocessed:
    config: object
    grid: object
    population: object
    clusters: object
    layers: list
    epoch_s: float
    modcod: object
    impairments: object


def preprocess(config):
    c = config
    grid = geometry.build_beam_grid(c.n_beams, c.radius_3db_km, c.colours, c.overlap_factor)
    pop = geometry.place_users(grid, c.users_per_beam, c.seed)
    clusters = geometry.cluster_beams(grid, c.gw_count)
    params = c.link_params()
    pattern = AntennaPattern(c.peak_gain_dbi, c.sidelobe_floor_db)
    stats = c.impairment_stats()

    U, B, L = pop.n_users, grid.n_beams, c.layers_per_beam
    idx_in_beam = np.arange(U) % c.users_per_beam
    J = -(-c.users_per_beam // L)
    layers = []
    for layer in range(L):
        ch = build_channel_matrix(grid, pop, params, c.seed, layer=layer, pattern=pattern,
                                  attenuation_db=c.attenuation_db or None,
                                  feed_spacing_m=c.feed_spacing_m)
        H = ch.entries
        mask = estimation_mask(H, pop.beam_of, stats.threshold_db)
        members = np.full((B, J), -1, dtype=int)
        for b in range(B):
            ids = np.nonzero((pop.beam_of == b) & (idx_in_beam % L == layer))[0]
            members[b, :len(ids)] = ids
        prof_u = similarity_profiles(np.where(mask, H, 0))
        profiles = np.where((members >= 0)[..., None], prof_u[np.maximum(members, 0)], 0.0)
        bench = benchmark_sinr_linear(H, np.ones(B), pop.beam_of, ch.noise_power)
        layers.append(Layer(H, mask, members, profiles, bench))
    return Preprocessed(c, grid, pop, clusters, layers, c.bundle_symbols / params.symbol_rate,
                        c.modcod(), stats)


@dataclass
class LoadPoint:
    load_gbps: float
    offered_gbps: float
    served_gbps: float
    upper_bound_gbps: float
    utilization: float
    outage: float
    epochs_run: int
    failed_epoch: int = None
    per_beam_served_gbps: list = field(default_factory=list)
    per_user_served_mbps: list = field(default_factory=list)
    per_user_offered_mbps: list = field(default_factory=list)

    FLAT = ("load_gbps", "served_gbps", "upper_bound_gbps", "utilization", "outage")

    def flat(self):
        return {k: getattr(self, k) for k in self.FLAT}


@dataclass
class CapacityReport:
    scenario: dict
    points: list

    def to_json(self):
        return json.dumps({"scenario": self.scenario, "points": [asdict(p) for p in self.points]},
                          indent=1, sort_keys=True)

    def to_csv(self):
        lines = [",".join(LoadPoint.FLAT)]
        for p in self.points:
            lines.append(",".join(fmt6(v) for v in p.flat().values()))
        return "\n".join(lines) + "\n"


def fmt6(x):
    """Fixed 6-significant-digit CSV formatting."""
    return f"{float(x):.6g}"


def read_csv_points(path):
    """Flat per-load rows written by ``CapacityReport.to_csv``."""
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows or set(rows[0]) != set(LoadPoint.FLAT):
        raise ValueError(f"{path}: expected columns {','.join(LoadPoint.FLAT)}")
    return [{k: float(r[k]) for k in LoadPoint.FLAT} for r in rows]


class _Accumulator:
    def __init__(self, n_users, n_beams):
        self.served = np.zeros(n_users)
        self.beam_served = np.zeros(n_beams)
        self.capacity = 0.0
        self.util = []
        self.frames = 0
        self.outages = 0


def cluster_precoder(H_hat, slot_beams, clusters, regularization_scale=1.0):
    """Block precoder (beams x groups): each gateway inverts only its own beams.

    H_hat: (A, B) averaged group rows, group a served by beam slot_beams[a].
    Noise is 1 and every beam has unit power, so alpha = K / M per cluster.
    """
    A, B = H_hat.shape
    W = np.zeros((B, A), complex)
    for _, beams in clusters.clusters:
        beams = np.asarray(beams)
        rows = np.nonzero(np.isin(slot_beams, beams))[0]
        if len(rows) == 0:
            continue
        alpha = regularization_scale * len(rows) / len(beams)
        Wc = normalize_power(mmse_weights(H_hat[rows][:, beams], alpha), 1.0).entries
        W[np.ix_(beams, rows)] = Wc
    return W


def _precode_layer(pre, layer, slot_beams, users, valid, rng_err, phases):
    """SINR of every group member under cluster-wise MMSE precoding.

    slot_beams: (A,) beam of each active slot; users: (A, n) member ids.
    Returns (A, n) linear SINR (nan for padding).
    """
    c = pre.config
    stats = pre.impairments
    B = pre.grid.n_beams
    safe = np.maximum(users, 0)
    R = layer.H[safe]                                        # (A, n, B) true rows
    A, n, _ = R.shape
    serving = np.broadcast_to(slot_beams[:, None], (A, n)).reshape(-1)

    if stats.is_ideal:
        csi = R.reshape(A * n, B).copy()
    else:
        csi = np.where(layer.est_mask[safe], R, 0).reshape(A * n, B)
        csi = apply_estimation_errors(csi, serving, stats, rng_err)
        csi = csi * np.exp(1j * phases)[None, :]
    vflat = valid.reshape(-1)
    csi[~vflat] = 0
    csi[vflat] = align_rows(csi[vflat], serving[vflat])
    csi = csi.reshape(A, n, B)
    w = valid[..., None]
    H_hat = (csi * w).sum(axis=1) / valid.sum(axis=1)[:, None]   # (A, B)

    W = cluster_precoder(H_hat, slot_beams, pre.clusters, c.regularization_scale)
    P = np.abs(R.reshape(A * n, B) @ W).reshape(A, n, A) ** 2
    sig = P[np.arange(A), :, np.arange(A)]                     # (A, n)
    sinr = sig / (P.sum(axis=2) - sig + 1.0)
    return np.where(valid, sinr, np.nan)


TRACE_COLUMNS = ("epoch", "layer", "beam", "users", "efficiency", "served_bits", "utilization")


def _simulate(pre, load_gbps, trace=None, on_epoch=None):
    c = pre.config
    U, B = pre.population.n_users, pre.grid.n_beams
    n = c.group_size
    queue = TrafficQueue.empty(U)
    traffic = TrafficSource(U, c.users_per_beam, load_gbps * 1e9, c.duty_cycle, pre.epoch_s,
                            substream(c.seed, "scheduler.traffic"), c.mean_on_epochs)
    rng_sched = substream(c.seed, "scheduler.random")
    rng_err = substream(c.seed, "impairments.errors")
    rng_phase = substream(c.seed, "impairments.outdated_phase")
    acc = _Accumulator(U, B)
    failed = None
    beams = np.arange(B)

    t = 0
    for t in range(c.epochs):
        queue.offer(traffic.step())
        try:
            for li, layer in enumerate(pre.layers):
                Q = np.where(layer.members >= 0, queue.backlog[np.maximum(layer.members, 0)], 0.0)
                seed = first_users_batch(Q, c.scheduler, rng_sched)
                cols = group_batch(Q, layer.profiles, seed, n)
                act = np.nonzero(seed >= 0)[0]
                if len(act) == 0:
                    continue
                cols = cols[act]
                valid = cols >= 0
                users = np.where(valid, layer.members[act[:, None], np.maximum(cols, 0)], -1)

                if c.is_precoding:
                    phases = draw_outdated_phase(B, pre.impairments.outdated_phase_std_deg, rng_phase)
                    sinr = _precode_layer(pre, layer, beams[act], users, valid, rng_err, phases)
                else:
                    sinr = np.where(valid, layer.bench_sinr[np.maximum(users, 0)], np.nan)
                if not np.all(np.isfinite(sinr[valid])):
                    raise FloatingPointError("non-finite SINR")
                with np.errstate(divide="ignore"):
                    min_db = 10 * np.log10(np.nanmin(sinr, axis=1))
                eff = modcod_lookup(pre.modcod, min_db)
                cap = c.bundle_symbols * np.atleast_1d(eff)

                Qg = np.where(valid, queue.backlog[np.maximum(users, 0)], 0.0)
                taken = drain_batch(Qg, cap)
                u_ok = users[valid]
                queue.backlog[u_ok] -= taken[valid]
                queue.served[u_ok] += taken[valid]
                np.maximum(queue.backlog, 0, out=queue.backlog)
                acc.beam_served[act] += taken.sum(axis=1)
                acc.capacity += cap.sum()
                acc.frames += len(act)
                acc.outages += int(np.sum(cap == 0))
                good = cap > 0
                acc.util.extend((taken.sum(axis=1)[good] / cap[good]).tolist())
                if trace is not None:
                    for k, b in enumerate(act):
                        u = users[k][valid[k]]
                        got = taken[k].sum()
                        trace.append((t, li, int(b), ";".join(map(str, u)), float(np.atleast_1d(eff)[k]),
                                      float(got), float(got / cap[k]) if cap[k] > 0 else 0.0))
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            log.warning("epoch %d failed: %s; emitting partial report", t, exc)
            failed = t
            break
        if on_epoch is not None:
            on_epoch(t, queue)

    epochs_run = failed if failed is not None else c.epochs
    sim_time = max(epochs_run, 1) * pre.epoch_s
    return LoadPoint(
        load_gbps=float(load_gbps),
        offered_gbps=float(queue.offered.sum() / sim_time / 1e9),
        served_gbps=float(queue.served.sum() / sim_time / 1e9),
        upper_bound_gbps=float(acc.capacity / sim_time / 1e9),
        utilization=float(np.mean(acc.util)) if acc.util else 0.0,
        outage=float(acc.outages / acc.frames) if acc.frames else 0.0,
        epochs_run=int(epochs_run),
        failed_epoch=failed,
        per_beam_served_gbps=(acc.beam_served / sim_time / 1e9).tolist(),
        per_user_served_mbps=(queue.served / sim_time / 1e6).tolist(),
        per_user_offered_mbps=(queue.offered / sim_time / 1e6).tolist(),
    )


def _scenario_summary(c):
    return {"mode": c.mode, "gw_count": c.gw_count, "impairments": c.impairments,
            "scheduler": c.scheduler, "seed": c.seed, "epochs": c.epochs,
            "users_per_beam": c.users_per_beam, "n_beams": c.n_beams, "config_digest": c.digest()}


def run_scenario(config, pre=None, trace=None):
    """Run every load in ``config.loads_gbps``; one pre-processing pass shared by all.

    ``trace``, if a list, collects one ``TRACE_COLUMNS`` tuple per frame (the
    load index is not recorded, so pass a single load when tracing).
    """
    pre = pre or preprocess(config)
    points = [_simulate(pre, load, trace) for load in config.loads_gbps]
    return CapacityReport(_scenario_summary(config), points)


def sweep_loads(config, loads, pre=None):
    """One single-load report per entry of ``loads``, sharing pre-processor outputs."""
    loads = list(loads)
    if not loads:
        raise ValueError("need at least one load")
    pre = pre or preprocess(config)
    out = []
    for load in loads:
        cfg = config.replace(loads_gbps=(load,))
        out.append(CapacityReport(_scenario_summary(cfg), [_simulate(pre, load)]))
    return out


@dataclass
class GainPoint:
    load_gbps: float
    served_gain: float
    upper_bound_gain: float
    unbounded: bool = False


def _ratio_gain(p, b):
    if b == 0:
        return (0.0, False) if p == 0 else (float("inf"), True)
    return p / b - 1.0, False


def compute_gain(precoding, benchmark):
    """Relative gain per load; accepts reports or lists of flat point dicts."""
    def flat(x):
        pts = x.points if isinstance(x, CapacityReport) else x
        return [p.flat() if isinstance(p, LoadPoint) else p for p in pts]

    P, Bm = flat(precoding), flat(benchmark)
    if [p["load_gbps"] for p in P] != [b["load_gbps"] for b in Bm]:
        raise ValueError("precoding and benchmark load grids differ")
    out = []
    for p, b in zip(P, Bm):
        sg, u1 = _ratio_gain(p["served_gbps"], b["served_gbps"])
        ug, u2 = _ratio_gain(p["upper_bound_gbps"], b["upper_bound_gbps"])
        out.append(GainPoint(p["load_gbps"], sg, ug, u1 or u2))
    return out
