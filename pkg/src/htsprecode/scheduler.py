"""Traffic sources, user selection and frame service accounting.

The per-beam functions (``select_first_user``, ``select_group``,
``serve_frame``) define the behaviour; the ``*_batch`` variants apply the
same rules to every beam/layer slot of an epoch at once and are what the
simulator runs. Ties always go to the lowest user index.
"""
from dataclasses import dataclass

import numpy as np

from .framing import modcod_lookup
from .rng import substream

DEFAULT_GROUP_SIZE = 5
DEFAULT_DUTY_CYCLE = 0.5
DEFAULT_MEAN_ON_EPOCHS = 20.0


class TrafficSource:
    """Two-state on/off source per user with geometric sojourn times.

    While on, a user offers ``beam_load / (users_per_beam * duty)`` bit/s, so
    the long-run mean per beam equals ``beam_load``. Initial states are drawn
    from the stationary distribution.
    """

    def __init__(self, n_users, users_per_beam, beam_load_bps, duty_cycle, epoch_s, rng,
                 mean_on_epochs=DEFAULT_MEAN_ON_EPOCHS):
        if beam_load_bps < 0:
            raise ValueError("beam load must be >= 0")
        if not 0 < duty_cycle <= 1:
            raise ValueError("duty cycle must be in (0, 1]")
        if mean_on_epochs < 1:
            raise ValueError("mean_on_epochs must be >= 1")
        self.rng = rng
        self.duty = duty_cycle
        self.bits_on = beam_load_bps / (users_per_beam * duty_cycle) * epoch_s
        self.p_off = 1.0 / mean_on_epochs if duty_cycle < 1 else 0.0
        self.p_on = self.p_off * duty_cycle / (1 - duty_cycle) if duty_cycle < 1 else 1.0
        if self.p_on > 1:
            raise ValueError("mean_on_epochs too short for this duty cycle")
        self.on = rng.random(n_users) < duty_cycle

    def step(self):
        """Bits offered by each user in the next epoch; advances the chain."""
        out = np.where(self.on, self.bits_on, 0.0)
        u = self.rng.random(len(self.on))
        self.on = np.where(self.on, u >= self.p_off, u < self.p_on)
        return out


def generate_traffic(population, beam_load_bps, duty_cycle, epoch_s, seed, n_epochs,
                     mean_on_epochs=DEFAULT_MEAN_ON_EPOCHS):
    """Offered bits, shape (n_epochs, n_users)."""
    src = TrafficSource(population.n_users, population.per_beam_count, beam_load_bps, duty_cycle,
                        epoch_s, substream(seed, "scheduler.traffic"), mean_on_epochs)
    return np.stack([src.step() for _ in range(n_epochs)]) if n_epochs else np.zeros((0, population.n_users))


@dataclass
class TrafficQueue:
    backlog: np.ndarray
    offered: np.ndarray
    served: np.ndarray

    @classmethod
    def empty(cls, n_users):
        return cls(np.zeros(n_users), np.zeros(n_users), np.zeros(n_users))

    def offer(self, bits):
        self.backlog += bits
        self.offered += bits


@dataclass(frozen=True)
class FrameGroup:
    beam: int
    users: tuple   # seed user first

    @property
    def size(self):
        return len(self.users)


@dataclass(frozen=True)
class FrameService:
    served: dict          # user -> bits
    capacity_bits: float
    utilization: float

    @property
    def served_bits(self):
        return sum(self.served.values())


def select_first_user(backlogs, user_ids=None):
    """Largest backlog wins, lowest id on ties; None when every queue is empty."""
    q = np.asarray(backlogs, float)
    ids = np.arange(len(q)) if user_ids is None else np.asarray(user_ids)
    if len(q) == 0 or q.max() <= 0:
        return None
    best = q == q.max()
    return int(ids[best].min())


def random_policy_first_user(backlogs, rng, user_ids=None):
    """Uniform choice among users with a non-empty queue; None when idle."""
    q = np.asarray(backlogs, float)
    ids = np.arange(len(q)) if user_ids is None else np.asarray(user_ids)
    eligible = ids[q > 0]
    if len(eligible) == 0:
        return None
    return int(eligible[rng.integers(len(eligible))])


def similarity_profiles(csi_rows):
    """Unit-norm magnitude rows used as the grouping metric space."""
    mag = np.abs(np.atleast_2d(csi_rows))
    norm = np.linalg.norm(mag, axis=1, keepdims=True)
    return np.divide(mag, norm, out=np.zeros_like(mag), where=norm > 0)


def select_group(seed_user, candidates, csi, n=DEFAULT_GROUP_SIZE, beam=-1):
    """Seed plus the n-1 candidates with the closest CSI magnitude profile.

    ``csi`` maps user id -> CSI row (array indexed by user id).
    """
    cand = np.array(sorted(set(int(c) for c in candidates) - {int(seed_user)}), dtype=int)
    if len(cand) == 0 or n <= 1:
        return FrameGroup(beam, (int(seed_user),))
    prof = similarity_profiles(np.asarray(csi)[np.concatenate([[seed_user], cand])])
    d = np.linalg.norm(prof[1:] - prof[0], axis=1)
    order = cand[np.lexsort((cand, d))]
    return FrameGroup(beam, (int(seed_user),) + tuple(int(u) for u in order[:n - 1]))


def drain_in_order(backlogs, capacity_bits):
    """Bits taken from each queue, in order, until capacity runs out."""
    q = np.asarray(backlogs, float)
    before = np.concatenate([[0.0], np.cumsum(q)[:-1]])
    return np.clip(capacity_bits - before, 0, q)


def serve_frame(group, min_sinr_db, modcod_table, bundle_payload_symbols, queues):
    """Fill one bundled frame for ``group`` and drain ``queues`` (backlog array) in place."""
    eff = modcod_lookup(modcod_table, min_sinr_db)
    capacity = bundle_payload_symbols * eff
    users = list(group.users)
    taken = drain_in_order(queues[users], capacity)
    queues[users] -= taken
    util = float(taken.sum() / capacity) if capacity > 0 else 0.0
    return FrameService({u: float(t) for u, t in zip(users, taken)}, float(capacity), util)


# --- batched forms over scheduling slots (one slot = one beam on one layer) ---

def first_users_batch(Q, policy, rng=None):
    """Seed column per slot; -1 where the slot has nothing to send.

    Q: (S, J) backlogs with padding entries set to -inf or 0.
    """
    eligible = Q > 0
    idle = ~eligible.any(axis=1)
    if policy == "fair":
        seed = np.argmax(np.where(eligible, Q, -np.inf), axis=1)
    elif policy == "random":
        keys = np.where(eligible, rng.random(Q.shape), -1.0)
        seed = np.argmax(keys, axis=1)
    else:
        raise ValueError(f"unknown scheduler policy {policy!r}")
    return np.where(idle, -1, seed)


def group_batch(Q, profiles, seed, n):
    """(S, n) member columns, seed first, -1 padded; profiles: (S, J, B)."""
    S, J = Q.shape
    out = np.full((S, n), -1, dtype=int)
    active = seed >= 0
    out[active, 0] = seed[active]
    if n <= 1 or not active.any():
        return out
    rows = np.nonzero(active)[0]
    ref = profiles[rows, seed[rows]]
    d = np.linalg.norm(profiles[rows] - ref[:, None, :], axis=2)
    ok = Q[rows] > 0
    ok[np.arange(len(rows)), seed[rows]] = False
    d = np.where(ok, d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")[:, :n - 1]
    picked = np.take_along_axis(d, order, axis=1)
    out[rows, 1:] = np.where(np.isfinite(picked), order, -1)
    return out


def drain_batch(Qg, capacity):
    """Row-wise ``drain_in_order``; Qg: (S, n) backlogs (0 for padding)."""
    before = np.concatenate([np.zeros((Qg.shape[0], 1)), np.cumsum(Qg, axis=1)[:, :-1]], axis=1)
    return np.clip(capacity[:, None] - before, 0, Qg)
