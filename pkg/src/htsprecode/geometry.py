"""Beam lattice, colouring, user placement and gateway clustering.

Geometry is planar: beam centres and users live on a flat km grid around
the sub-satellite region. Beams sit on a hexagonal lattice laid out as
7-beam "flowers" (one centre beam plus its ring), so that gateway clusters
of seven tile the coverage without leftovers.
"""
import csv
from dataclasses import dataclass

import numpy as np

from .rng import substream

DEFAULT_OVERLAP_FACTOR = 0.97

# unit hex offsets of a flower ring, counter-clockwise from +x
_RING_IJ = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BeamGrid:
    centers: np.ndarray          # (n_beams, 2) km
    lattice_ij: np.ndarray       # (n_beams, 2) integer lattice coordinates
    colours: np.ndarray          # (n_beams,)
    spacing_km: float
    radius_3db_km: float
    num_colours: int

    @property
    def n_beams(self):
        return len(self.centers)

    @property
    def beams(self):
        return [(b, tuple(self.centers[b])) for b in range(self.n_beams)]

    def colour_of(self, beam):
        return int(self.colours[beam])

    def adjacency(self):
        """Boolean (n, n) matrix of beams at minimal lattice spacing."""
        d = np.linalg.norm(self.centers[:, None, :] - self.centers[None, :, :], axis=2)
        adj = np.abs(d - self.spacing_km) < 1e-6 * self.spacing_km
        np.fill_diagonal(adj, False)
        return adj

    def nearest_beam(self, points):
        points = np.atleast_2d(points)
        d = np.linalg.norm(points[:, None, :] - self.centers[None, :, :], axis=2)
        return np.argmin(d, axis=1)


@dataclass(frozen=True)
class UserPopulation:
    beam_of: np.ndarray      # (n_users,)
    positions: np.ndarray    # (n_users, 2) km
    per_beam_count: int

    @property
    def n_users(self):
        return len(self.beam_of)

    @property
    def users(self):
        return [(u, int(self.beam_of[u]), tuple(self.positions[u])) for u in range(self.n_users)]

    def density_per_km2(self, radius_3db_km):
        return self.per_beam_count / (np.pi * radius_3db_km ** 2)


@dataclass(frozen=True)
class GwAssignment:
    clusters: tuple   # ((gw_id, (beam ids...)), ...)

    @property
    def n_gws(self):
        return len(self.clusters)

    def cluster_of(self, n_beams):
        lab = np.full(n_beams, -1, dtype=int)
        for gw, beams in self.clusters:
            lab[list(beams)] = gw
        return lab


def _colour(ij, num_colours):
    i, j = ij[:, 0], ij[:, 1]
    if num_colours == 1:
        return np.zeros(len(ij), dtype=int)
    if num_colours == 2:
        return np.mod(i, 2)
    # 2 frequencies x 2 polarizations; lattice neighbours differ by
    # (1,0), (0,1) or (1,-1), all non-zero mod 2
    return np.mod(i, 2) + 2 * np.mod(j, 2)


def build_beam_grid(n_beams, radius_3db_km, num_colours, overlap_factor=DEFAULT_OVERLAP_FACTOR):
    """Hexagonal beam lattice with nearest-neighbour spacing ``2 r overlap_factor``.

    Beams are emitted flower by flower (centre first, then its ring), flowers
    ordered by distance of their centre from the origin, ties by angle.
    """
    if num_colours not in (1, 2, 4):
        raise ValueError(f"num_colours must be 1, 2 or 4, got {num_colours}")
    if n_beams < 1:
        raise ValueError("n_beams must be >= 1")
    if radius_3db_km <= 0 or overlap_factor <= 0:
        raise ValueError("radius_3db_km and overlap_factor must be positive")

    spacing = 2.0 * radius_3db_km * overlap_factor
    a1 = np.array([1.0, 0.0])
    a2 = np.array([0.5, np.sqrt(3) / 2])
    n_flowers = -(-n_beams // 7)
    reach = int(np.ceil(np.sqrt(n_flowers))) + 2
    flowers = []
    for p in range(-reach, reach + 1):
        for q in range(-reach, reach + 1):
            # reuse-7 superlattice: 2*a1 + a2 and -a1 + 3*a2
            ij = (2 * p - q, p + 3 * q)
            xy = ij[0] * a1 + ij[1] * a2
            ang = np.arctan2(xy[1], xy[0]) % (2 * np.pi)
            flowers.append((round(float(np.hypot(*xy)), 9), round(float(ang), 9), ij))
    flowers.sort()

    ij_list = []
    for _, _, (ci, cj) in flowers[:n_flowers]:
        ij_list.append((ci, cj))
        ij_list.extend((ci + di, cj + dj) for di, dj in _RING_IJ)
    ij = np.array(ij_list[:n_beams], dtype=int)
    centers = spacing * (ij[:, :1] * a1 + ij[:, 1:] * a2)
    return BeamGrid(
        centers=_frozen(centers, float),
        lattice_ij=_frozen(ij, int),
        colours=_frozen(_colour(ij, num_colours), int),
        spacing_km=float(spacing),
        radius_3db_km=float(radius_3db_km),
        num_colours=int(num_colours),
    )


def place_users(grid, per_beam, seed):
    """Uniform users per beam, inside the 3 dB disc and the beam's own cell.

    A candidate drawn uniformly in the disc is kept only if its nearest beam
    centre is the serving one, so the serving beam is always the strongest.
    """
    if per_beam < 1:
        raise ValueError("per_beam must be >= 1")
    rng = substream(seed, "geometry.users")
    r = grid.radius_3db_km
    beam_of = np.repeat(np.arange(grid.n_beams), per_beam)
    positions = np.empty((grid.n_beams * per_beam, 2))
    for b in range(grid.n_beams):
        got = []
        need = per_beam
        while need > 0:
            cand = rng.uniform(-r, r, size=(2 * need + 8, 2))
            cand = cand[np.einsum("ij,ij->i", cand, cand) <= r * r] + grid.centers[b]
            cand = cand[grid.nearest_beam(cand) == b][:need]
            got.append(cand)
            need -= len(cand)
        positions[b * per_beam:(b + 1) * per_beam] = np.concatenate(got)
    return UserPopulation(
        beam_of=_frozen(beam_of, int),
        positions=_frozen(positions, float),
        per_beam_count=int(per_beam),
    )


def _argmin_stable(values, ids):
    return int(ids[np.lexsort((ids, np.round(values, 9)))[0]])


def _seed_beams(centers, n_gws):
    n = len(centers)
    ids = np.arange(n)
    seeds = [_argmin_stable(np.linalg.norm(centers - centers.mean(0), axis=1), ids)]
    while len(seeds) < n_gws:
        md = np.min(np.linalg.norm(centers[:, None] - centers[seeds][None], axis=2), axis=1)
        seeds.append(_argmin_stable(-md, ids))
    # Lloyd iterations on the beam centres
    cent = centers[seeds].astype(float)
    for _ in range(100):
        d = np.round(np.linalg.norm(centers[:, None] - cent[None], axis=2), 9)
        lab = np.argmin(d, axis=1)
        new = np.array([centers[lab == c].mean(0) if np.any(lab == c) else cent[c] for c in range(n_gws)])
        if np.allclose(new, cent):
            break
        cent = new
    return [_argmin_stable(np.linalg.norm(centers - c, axis=1), ids) for c in cent]


def cluster_beams(grid, n_gws):
    """Partition beams into ``n_gws`` contiguous, equal-size gateway clusters.

    Seeds come from Lloyd iterations on the beam centres; clusters then grow
    round-robin, each claiming the adjacent unassigned beam nearest its seed
    (lowest id on ties). Raises ValueError when no contiguous tiling results.
    """
    n = grid.n_beams
    if n_gws < 1 or n % n_gws:
        raise ValueError(f"{n_gws} gateways cannot split {n} beams into equal clusters")
    if n_gws == 1:
        return GwAssignment(((0, tuple(range(n))),))
    if n_gws == n:
        return GwAssignment(tuple((b, (b,)) for b in range(n)))

    k = n // n_gws
    seeds = _seed_beams(grid.centers, n_gws)
    if len(set(seeds)) != n_gws:
        raise ValueError(f"cannot tile {n} beams into {n_gws} contiguous clusters")
    adj = grid.adjacency()
    lab = np.full(n, -1)
    lab[seeds] = np.arange(n_gws)
    sizes = [1] * n_gws
    ids = np.arange(n)
    while np.any(lab < 0):
        moved = False
        for c, s in enumerate(seeds):
            if sizes[c] >= k:
                continue
            front = ids[(lab < 0) & adj[lab == c].any(axis=0)]
            if len(front) == 0:
                continue
            b = _argmin_stable(np.linalg.norm(grid.centers[front] - grid.centers[s], axis=1), front)
            lab[b] = c
            sizes[c] += 1
            moved = True
        if not moved:
            raise ValueError(f"cannot tile {n} beams into {n_gws} contiguous clusters")
    return GwAssignment(tuple((c, tuple(int(b) for b in ids[lab == c])) for c in range(n_gws)))


def write_grid_csv(grid, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["beam_id", "x_km", "y_km", "colour"])
        for b in range(grid.n_beams):
            w.writerow([b, f"{grid.centers[b, 0]:.6g}", f"{grid.centers[b, 1]:.6g}", int(grid.colours[b])])


def write_population_csv(population, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["user_id", "beam_id", "x_km", "y_km"])
        for u in range(population.n_users):
            x, y = population.positions[u]
            w.writerow([u, int(population.beam_of[u]), f"{x:.6g}", f"{y:.6g}"])
