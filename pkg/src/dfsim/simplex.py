"""Probability-simplex geometry.

Probability vectors, total-variation distance, and edgewise
(Kuhn/Freudenthal) subdivisions of the simplex with barycentric
coordinate lookup.  The order-k subdivision of the (M-1)-simplex has
C(k+M-1, M-1) vertices on the lattice {0, 1/k, ..., 1} and k^(M-1)
cells of M affinely independent vertices each; every cell has
TV-diameter at most (M-1)/k.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NegativeMass,
    NumericalFailure,
    SizeOverflow,
    ZeroMass,
)

#: entries below -CLAMP_TOL are rejected; entries in [-CLAMP_TOL, 0) are clamped
CLAMP_TOL = 1e-9

DEFAULT_MAX_VERTICES = 4_000_000
MAX_DIM = 8


def max_vertices():
    """Triangulation size cap; override with env var DF_MAX_VERTICES."""
    raw = os.environ.get("DF_MAX_VERTICES")
    if raw:
        return int(raw)
    return DEFAULT_MAX_VERTICES


def make_prob_vector(raw) -> np.ndarray:
    """Build a point of the probability simplex from raw weights.

    Weights in [-1e-9, 0) are clamped to 0 and the vector is
    renormalized to sum exactly to 1 (within float rounding).

    Raises NegativeMass / ZeroMass on irrecoverable input.
    """
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise DimensionMismatch(f"expected a 1-d vector with >= 2 entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NegativeMass("non-finite probability weight")
    if np.any(arr < -CLAMP_TOL):
        raise NegativeMass(f"weight {arr.min():g} below -{CLAMP_TOL:g}")
    arr = np.clip(arr, 0.0, None)
    total = arr.sum()
    if total <= 0.0:
        raise ZeroMass("weights sum to zero")
    out = arr / total
    out.flags.writeable = False
    return out


def tv_distance(p, q) -> float:
    """Total variation distance: half the L1 distance."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"{p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


def euclidean_distance(p, q) -> float:
    """Euclidean distance on the simplex (reporting only; TV is canonical)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"{p.shape} vs {q.shape}")
    return float(np.sqrt(((p - q) ** 2).sum()))


# ---------------------------------------------------------------------------
# Kuhn/Freudenthal edgewise subdivision
#
# The simplex {p >= 0, sum p = 1} maps affinely onto the staircase region
# K = {k >= z_0 >= z_1 >= ... >= z_{d-1} >= 0} (d = M-1) via the suffix
# sums z_t = k * sum_{j > t} p_j.  Cells are the Kuhn simplices of the
# integer cubes of K: a corner c (nonincreasing, entries in 0..k-1) plus a
# coordinate-addition order pi, subject to: within each maximal block of
# equal corner entries, coordinates are added in increasing index order.
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _perms_by_pattern(d):
    """Map equality-pattern bitmasks to the valid addition orders.

    Bit a of the pattern is set when c_a == c_{a+1}; a valid order must
    then place coordinate a before coordinate a+1.
    """
    table = {}
    for pattern in range(1 << max(d - 1, 0)):
        perms = []
        for pi in itertools.permutations(range(d)):
            pos = {coord: i for i, coord in enumerate(pi)}
            if all(not (pattern >> a) & 1 or pos[a] < pos[a + 1] for a in range(d - 1)):
                perms.append(pi)
        table[pattern] = perms
    return table


def _nonincreasing_tuples(d, top):
    """All nonincreasing integer d-tuples with entries in 0..top, as an array."""
    if d == 1:
        return np.arange(top + 1, dtype=np.int64)[:, None]
    if d == 2:
        lo, hi = np.triu_indices(top + 1)
        return np.stack([hi, lo], axis=1).astype(np.int64)
    if d == 3:
        rng = np.arange(top + 1, dtype=np.int64)
        g = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
        mask = (g[:, 0] >= g[:, 1]) & (g[:, 1] >= g[:, 2])
        return g[mask]
    rows = [t[::-1] for t in itertools.combinations_with_replacement(range(top + 1), d)]
    return np.array(rows, dtype=np.int64)


def _z_keys(zs, base):
    """Encode z-tuples as int64 keys (most significant coordinate first)."""
    d = zs.shape[1]
    if base ** d > 2 ** 62:
        raise SizeOverflow(f"key space overflow for base={base}, d={d}")
    weights = base ** np.arange(d - 1, -1, -1, dtype=np.int64)
    return zs @ weights


def _z_to_points(zs, k, M):
    """Map z-coordinates back to probability vectors."""
    n = zs.shape[0]
    pts = np.empty((n, M), dtype=float)
    pts[:, 0] = (k - zs[:, 0]) / k
    for t in range(1, M - 1):
        pts[:, t] = (zs[:, t - 1] - zs[:, t]) / k
    pts[:, M - 1] = zs[:, M - 2] / k
    return pts


@dataclass
class Triangulation:
    """Order-k edgewise subdivision of the (M-1)-probability-simplex."""

    order: int
    dim: int
    vertices: np.ndarray          # (V, M) points, rows sum to 1
    cells: np.ndarray             # (C, M) vertex indices, path order v_0..v_{M-1}
    _vertex_keys: np.ndarray      # (V,) sorted int64 z-keys, aligned with vertices
    _cell_corner_keys: np.ndarray  # (C,) int64 corner keys, nondecreasing
    _csr: tuple = field(default=None, repr=False, compare=False)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    def _adjacency(self):
        """CSR map vertex index -> indices of incident cells."""
        if self._csr is None:
            flat = self.cells.ravel()
            order = np.argsort(flat, kind="stable")
            cell_ids = order // self.dim
            counts = np.bincount(flat, minlength=self.num_vertices)
            offsets = np.concatenate([[0], np.cumsum(counts)])
            self._csr = (offsets, cell_ids)
        return self._csr

    def cells_of_vertex(self, v):
        offsets, cell_ids = self._adjacency()
        return cell_ids[offsets[v]:offsets[v + 1]]


def edgewise_subdivision(M, k) -> Triangulation:
    """Order-k Kuhn/Freudenthal subdivision of the (M-1)-simplex.

    Raises SizeOverflow when the vertex count C(k+M-1, M-1) exceeds the
    configured cap (env var DF_MAX_VERTICES).
    """
    if M < 2:
        raise DimensionMismatch(f"M must be >= 2, got {M}")
    if M > MAX_DIM:
        raise SizeOverflow(f"dimension {M} above cap {MAX_DIM}")
    if k < 1:
        raise DimensionMismatch(f"k must be >= 1, got {k}")
    n_vertices = math.comb(k + M - 1, M - 1)
    cap = max_vertices()
    if n_vertices > cap:
        raise SizeOverflow(f"{n_vertices} vertices exceeds cap {cap} (M={M}, k={k})")

    d = M - 1
    base = k + 1

    zs = _nonincreasing_tuples(d, k)
    keys = _z_keys(zs, base)
    order = np.argsort(keys)
    zs, keys = zs[order], keys[order]
    vertices = _z_to_points(zs, k, M)

    corners = _nonincreasing_tuples(d, k - 1) if k > 1 else np.zeros((1, d), dtype=np.int64)
    corner_keys = _z_keys(corners, base)

    # equality pattern of each corner (bit a <=> c_a == c_{a+1})
    if d > 1:
        eq = corners[:, :-1] == corners[:, 1:]
        patterns = (eq * (1 << np.arange(d - 1, dtype=np.int64))).sum(axis=1)
    else:
        patterns = np.zeros(corners.shape[0], dtype=np.int64)

    perm_table = _perms_by_pattern(d)
    cell_chunks, key_chunks, slot_chunks = [], [], []
    for pattern in np.unique(patterns):
        sel = patterns == pattern
        sel_keys = corner_keys[sel]
        for slot, pi in enumerate(perm_table[int(pattern)]):
            # z-key offsets of the path v_0 = c, v_j = v_{j-1} + e_{pi[j-1]}
            off = np.zeros(d, dtype=np.int64)
            off_keys = [np.int64(0)]
            for coord in pi:
                off[coord] += 1
                off_keys.append(_z_keys(off[None, :], base)[0])
            vkeys = sel_keys[:, None] + np.array(off_keys, dtype=np.int64)[None, :]
            idx = np.searchsorted(keys, vkeys)
            cell_chunks.append(idx.astype(np.int32))
            key_chunks.append(sel_keys)
            slot_chunks.append(np.full(sel_keys.shape[0], slot, dtype=np.int32))

    cells = np.concatenate(cell_chunks, axis=0)
    cell_keys = np.concatenate(key_chunks)
    slots = np.concatenate(slot_chunks)
    order = np.lexsort((slots, cell_keys))
    cells, cell_keys = cells[order], cell_keys[order]

    if cells.shape[0] != k ** d:
        raise NumericalFailure(
            f"cell enumeration produced {cells.shape[0]} cells, expected {k ** d}")

    vertices.flags.writeable = False
    cells.flags.writeable = False
    return Triangulation(order=k, dim=M, vertices=vertices, cells=cells,
                         _vertex_keys=keys, _cell_corner_keys=cell_keys)


def locate_cell(T: Triangulation, p):
    """Find a cell containing p and the barycentric weights within it.

    Returns (cell index, lambda) with lambda aligned to the cell's vertex
    order, lambda >= 0, sum lambda = 1 and sum lambda_v * vertex_v = p.
    Boundary ties are broken by a fixed canonical rule, so the result is
    deterministic.
    """
    p = np.asarray(p, dtype=float)
    M, k, d = T.dim, T.order, T.dim - 1
    if p.shape != (M,):
        raise DimensionMismatch(f"point shape {p.shape}, expected ({M},)")

    # staircase coordinates: z_t = k * (suffix mass after index t)
    suffix = np.cumsum(p[::-1])[::-1]
    z = k * suffix[1:]
    z = np.clip(z, 0.0, float(k))
    z = np.minimum.accumulate(z)  # repair tiny drift in monotonicity

    c = np.minimum(np.floor(z).astype(np.int64), k - 1)
    frac = z - c

    # addition order: fractional parts descending, index ascending on ties
    pi = tuple(np.lexsort((np.arange(d), -frac)))
    f_sorted = frac[list(pi)]
    lam = np.empty(M, dtype=float)
    lam[0] = 1.0 - f_sorted[0]
    lam[1:d] = f_sorted[:-1] - f_sorted[1:]
    lam[d] = f_sorted[-1]
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()

    base = k + 1
    corner_key = int(_z_keys(c[None, :], base)[0])
    lo = int(np.searchsorted(T._cell_corner_keys, corner_key, side="left"))
    hi = int(np.searchsorted(T._cell_corner_keys, corner_key, side="right"))
    if lo == hi:
        raise NumericalFailure(f"no cell found for point {p}")

    if d > 1:
        pattern = sum(1 << a for a in range(d - 1) if c[a] == c[a + 1])
    else:
        pattern = 0
    perms = _perms_by_pattern(d)[pattern]
    try:
        slot = perms.index(pi)
    except ValueError:
        # tie pushed us onto a face shared with the canonical cell of a
        # different addition order; snap to the first valid order, which
        # agrees wherever the ambiguous fractional parts coincide
        slot = 0
        canon = perms[0]
        f_sorted = frac[list(canon)]
        lam[0] = 1.0 - f_sorted[0]
        lam[1:d] = f_sorted[:-1] - f_sorted[1:]
        lam[d] = f_sorted[-1]
        lam = np.clip(lam, 0.0, None)
        lam /= lam.sum()
    cell = lo + slot
    if cell >= hi:
        raise NumericalFailure(f"cell slot out of range for point {p}")
    return cell, lam


def star_vertices(T: Triangulation, v) -> set:
    """All vertices sharing at least one cell with v (including v)."""
    if not 0 <= v < T.num_vertices:
        raise IndexOutOfRange(f"vertex {v} not in [0, {T.num_vertices})")
    cells = T.cells_of_vertex(v)
    return set(np.unique(T.cells[cells]).tolist())


@lru_cache(maxsize=24)
def cached_subdivision(M, k) -> Triangulation:
    """Shared immutable subdivisions; safe because Triangulation is read-only."""
    return edgewise_subdivision(M, k)
