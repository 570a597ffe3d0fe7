"""Vertex sets and corner bookkeeping for Sierpinski simplices.

The level-m graph is built from d copies of the level-(m-1) graph whose
vertices are numbered copy after copy ("construction order"); shared corners
are then fused and the duplicates deleted. Corner labels use the
1-based C1..Cd convention; everything else in the package is 0-based.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.spatial import cKDTree

from .errors import UnsupportedFamilyError

SUPPORTED_FAMILIES = (3, 4)

# Seed value of the corner-offset recurrences (same for both families).
N_MINUS_ONE = 3


def _check_int(name, value, minimum):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def require_supported(d):
    d = _check_int("d", d, 2)
    if d not in SUPPORTED_FAMILIES:
        raise UnsupportedFamilyError(d)
    return d


@dataclass(frozen=True)
class SimplexSpec:
    """Family (number of contractions ``d``) and refinement depth ``m``."""

    d: int
    m: int

    def __post_init__(self):
        object.__setattr__(self, "d", require_supported(self.d))
        object.__setattr__(self, "m", _check_int("m", self.m, 0))

    @property
    def n_vertices(self):
        return vertex_count(self.d, self.m)

    @property
    def n_interior(self):
        return self.n_vertices - self.d


def vertex_count(d, m):
    """Number of vertices N_m of the level-m graph, by the fusion recursion."""
    d = _check_int("d", d, 2)
    m = _check_int("m", m, 0)
    n = d
    for _ in range(m):
        n = d * n - d * (d - 1) // 2
    return n


def vertex_count_closed(d, m):
    d = _check_int("d", d, 2)
    m = _check_int("m", m, 0)
    return (d ** (m + 1) + d) // 2


def _n_prev(d, m):
    # N_m extended with the recurrence seed N_{-1} = 3.
    return N_MINUS_ONE if m == -1 else vertex_count(d, m)


def i2(d, m):
    require_supported(d)
    m = _check_int("m", m, 0)
    value = 0
    for k in range(1, m + 1):
        value += _n_prev(d, k - 2) - 1
    return value


def i3(m):
    """Offset of the third corner (tetrahedron only), seeded with I3(1) = 3."""
    m = _check_int("m", m, 1)
    value = 3
    for k in range(2, m + 1):
        value += 2 * _n_prev(4, k - 2) - 3
    return value


def offset_sequence(d, m):
    """Return ``(I2, I3)`` as lists indexed by level.

    ``I2[k]`` holds I2(k) for k = 0..m. For the tetrahedron ``I3[k]`` holds
    I3(k) for k = 1..m with ``I3[0] = None``; for the gasket ``I3`` is None.
    """
    d = require_supported(d)
    m = _check_int("m", m, 1)
    seq2 = [i2(d, k) for k in range(m + 1)]
    seq3 = [None] + [i3(k) for k in range(1, m + 1)] if d == 4 else None
    return seq2, seq3


def corner_index(d, n, m, c):
    """Pre-merge 1-based index of corner ``c`` of copy ``n`` at level ``m``."""
    d = require_supported(d)
    m = _check_int("m", m, 1)
    n = _check_int("n", n, 1)
    c = _check_int("c", c, 1)
    if n > d or c > d:
        raise ValueError(f"copy and corner must lie in 1..{d}, got n={n}, c={c}")
    block = _n_prev(d, m - 1)
    if c == 1:
        return 1 + (n - 1) * block
    if c == d:
        return n * block
    if c == 2:
        return i2(d, m) + (n - 1) * block
    return i3(m) + (n - 1) * block


@dataclass(frozen=True)
class CornerIndexTable:
    d: int
    m: int
    index: dict  # (copy, corner) -> 1-based pre-merge index
    i2: int
    i3: int | None = None


def corner_table(d, m):
    d = require_supported(d)
    index = {
        (n, c): corner_index(d, n, m, c)
        for n in range(1, d + 1)
        for c in range(1, d + 1)
    }
    return CornerIndexTable(d, m, index, i2(d, m), i3(m) if d == 4 else None)


def fusion_pairs(d, m):
    """Corner pairs fused at level ``m`` as ``(keep, merge)`` 1-based indices.

    Copies ``a < b`` meet at corner ``b`` of copy ``a`` and corner ``a`` of
    copy ``b``. Pairs are listed in the column order of the connection matrix:
    (1,2), (1,3), (2,3), then (1,4), (2,4), (3,4) for the tetrahedron.
    """
    d = require_supported(d)
    m = _check_int("m", m, 1)
    pairs = []
    for b in range(2, d + 1):
        for a in range(1, b):
            pairs.append((corner_index(d, a, m, b), corner_index(d, b, m, a)))
    return pairs


@dataclass(frozen=True)
class MergeMap:
    """How construction-order indices collapse into level-m indices.

    ``target[i]`` is the post-merge index of construction index ``i``
    (a deleted duplicate points at the vertex it was fused into) and
    ``kept[j]`` is the construction index that survives as vertex ``j``.
    """

    d: int
    m: int
    pairs: tuple
    target: np.ndarray = field(repr=False)
    kept: np.ndarray = field(repr=False)


def merge_map(d, m):
    return _merge_map(require_supported(d), _check_int("m", m, 1))


@functools.lru_cache(maxsize=None)
def _merge_map(d, m):
    pairs = fusion_pairs(d, m)
    size = d * vertex_count(d, m - 1)
    keep0 = [a - 1 for a, _ in pairs]
    merge0 = [b - 1 for _, b in pairs]
    if len(set(keep0 + merge0)) != 2 * len(pairs):
        raise AssertionError(f"connection table at d={d}, m={m} is not disjoint")
    # global corners P_{i-1} = corner i of copy i never take part in a fusion
    block = vertex_count(d, m - 1)
    corners = {(i - 1) * block + _level_corners(d, m - 1)[i - 1] for i in range(1, d + 1)}
    if corners & set(keep0 + merge0):
        raise AssertionError(f"fusion touches a global corner at d={d}, m={m}")

    alive = np.ones(size, dtype=bool)
    alive[merge0] = False
    kept = np.flatnonzero(alive)
    target = np.full(size, -1, dtype=np.int64)
    target[kept] = np.arange(kept.size)
    target[merge0] = target[keep0]
    kept.setflags(write=False)
    target.setflags(write=False)
    return MergeMap(d, m, tuple(pairs), target, kept)


@functools.lru_cache(maxsize=None)
def _level_corners(d, m):
    # 0-based positions of P_0..P_{d-1} in the level-m numbering
    if m == 0:
        return tuple(range(d))
    mm = merge_map(d, m)
    block = vertex_count(d, m - 1)
    below = _level_corners(d, m - 1)
    return tuple(int(mm.target[(i - 1) * block + below[i - 1]]) for i in range(1, d + 1))


def boundary_ids(d, m):
    """0-based level-m indices of the corners P_0, ..., P_{d-1}."""
    d = require_supported(d)
    m = _check_int("m", m, 0)
    return _level_corners(d, m)


def interior_ids(d, m):
    bnd = set(boundary_ids(d, m))
    return np.array([i for i in range(vertex_count(d, m)) if i not in bnd], dtype=np.int64)


def base_points(d):
    """Unit-edge regular simplex: P_0, ..., P_{d-1} as rows."""
    d = require_supported(d)
    if d == 3:
        return np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])
    return np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.5, np.sqrt(3.0) / 2.0, 0.0],
            [0.5, np.sqrt(3.0) / 6.0, np.sqrt(2.0 / 3.0)],
        ]
    )


def dedup_tolerance(m):
    return 1e-9 * 0.5**m


@dataclass(frozen=True)
class VertexSet:
    spec: SimplexSpec
    coordinates: np.ndarray = field(repr=False)
    boundary_ids: tuple

    @property
    def count(self):
        return self.coordinates.shape[0]

    def is_boundary(self):
        flags = np.zeros(self.count, dtype=bool)
        flags[list(self.boundary_ids)] = True
        return flags


def vertex_coordinates(spec):
    """Coordinates of V_m in the same numbering as the assembled Laplacian.

    Replays the copy concatenation: copy ``i`` is the image of the level-(m-1)
    points under the i-th contraction, then fused duplicates are dropped.
    """
    d, m = spec.d, spec.m
    corners = base_points(d)
    points = corners.copy()
    for level in range(1, m + 1):
        stacked = np.vstack([0.5 * (points + corners[i]) for i in range(d)])
        mm = merge_map(d, level)
        tol = dedup_tolerance(level)
        for keep, merge in mm.pairs:
            gap = np.max(np.abs(stacked[keep - 1] - stacked[merge - 1]))
            if gap > tol:
                raise AssertionError(
                    f"fused corners {keep} and {merge} at level {level} are {gap:.3g} apart"
                )
        points = stacked[mm.kept]
    bids = boundary_ids(d, m)
    for i, b in enumerate(bids):
        if np.max(np.abs(points[b] - corners[i])) > dedup_tolerance(m):
            raise AssertionError(f"boundary vertex {b} is not P_{i}")
    return VertexSet(spec, points, bids)


def _word_offsets(d, m):
    # f_w(X) = X / 2^m + sum_k P_{w_k} / 2^k for the word w = (w_1, ..., w_m)
    corners = base_points(d)
    offsets = np.zeros((1, d - 1))
    for k in range(1, m + 1):
        offsets = (offsets[:, None, :] + corners[None, :, :] * 0.5**k).reshape(-1, d - 1)
    return offsets


@dataclass(frozen=True)
class GeometricGraph:
    """Level-m graph rebuilt from cell geometry, numbered by first appearance."""

    spec: SimplexSpec
    coordinates: np.ndarray = field(repr=False)
    adjacency: csr_matrix = field(repr=False)

    @property
    def n_edges(self):
        return self.adjacency.nnz // 2

    def laplacian(self):
        """Degree minus adjacency, as an exact integer matrix."""
        adj = self.adjacency.astype(np.int64)
        deg = np.asarray(adj.sum(axis=1)).ravel()
        return (csr_matrix((deg, (np.arange(deg.size), np.arange(deg.size))), shape=adj.shape) - adj).tocsr()


def geometric_adjacency(spec):
    """Union over all m-cells f_w(V_0) of the complete graph on the cell's corners."""
    d, m = spec.d, spec.m
    corners = base_points(d)
    raw = (_word_offsets(d, m)[:, None, :] + corners[None, :, :] * 0.5**m).reshape(-1, d - 1)

    tree = cKDTree(raw)
    label = np.full(raw.shape[0], -1, dtype=np.int64)
    count = 0
    for i in range(raw.shape[0]):
        if label[i] >= 0:
            continue
        for j in tree.query_ball_point(raw[i], dedup_tolerance(m)):
            label[j] = count
        count += 1
    first = np.full(count, -1, dtype=np.int64)
    for i in range(raw.shape[0] - 1, -1, -1):
        first[label[i]] = i
    coords = raw[first]

    cells = label.reshape(-1, d)
    rows, cols = [], []
    for a, b in itertools.permutations(range(d), 2):
        rows.append(cells[:, a])
        cols.append(cells[:, b])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    adj = coo_matrix((np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(count, count)).tocsr()
    if adj.nnz and adj.max() > 1:
        raise AssertionError("two cells share an edge")
    return GeometricGraph(spec, coords, adj.astype(np.int8))


def match_points(source, target, tol):
    """For each row of ``source`` return the index of the coinciding row of ``target``."""
    dist, idx = cKDTree(target).query(source, k=1)
    if source.shape[0] and np.max(dist) > tol:
        bad = int(np.argmax(dist))
        raise AssertionError(f"point {bad} has no partner within {tol:g} (distance {dist[bad]:.3g})")
    return idx.astype(np.int64)
