"""Recursive assembly of the level-m graph Laplacian.

Matrices are kept as exact int64 CSR during assembly. Sign convention:
``L = degree - adjacency`` is positive semi-definite, so the graph operator
sum_{Y~X} (u(Y) - u(X)) is ``-L @ u``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from . import topology
from .errors import StateError


@dataclass(frozen=True)
class SparseLaplacian:
    """Symmetric sparse Laplacian together with its vertex bookkeeping.

    ``vertex_ids[i]`` is the level-m vertex carried by row ``i`` (the identity
    for a full matrix, the interior vertices for a restricted one).
    ``index_map[i]`` is the construction-order index (position in the
    block-diagonal d-copy matrix of the last fusion step) that row ``i``
    came from. ``boundary_ids`` is None once the boundary has been removed.
    """

    d: int
    m: int
    matrix: csr_matrix = field(repr=False)
    vertex_ids: np.ndarray = field(repr=False)
    index_map: np.ndarray = field(repr=False)
    boundary_ids: tuple | None = None

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def restricted(self):
        return self.boundary_ids is None

    def toarray(self):
        return self.matrix.toarray()


@dataclass(frozen=True)
class ConnectionTable:
    """Columns of the connection matrix: (row-1 entry, row-2 entry), 1-based."""

    d: int
    m: int
    pairs: tuple


@dataclass(frozen=True)
class NormalizationConstant:
    d: int
    m: int
    exact: Fraction

    @property
    def value(self):
        return float(self.exact)


def base_matrix(d):
    """Complete-graph Laplacian on the d corners: diagonal d-1, off-diagonal -1."""
    d = topology.require_supported(d)
    dense = d * np.eye(d, dtype=np.int64) - np.ones((d, d), dtype=np.int64)
    ids = np.arange(d, dtype=np.int64)
    return SparseLaplacian(d, 0, csr_matrix(dense), ids, ids.copy(), tuple(range(d)))


def connection_table(d, m):
    return ConnectionTable(d, m, tuple(topology.fusion_pairs(d, m)))


def _fuse(block, table, mm):
    """Add row/column ``merge`` into ``keep`` for every pair, then delete ``merge``."""
    for keep, merge in table.pairs:
        if block[keep - 1, merge - 1] != 0:
            raise AssertionError(
                f"vertices {keep} and {merge} are adjacent before fusion (level {table.m})"
            )
    coo = block.tocoo()
    # relabelling every index through the merge target sums the duplicate
    # rows and columns and drops the deleted ones in a single pass
    rows = mm.target[coo.row]
    cols = mm.target[coo.col]
    n = mm.kept.size
    fused = coo_matrix((coo.data, (rows, cols)), shape=(n, n)).tocsr()
    fused.sum_duplicates()
    fused.eliminate_zeros()
    return fused


def assemble(d, m):
    """Level-m Laplacian built from d copies of the level-(m-1) one."""
    d = topology.require_supported(d)
    m = topology._check_int("m", m, 0)
    lap = base_matrix(d)
    matrix = lap.matrix
    index_map = lap.index_map
    for level in range(1, m + 1):
        n_prev = matrix.shape[0]
        blocks = coo_matrix(matrix)
        rows = np.concatenate([blocks.row + k * n_prev for k in range(d)])
        cols = np.concatenate([blocks.col + k * n_prev for k in range(d)])
        data = np.tile(blocks.data, d)
        block_diag = csr_matrix((data, (rows, cols)), shape=(d * n_prev, d * n_prev))
        mm = topology.merge_map(d, level)
        matrix = _fuse(block_diag, connection_table(d, level), mm)
        index_map = np.asarray(mm.kept, dtype=np.int64)
    n = matrix.shape[0]
    return SparseLaplacian(
        d, m, matrix, np.arange(n, dtype=np.int64), index_map, topology.boundary_ids(d, m)
    )


def dirichlet_restrict(lap):
    """Drop the d corner rows/columns; interior vertices keep their relative order."""
    if lap.boundary_ids is None:
        raise StateError("Laplacian has no boundary ids (already restricted?)")
    bnd = set(lap.boundary_ids)
    keep = np.array([i for i in range(lap.n) if i not in bnd], dtype=np.int64)
    sub = lap.matrix[keep][:, keep].tocsr()
    sub.sort_indices()
    return SparseLaplacian(lap.d, lap.m, sub, lap.vertex_ids[keep], lap.index_map[keep], None)


def restricted_laplacian(d, m):
    return dirichlet_restrict(assemble(d, m))


def normalization(d, m):
    """Renormalisation factor c_m = (d/2) (d+2)^m of the graph Laplacian."""
    d = topology.require_supported(d)
    m = topology._check_int("m", m, 0)
    return NormalizationConstant(d, m, Fraction(d, 2) * (d + 2) ** m)
