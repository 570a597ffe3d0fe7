"""Plain-text files: MatrixMarket triplets for matrices, CSV or `key = value` for the rest.

Floats are written with 17 significant digits and LF line endings so that
identical inputs give byte-identical files.
"""
from __future__ import annotations

import os

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix, tril


def fmt(x):
    return format(float(x), ".17g")


def _write(path, lines):
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def write_mtx(path, matrix):
    """Symmetric integer matrix as a 1-based lower-triangle coordinate file."""
    lower = tril(csr_matrix(matrix), format="coo")
    order = np.lexsort((lower.row, lower.col))
    n = matrix.shape[0]
    lines = ["%%MatrixMarket matrix coordinate integer symmetric", f"{n} {n} {lower.nnz}"]
    for r, c, v in zip(lower.row[order], lower.col[order], lower.data[order]):
        lines.append(f"{r + 1} {c + 1} {int(v)}")
    _write(path, lines)


def read_mtx(path):
    with open(path) as fh:
        header = fh.readline().split()
        if header[:4] != ["%%MatrixMarket", "matrix", "coordinate", "integer"]:
            raise ValueError(f"{path}: not an integer coordinate MatrixMarket file")
        symmetric = header[4] == "symmetric"
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        nrows, ncols, nnz = (int(x) for x in line.split())
        body = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    if body.size == 0:
        body = np.zeros((0, 3), dtype=np.int64)
    if body.shape[0] != nnz:
        raise ValueError(f"{path}: expected {nnz} entries, found {body.shape[0]}")
    rows, cols, vals = body[:, 0] - 1, body[:, 1] - 1, body[:, 2]
    if symmetric:
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    return coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)).tocsr()


def write_vertices_csv(path, vertex_set):
    dim = vertex_set.coordinates.shape[1]
    flags = vertex_set.is_boundary()
    lines = ["index," + ",".join(f"x{k + 1}" for k in range(dim)) + ",is_boundary"]
    for i, (pt, b) in enumerate(zip(vertex_set.coordinates, flags)):
        lines.append(f"{i}," + ",".join(fmt(x) for x in pt) + f",{int(b)}")
    _write(path, lines)


def write_spectrum_csv(path, spectra):
    lines = ["level,value,multiplicity"]
    for spec in spectra:
        for value, mult in spec.grouped():
            lines.append(f"{spec.level},{fmt(value)},{'' if mult is None else mult}")
    _write(path, lines)


def write_probes_csv(path, trajectory):
    ids = trajectory.probe_ids
    lines = ["step,time," + ",".join(f"vertex_{v}" for v in ids)]
    for k, t in enumerate(trajectory.times):
        row = [str(k), fmt(t)] + [fmt(x) for x in trajectory.probe_values[k]]
        lines.append(",".join(row))
    _write(path, lines)


def read_probes_csv(path):
    """Return ``(times, {vertex_id: values})``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    series = {}
    for col, name in enumerate(header[2:], start=2):
        series[int(name.split("_", 1)[1])] = data[:, col]
    return data[:, 1], series


def write_snapshot_csv(path, step, time, n_vertices, vertex_ids, values):
    """Full level-m state (corners written as 0) at one step."""
    full = np.zeros(n_vertices)
    full[vertex_ids] = values
    lines = ["step,time,index,value"]
    t = fmt(time)
    lines.extend(f"{step},{t},{i},{fmt(v)}" for i, v in enumerate(full))
    _write(path, lines)


def write_table_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(x) for x in row))
    _write(path, lines)


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return fmt(x)
    return str(x)


def write_config(path, config):
    # shortest round-trip repr keeps the file readable and still deterministic
    def text(x):
        return repr(float(x)) if isinstance(x, (float, np.floating)) else _cell(x)
    lines = [f"{key} = {text(config[key])}" for key in sorted(config)]
    _write(path, lines)


def read_config(path):
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
