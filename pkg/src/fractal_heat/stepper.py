"""Explicit and implicit Euler time stepping for the Dirichlet heat problem.

The state holds the interior vertices only, in increasing level-m vertex
order; the corners are pinned to zero by construction.
"""
from __future__ import annotations

import functools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import laplacian, spectral
from ._backend import kernels as _default_kernels
from .errors import CFLViolation, DivergenceError, SolverError
from .topology import SimplexSpec

log = logging.getLogger(__name__)

KINDS = ("explicit", "implicit")
CFL_POLICIES = ("enforce", "warn", "ignore")
CFL_SLACK = 1e-12


@dataclass(frozen=True)
class StateVector:
    values: np.ndarray = field(repr=False)
    d: int
    m: int
    step: int = 0
    t: float = 0.0

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        expected = SimplexSpec(self.d, self.m).n_interior
        if values.shape != (expected,):
            raise ValueError(f"state must have {expected} interior values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("state contains non-finite values")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SchemeConfig:
    kind: str = "explicit"
    T: float = 1.0
    N: int = 1
    cg_rel_tol: float = 1e-10
    cg_max_iter: int | None = None
    cfl_policy: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"scheme must be one of {KINDS}, got {self.kind!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not 0 < self.cg_rel_tol <= 1e-3:
            raise ValueError(f"cg_rel_tol must lie in (0, 1e-3], got {self.cg_rel_tol}")
        if self.cg_max_iter is not None and self.cg_max_iter < 1:
            raise ValueError("cg_max_iter must be positive")
        policy = self.cfl_policy
        if policy is None:
            policy = "enforce" if self.kind == "explicit" else "ignore"
        if policy not in CFL_POLICIES:
            raise ValueError(f"cfl_policy must be one of {CFL_POLICIES}, got {policy!r}")
        object.__setattr__(self, "cfl_policy", policy)
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self):
        return self.T / self.N


@functools.lru_cache(maxsize=16)
def _operator(d, m):
    lap = laplacian.restricted_laplacian(d, m)
    mat = lap.matrix.astype(np.float64).tocsr()
    mat.indptr = mat.indptr.astype(np.int32)
    mat.indices = mat.indices.astype(np.int32)
    for arr in (mat.data, mat.indices, mat.indptr, lap.vertex_ids):
        arr.setflags(write=False)
    return mat, lap.vertex_ids


class SchemeMatrixView:
    """``I - h c L`` (explicit) or ``I + h c L`` (implicit), never formed densely."""

    def __init__(self, d, m, h, kernels=None):
        if not h > 0:
            raise ValueError(f"h must be positive, got {h}")
        self.d = d
        self.m = m
        self.h = float(h)
        self.c = laplacian.normalization(d, m).value
        self.L, self.vertex_ids = _operator(d, m)
        self.kernels = kernels or _default_kernels

    @property
    def hc(self):
        return self.h * self.c

    @property
    def n(self):
        return self.L.shape[0]


def spike_initial(spec, vertex_id):
    """1 at the given (0-based, level-m) interior vertex, 0 elsewhere."""
    _, ids = _operator(spec.d, spec.m)
    slot = _slot(ids, vertex_id, spec)
    values = np.zeros(ids.size)
    values[slot] = 1.0
    return StateVector(values, spec.d, spec.m)


def _slot(ids, vertex_id, spec):
    if vertex_id < 0 or vertex_id >= spec.n_vertices:
        raise ValueError(f"vertex {vertex_id} out of range 0..{spec.n_vertices - 1}")
    pos = int(np.searchsorted(ids, vertex_id))
    if pos >= ids.size or ids[pos] != vertex_id:
        raise ValueError(f"vertex {vertex_id} is a boundary corner (held at 0)")
    return pos


def interior_slots(spec, vertex_ids):
    _, ids = _operator(spec.d, spec.m)
    return np.array([_slot(ids, v, spec) for v in vertex_ids], dtype=np.int64)


def _check_dims(u, view):
    if (u.d, u.m) != (view.d, view.m) or u.values.size != view.n:
        raise ValueError(
            f"state (d={u.d}, m={u.m}, n={u.values.size}) does not match "
            f"operator (d={view.d}, m={view.m}, n={view.n})"
        )


def explicit_step(u, view):
    _check_dims(u, view)
    values = u.values - view.hc * (view.L @ u.values)
    step = u.step + 1
    return StateVector(values, u.d, u.m, step, step * view.h)


def implicit_step(u, view, tol=1e-10, max_iter=None):
    _check_dims(u, view)
    x = u.values.copy()
    max_iter = 10 * view.n if max_iter is None else max_iter
    iters, res = view.kernels.cg_solve(view.L, view.hc, u.values, x, tol, max_iter)
    if res > tol:
        raise SolverError(iters, res, tol)
    step = u.step + 1
    return StateVector(x, u.d, u.m, step, step * view.h)


@dataclass(frozen=True)
class CFLCheck:
    satisfied: bool
    h_max: float


def check_cfl(h, d, m):
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    h_max = spectral.cfl_max_step(d, m)
    return CFLCheck(h <= h_max * (1 + CFL_SLACK), h_max)


def norm_2_scaled(u):
    """(d^-m sum |u_i|^2)^(1/2)."""
    return _scaled(np.dot(u.values, u.values), u.d, u.m)


def _scaled(sq, d, m):
    return np.sqrt(np.asarray(sq) * float(d) ** (-m))


@dataclass
class Trajectory:
    """Per-step probe values and norms plus sparse full snapshots.

    Arrays are indexed by step 0..``steps``; ``snapshots`` maps step index to
    the interior state. ``halted_at`` is set when ``max_growth`` stopped the run.
    """

    spec: SimplexSpec
    config: SchemeConfig
    probe_ids: tuple
    times: np.ndarray = field(repr=False)
    probe_values: np.ndarray = field(repr=False)
    norm2: np.ndarray = field(repr=False)
    sup: np.ndarray = field(repr=False)
    snapshots: dict = field(repr=False)
    final: StateVector = field(repr=False)
    vertex_ids: np.ndarray = field(repr=False)
    cg_iterations: list = field(default_factory=list, repr=False)
    halted_at: int | None = None

    @property
    def steps(self):
        return self.times.size - 1

    @property
    def norm_2_inf(self):
        return float(np.max(self.norm2))


def _enforce_cfl(spec, config):
    if config.kind != "explicit" or config.cfl_policy == "ignore":
        return
    check = check_cfl(config.h, spec.d, spec.m)
    if check.satisfied:
        return
    if config.cfl_policy == "enforce":
        raise CFLViolation(config.h, check.h_max)
    msg = f"h={config.h:.6g} exceeds the CFL bound {check.h_max:.6g}; the run may diverge"
    log.warning(msg)
    warnings.warn(msg, RuntimeWarning, stacklevel=3)


def simulate(spec, config, init, probes=(), sample_every=1, steps=None,
             max_growth=None, kernels=None):
    """Run the scheme from ``init``, keeping per-step probe values and norms.

    ``probes`` are level-m interior vertex ids. Snapshots are kept at step 0,
    every ``sample_every`` steps and at the last step. ``steps`` overrides the
    number of steps actually taken (default ``config.N``; 0 returns the
    initial state only). With ``max_growth`` set, stepping halts at the first
    step whose scaled l2 norm exceeds ``max_growth`` times the initial one.
    """
    if (init.d, init.m) != (spec.d, spec.m):
        raise ValueError("initial state does not belong to this simplex")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    n_steps = config.N if steps is None else int(steps)
    if n_steps < 0:
        raise ValueError("steps must be non-negative")
    _enforce_cfl(spec, config)

    view = SchemeMatrixView(spec.d, spec.m, config.h, kernels)
    probe_ids = tuple(int(p) for p in probes)
    slots = interior_slots(spec, probe_ids)
    u = init.values.copy()

    probe_values = np.empty((n_steps + 1, slots.size))
    sq = np.empty(n_steps + 1)
    sup = np.empty(n_steps + 1)
    probe_values[0] = u[slots]
    sq[0] = np.dot(u, u)
    sup[0] = np.max(np.abs(u)) if u.size else 0.0
    snapshots = {0: u.copy()}
    cg_iters = []
    limit = None if max_growth is None else max_growth * np.sqrt(sq[0])

    done = 0
    halted = None
    chunk_cap = 64 if max_growth is not None else 4096
    while done < n_steps:
        next_snap = (done // sample_every + 1) * sample_every
        chunk = min(next_snap, n_steps, done + chunk_cap) - done
        lo = done + 1
        if config.kind == "explicit":
            ran, finite = view.kernels.explicit_steps(
                view.L, view.hc, u, chunk, slots,
                probe_values[lo:lo + chunk], sq[lo:lo + chunk], sup[lo:lo + chunk],
            )
            if not finite:
                raise DivergenceError(done + ran)
        else:
            max_iter = config.cg_max_iter or 10 * view.n
            for k in range(chunk):
                x = u.copy()
                iters, res = view.kernels.cg_solve(view.L, view.hc, u, x, config.cg_rel_tol, max_iter)
                if res > config.cg_rel_tol:
                    raise SolverError(iters, res, config.cg_rel_tol)
                u = x
                cg_iters.append(iters)
                probe_values[lo + k] = u[slots]
                sq[lo + k] = np.dot(u, u)
                sup[lo + k] = np.max(np.abs(u)) if u.size else 0.0
                if not np.isfinite(sup[lo + k]):
                    raise DivergenceError(lo + k)
            ran = chunk
        done += ran
        if limit is not None:
            over = np.flatnonzero(np.sqrt(sq[lo:done + 1]) > limit)
            if over.size:
                halted = lo + int(over[0])
                break
        if done % sample_every == 0 or done == n_steps:
            snapshots[done] = u.copy()

    end = done if halted is None else halted
    h = config.h
    return Trajectory(
        spec=spec,
        config=config,
        probe_ids=probe_ids,
        times=np.arange(end + 1) * h,
        probe_values=probe_values[:end + 1],
        norm2=_scaled(sq[:end + 1], spec.d, spec.m),
        sup=sup[:end + 1],
        snapshots=snapshots,
        final=StateVector(u, spec.d, spec.m, done, done * h) if np.all(np.isfinite(u)) else None,
        vertex_ids=view.vertex_ids,
        cg_iterations=cg_iters,
        halted_at=halted,
    )
