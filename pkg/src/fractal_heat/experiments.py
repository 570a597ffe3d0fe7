"""Reproduction studies built on the stepper: refinement in m and h, power-law fit, CFL sweep."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import spsolve

from . import laplacian, spectral, stepper, topology
from .errors import DivergenceError, DomainError
from .topology import SimplexSpec

REFERENCE_SLOPE = -1.44972
REFERENCE_INTERCEPT = -1.01275
SPECTRAL_DIMENSION_REF = math.log(3) / math.log(2)

THREADS_ENV = "FRACTAL_HEAT_THREADS"


def max_workers():
    """Worker cap from FRACTAL_HEAT_THREADS (0 or unset: one per CPU)."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a non-negative integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be a non-negative integer, got {n}")
    return n or (os.cpu_count() or 1)


def _map_cells(fn, items):
    # results come back in input order whatever the worker count
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def default_vertex(d, m):
    """First interior vertex of level m (next to P_0 on the edge P_0 P_1)."""
    return int(topology.interior_ids(d, m)[0])


# -- level transport ---------------------------------------------------------

def restriction_map(coarse, fine):
    """Index in V_fine of every vertex of V_coarse (V_m is a subset of V_{m+k})."""
    if coarse.d != fine.d:
        raise ValueError("restriction map needs the same family on both levels")
    if fine.m < coarse.m:
        raise ValueError("fine level must not be below the coarse level")
    a = topology.vertex_coordinates(coarse).coordinates
    b = topology.vertex_coordinates(fine).coordinates
    return topology.match_points(a, b, 1e-9)


def harmonic_extension(values, d, m):
    """Extend a function on V_m to V_{m+1}, harmonic at the new vertices."""
    fine = SimplexSpec(d, m + 1)
    rmap = restriction_map(SimplexSpec(d, m), fine)
    lap = laplacian.assemble(d, m + 1).matrix.astype(float).tocsr()
    old = np.zeros(fine.n_vertices, dtype=bool)
    old[rmap] = True
    new = np.flatnonzero(~old)
    out = np.zeros(fine.n_vertices)
    out[rmap] = values
    rhs = -(lap[new][:, rmap] @ np.asarray(values, dtype=float))
    out[new] = spsolve(lap[new][:, new].tocsc(), rhs)
    return out


def spline_initial(spec, base_level, vertex_id):
    """Level-``base_level`` harmonic spline of ``vertex_id`` sampled on V_m."""
    if base_level > spec.m:
        raise ValueError("spline base level must not exceed the state level")
    base = SimplexSpec(spec.d, base_level)
    if vertex_id in topology.boundary_ids(spec.d, base_level):
        raise ValueError(f"vertex {vertex_id} is a boundary corner (held at 0)")
    values = np.zeros(base.n_vertices)
    values[vertex_id] = 1.0
    for level in range(base_level, spec.m):
        values = harmonic_extension(values, spec.d, level)
    interior = topology.interior_ids(spec.d, spec.m)
    return stepper.StateVector(values[interior], spec.d, spec.m)


def transported_initial(spec, base_level, vertex_id, init="spike"):
    """Initial condition on level ``spec.m`` for a problem posed at ``base_level``."""
    if init == "spike":
        target = restriction_map(SimplexSpec(spec.d, base_level), spec)[vertex_id]
        return stepper.spike_initial(spec, int(target))
    if init == "spline":
        return spline_initial(spec, base_level, vertex_id)
    raise ValueError(f"init must be 'spike' or 'spline', got {init!r}")


# -- refinement in m ---------------------------------------------------------

@dataclass
class RefinementReport:
    d: int
    levels: tuple
    restriction: np.ndarray = field(repr=False)
    error: float
    h_coarse: float
    h_fine: float
    steps_coarse: int
    steps_fine: int
    T: float
    scheme: str
    init: str


def compare_levels(d, m_coarse, m_fine, T, base_level=None, vertex=None,
                   init="spike", scheme="explicit", margin=0.5):
    """||u_coarse - u_fine restricted to V_coarse||_{2,inf} on common sample times.

    The coarse step is the largest T/N below ``margin`` times the coarse CFL
    bound; the fine step divides it by (d+2)^(m_fine - m_coarse) so it keeps
    the same margin on the finer level.
    """
    base_level = m_coarse if base_level is None else base_level
    vertex = default_vertex(d, base_level) if vertex is None else vertex
    coarse, fine = SimplexSpec(d, m_coarse), SimplexSpec(d, m_fine)
    ratio = (d + 2) ** (m_fine - m_coarse)
    n_coarse = math.ceil(T / (margin * spectral.cfl_max_step(d, m_coarse)))
    n_fine = n_coarse * ratio

    def run(spec, n, every):
        cfg = stepper.SchemeConfig(scheme, T, n)
        u0 = transported_initial(spec, base_level, vertex, init)
        return stepper.simulate(spec, cfg, u0, sample_every=every)

    tc, tf = _map_cells(lambda job: run(*job), [(coarse, n_coarse, 1), (fine, n_fine, ratio)])
    rmap = restriction_map(coarse, fine)
    coarse_ids = topology.interior_ids(d, m_coarse)
    slots = stepper.interior_slots(fine, rmap[coarse_ids])
    scale = float(d) ** (-m_coarse)
    error = 0.0
    for k in range(n_coarse + 1):
        diff = tc.snapshots[k] - tf.snapshots[k * ratio][slots]
        error = max(error, math.sqrt(scale * float(np.dot(diff, diff))))
    return RefinementReport(
        d, (m_coarse, m_fine), rmap, error, T / n_coarse, T / n_fine,
        n_coarse, n_fine, T, scheme, init,
    )


def refinement_study(d, m_low, m_high, T=0.05, init="spike", vertex=None, scheme="explicit"):
    """Compare each level m in m_low..m_high with m + 1 on one shared problem.

    The problem is posed at ``m_low``: a spike (or level-m_low harmonic
    spline) at ``vertex``, carried to finer levels through the restriction map.
    """
    if m_low < 1:
        raise ValueError("m_low must be >= 1")
    if m_high < m_low:
        raise ValueError("m_high must be >= m_low")
    vertex = default_vertex(d, m_low) if vertex is None else vertex
    return _map_cells(
        lambda m: compare_levels(d, m, m + 1, T, m_low, vertex, init, scheme),
        range(m_low, m_high + 1),
    )


# -- refinement in h ---------------------------------------------------------

@dataclass(frozen=True)
class StepHalvingReport:
    steps: tuple
    differences: tuple
    ratios: tuple


def step_halving_study(d, m, T, N0, scheme="explicit", vertex=None, halvings=2):
    """Sup-norm gaps at time T between runs with N0, 2 N0, 4 N0, ... steps.

    ``differences[k]`` compares the runs with N0 2^k and N0 2^(k+1) steps; a
    first-order scheme gives ``ratios`` near 2. Early times are left out on
    purpose: the spike's first few steps are not in the asymptotic regime.
    """
    spec = SimplexSpec(d, m)
    vertex = default_vertex(d, m) if vertex is None else vertex
    steps = tuple(N0 * 2**k for k in range(halvings + 1))

    def run(n):
        cfg = stepper.SchemeConfig(scheme, T, n)
        traj = stepper.simulate(spec, cfg, stepper.spike_initial(spec, vertex), sample_every=n)
        return traj.final.values

    finals = _map_cells(run, steps)
    diffs = tuple(float(np.max(np.abs(finals[k] - finals[k + 1]))) for k in range(halvings))
    ratios = tuple(diffs[k] / diffs[k + 1] for k in range(halvings - 1))
    return StepHalvingReport(steps, diffs, ratios)


# -- power law ---------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    sample_count: int


def default_fit_window(d, m, h, T):
    """From 10 h up to the earlier of T/2 and the slowest-mode decay time.

    Past 1/(c_m lambda_min) the Dirichlet boundary turns the decay
    exponential, which no power law fits.
    """
    relax = 1.0 / (laplacian.normalization(d, m).value * spectral.smallest_eigenvalue(d, m))
    return (10.0 * h, min(T / 2.0, relax))


def _log_thin(t, max_points):
    if t.size <= max_points:
        return np.arange(t.size)
    targets = np.geomspace(t[0], t[-1], max_points)
    idx = np.clip(np.searchsorted(t, targets), 0, t.size - 1)
    return np.unique(idx)


def power_law_fit(times, values, window=None, max_points=2000, min_samples=10):
    """Least-squares line through (ln t, ln u) restricted to ``window``."""
    t = np.asarray(times, dtype=float)
    u = np.asarray(values, dtype=float)
    if t.shape != u.shape:
        raise ValueError("times and values must have the same length")
    if window is None:
        pos = t[t > 0]
        if pos.size == 0:
            raise DomainError("no positive times to fit")
        window = (float(pos.min()), float(t.max()))
    lo, hi = window
    if not 0 < lo < hi:
        raise DomainError(f"fit window must satisfy 0 < t_min < t_max, got {window}")
    sel = (t >= lo) & (t <= hi)
    t, u = t[sel], u[sel]
    if np.any(u <= 0):
        raise DomainError("non-positive temperature inside the fit window")
    if t.size < min_samples:
        raise DomainError(f"only {t.size} samples in window, need at least {min_samples}")
    order = np.argsort(t, kind="stable")
    t, u = t[order], u[order]
    keep = _log_thin(t, max_points)
    x, y = np.log(t[keep]), np.log(u[keep])
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(np.dot(xc, yc) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    ss_res = float(np.sum((yc - slope * xc) ** 2))
    ss_tot = float(np.dot(yc, yc))
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= 1e-300 else 0.0
    return FitResult(slope, intercept, min(max(r2, 0.0), 1.0), (float(lo), float(hi)), int(keep.size))


def power_law_experiment(d=3, m=6, T=1.0, N=200_000, vertex=None, probe=None,
                         window=None, scheme="explicit", sample_every=None):
    """Spike run with a single probe followed by the log-log fit."""
    spec = SimplexSpec(d, m)
    vertex = default_vertex(d, m) if vertex is None else vertex
    probe = vertex if probe is None else probe
    cfg = stepper.SchemeConfig(scheme, T, N)
    traj = stepper.simulate(
        spec, cfg, stepper.spike_initial(spec, vertex), probes=[probe],
        sample_every=sample_every or N,
    )
    window = default_fit_window(d, m, cfg.h, T) if window is None else window
    fit = power_law_fit(traj.times, traj.probe_values[:, 0], window)
    return traj, fit


# -- CFL boundary ------------------------------------------------------------

@dataclass(frozen=True)
class CFLRow:
    factor: float
    h: float
    h_max: float
    classification: str
    divergence_step: int | None
    max_norm_ratio: float


def _classify(d, m, factor, steps, vertex, threshold):
    spec = SimplexSpec(d, m)
    h_max = spectral.cfl_max_step(d, m)
    h = factor * h_max
    cfg = stepper.SchemeConfig("explicit", h * steps, steps, cfl_policy="ignore")
    u0 = stepper.spike_initial(spec, vertex)
    n0 = stepper.norm_2_scaled(u0)
    try:
        traj = stepper.simulate(spec, cfg, u0, sample_every=steps, max_growth=threshold)
    except DivergenceError as exc:
        return CFLRow(factor, h, h_max, "divergent", exc.step, math.inf)
    ratio = float(np.max(traj.norm2) / n0)
    if traj.halted_at is not None:
        return CFLRow(factor, h, h_max, "divergent", traj.halted_at, ratio)
    norms = traj.norm2
    if np.all(norms[1:] <= norms[:-1] * (1 + 1e-12)):
        return CFLRow(factor, h, h_max, "stable", None, ratio)
    return CFLRow(factor, h, h_max, "inconclusive", None, ratio)


def cfl_demo(d, m, factors, steps=10_000, vertex=None, threshold=1e6):
    """Classify explicit spike runs at h = factor * h_max for each factor."""
    factors = [float(f) for f in factors]
    if any(not f > 0 for f in factors):
        raise ValueError("CFL factors must be positive")
    vertex = default_vertex(d, m) if vertex is None else vertex
    return _map_cells(lambda f: _classify(d, m, f, steps, vertex, threshold), factors)
