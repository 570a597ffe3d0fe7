"""Spectral decimation and the step-size bound it implies for the explicit scheme."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import topology
from .errors import DomainError

DIRECT_DIMENSION_CAP = 2000
DEDUP_TOL = 1e-10


def phi(d, x):
    """Decimation map: eigenvalues one level down are ``x (d + 2 - x)``."""
    return x * (d + 2 - x)


def phi_branch(d, x, sign):
    """Inverse branch of :func:`phi`; ``sign`` is ``'+'``/``'-'`` or +1/-1."""
    if sign in ("+", 1):
        s = 1.0
    elif sign in ("-", -1):
        s = -1.0
    else:
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    disc = (d + 2) ** 2 - 4 * x
    if disc < 0:
        raise DomainError(f"x={x} lies above the branch point (d+2)^2/4={(d + 2) ** 2 / 4}")
    return ((d + 2) + s * math.sqrt(disc)) / 2


@dataclass(frozen=True)
class SpectrumSet:
    """Dirichlet eigenvalues at one level.

    ``values`` is sorted ascending. For ``provenance == "direct"`` it lists
    every eigenvalue with repetition; for ``"decimation"`` it is a set of
    candidate values without multiplicity.
    """

    level: int
    values: np.ndarray = field(repr=False)
    provenance: str

    def __len__(self):
        return self.values.size

    def grouped(self, tol=1e-8):
        """``[(value, multiplicity), ...]``; multiplicity is None for decimation sets."""
        if self.provenance != "direct":
            return [(float(v), None) for v in self.values]
        groups = []
        for v in self.values:
            if groups and abs(v - groups[-1][0]) <= tol * max(1.0, abs(v)):
                groups[-1][1] += 1
            else:
                groups.append([float(v), 1])
        return [(v, k) for v, k in groups]


def _seeds(d):
    # (value, first level at which it appears; it reappears at every later level)
    seeds = [(2.0, 1), (float(d + 2), 1)]
    # for d >= 4 the level-1 interior has d(d-1)/2 > d vertices and the
    # remaining eigenvalues already sit at 2d
    seeds.append((float(2 * d), 1 if d >= 4 else 2))
    return seeds


def _dedup(values):
    out = []
    for v in sorted(values):
        if not out or v - out[-1] > DEDUP_TOL:
            out.append(v)
    return out


def decimation_spectrum(d, m):
    """Candidate Dirichlet eigenvalues at level m generated by the inverse branches."""
    d = topology.require_supported(d)
    m = topology._check_int("m", m, 1)
    bound = spectral_bound(d)
    current = []
    for level in range(1, m + 1):
        nxt = []
        for x in current:
            for sign in "-+":
                try:
                    nxt.append(phi_branch(d, x, sign))
                except DomainError:
                    pass
        nxt.extend(v for v, start in _seeds(d) if start <= level)
        current = _dedup(v for v in nxt if -DEDUP_TOL <= v <= bound + DEDUP_TOL)
    return SpectrumSet(m, np.array(current), "decimation")


def smallest_eigenvalue(d, m):
    """Bottom of the Dirichlet spectrum: the '-' branch iterated from the seed 2."""
    d = topology.require_supported(d)
    m = topology._check_int("m", m, 1)
    x = 2.0
    for _ in range(m - 1):
        x = phi_branch(d, x, "-")
    return x


def spectral_bound(d):
    return 2.0 * d


def cfl_max_step(d, m):
    """Largest explicit step with |1 - h c_m lambda| <= 1 for all lambda in [0, 2d]."""
    return 2.0 / (d * d * (d + 2) ** m)


def direct_spectrum(lap):
    """All eigenvalues of a restricted Laplacian via a dense symmetric eigensolve."""
    n = lap.n
    if n > DIRECT_DIMENSION_CAP:
        raise DomainError(
            f"dimension {n} exceeds the dense eigensolver cap {DIRECT_DIMENSION_CAP}; "
            "use decimation mode instead"
        )
    if n == 0:
        return SpectrumSet(lap.m, np.zeros(0), "direct")
    values = np.linalg.eigvalsh(lap.matrix.toarray().astype(float))
    return SpectrumSet(lap.m, np.sort(values), "direct")


def containment_outliers(direct, generated, tol=1e-8):
    """Directly computed eigenvalues with no generated value within ``tol``."""
    gen = np.asarray(generated.values)
    if gen.size == 0:
        return list(direct.values)
    pos = np.searchsorted(gen, direct.values)
    lo = gen[np.clip(pos - 1, 0, gen.size - 1)]
    hi = gen[np.clip(pos, 0, gen.size - 1)]
    gap = np.minimum(np.abs(direct.values - lo), np.abs(direct.values - hi))
    return [float(v) for v, g in zip(direct.values, gap) if g > tol]
