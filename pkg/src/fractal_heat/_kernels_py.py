"""Pure numpy/scipy versions of the compiled kernels (same signatures)."""
import numpy as np

NAME = "python"


def explicit_steps(L, hc, u, nsteps, probes, probe_out, sq_out, sup_out):
    with np.errstate(over="ignore", invalid="ignore"):
        return _explicit(L, hc, u, nsteps, probes, probe_out, sq_out, sup_out)


def _explicit(L, hc, u, nsteps, probes, probe_out, sq_out, sup_out):
    # overflow is reported through the returned flag, not as a warning
    done = 0
    for k in range(nsteps):
        u[:] = u - hc * (L @ u)
        probe_out[k] = u[probes]
        sq_out[k] = np.dot(u, u)
        sup = np.max(np.abs(u)) if u.size else 0.0
        sup_out[k] = sup
        done = k + 1
        if not np.isfinite(sup):
            return done, False
    return done, True


def cg_solve(L, hc, b, x, tol, maxiter):
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x[:] = 0.0
        return 0, 0.0
    r = b - (x + hc * (L @ x))
    p = r.copy()
    rr = np.dot(r, r)
    it = 0
    while np.sqrt(rr) > tol * bnorm and it < maxiter:
        q = p + hc * (L @ p)
        alpha = rr / np.dot(p, q)
        x += alpha * p
        r -= alpha * q
        rr_new = np.dot(r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    return it, float(np.sqrt(rr) / bnorm)
