import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractal_heat import _backend, laplacian, spectral, stepper
from fractal_heat.errors import CFLViolation, DivergenceError, SolverError
from fractal_heat.topology import SimplexSpec

BACKENDS = _backend.available()


def dense_scheme(d, m, h, kind):
    lap = laplacian.restricted_laplacian(d, m).toarray().astype(float)
    hc = h * laplacian.normalization(d, m).value
    eye = np.eye(lap.shape[0])
    return eye - hc * lap if kind == "explicit" else np.linalg.inv(eye + hc * lap)


def state(values, d, m):
    return stepper.StateVector(np.asarray(values, dtype=float), d, m)


def test_spike_initial():
    np.testing.assert_array_equal(stepper.spike_initial(SimplexSpec(3, 1), 1).values, [1, 0, 0])
    u = stepper.spike_initial(SimplexSpec(4, 1), 3).values
    assert u.shape == (6,) and u.sum() == 1 and u[2] == 1


@pytest.mark.parametrize("vid", [0, 4, 99])
def test_spike_initial_rejects_boundary_and_range(vid):
    with pytest.raises(ValueError):
        stepper.spike_initial(SimplexSpec(4, 1), vid)


def test_state_vector_validation():
    with pytest.raises(ValueError):
        state([1.0, 2.0], 3, 1)
    with pytest.raises(ValueError):
        state([1.0, np.nan, 0.0], 3, 1)


@pytest.mark.parametrize("kw", [dict(kind="crank"), dict(T=0), dict(N=0), dict(N=2.5),
                                dict(cg_rel_tol=1e-2), dict(cfl_policy="maybe")])
def test_scheme_config_validation(kw):
    with pytest.raises(ValueError):
        stepper.SchemeConfig(**kw)


def test_scheme_config_default_policy():
    assert stepper.SchemeConfig("explicit").cfl_policy == "enforce"
    assert stepper.SchemeConfig("implicit").cfl_policy == "ignore"


@pytest.mark.parametrize("kind", ["explicit", "implicit"])
def test_zero_is_a_fixed_point(kind):
    view = stepper.SchemeMatrixView(3, 2, 1e-3)
    u = state(np.zeros(12), 3, 2)
    out = stepper.explicit_step(u, view) if kind == "explicit" else stepper.implicit_step(u, view)
    assert np.all(out.values == 0) and out.step == 1


def test_explicit_eigenvector():
    lap = laplacian.restricted_laplacian(3, 2).toarray().astype(float)
    w, v = np.linalg.eigh(lap)
    k = int(np.argmin(np.abs(w - 5)))
    h = 1e-3
    view = stepper.SchemeMatrixView(3, 2, h)
    out = stepper.explicit_step(state(v[:, k], 3, 2), view)
    np.testing.assert_allclose(out.values, (1 - h * view.c * w[k]) * v[:, k], atol=1e-13)


def test_implicit_eigenvector():
    lap = laplacian.restricted_laplacian(4, 2).toarray().astype(float)
    w, v = np.linalg.eigh(lap)
    view = stepper.SchemeMatrixView(4, 2, 0.05)
    for k in (0, 7, len(w) - 1):
        out = stepper.implicit_step(state(v[:, k], 4, 2), view)
        np.testing.assert_allclose(out.values, v[:, k] / (1 + view.hc * w[k]), atol=1e-9)


def test_implicit_constants_level_one():
    view = stepper.SchemeMatrixView(3, 1, 0.1)
    assert view.c == 7.5
    out = stepper.implicit_step(state([1, 1, 1], 3, 1), view)
    np.testing.assert_allclose(out.values, [0.4, 0.4, 0.4], rtol=1e-10)


def test_implicit_step_reports_solver_failure():
    view = stepper.SchemeMatrixView(3, 4, 1.0)
    u = stepper.spike_initial(SimplexSpec(3, 4), 1)
    with pytest.raises(SolverError) as info:
        stepper.implicit_step(u, view, tol=1e-12, max_iter=2)
    assert info.value.residual > 1e-12


def test_dimension_mismatch():
    view = stepper.SchemeMatrixView(3, 2, 1e-3)
    with pytest.raises(ValueError):
        stepper.explicit_step(state(np.zeros(3), 3, 1), view)


def test_check_cfl():
    assert stepper.check_cfl(5e-6, 3, 6).satisfied
    assert stepper.check_cfl(2 / 9, 3, 0).satisfied
    assert not stepper.check_cfl(1e-3, 3, 6).satisfied
    assert stepper.check_cfl(1e-5, 4, 5).h_max == pytest.approx(1.6075e-5, rel=1e-4)


def test_norm_2_scaled():
    assert stepper.norm_2_scaled(state(np.zeros(3), 3, 1)) == 0
    assert stepper.norm_2_scaled(state([1, 1, 1], 3, 1)) == pytest.approx(1.0)
    assert stepper.norm_2_scaled(stepper.spike_initial(SimplexSpec(3, 2), 1)) == pytest.approx(1 / 3)


@pytest.mark.parametrize("kind", ["explicit", "implicit"])
@pytest.mark.parametrize("d", [3, 4])
def test_simulate_matches_dense_powers(kind, d):
    spec = SimplexSpec(d, 3)
    h = 0.5 * spectral.cfl_max_step(d, 3)
    cfg = stepper.SchemeConfig(kind, 25 * h, 25, cg_rel_tol=1e-12)
    u0 = stepper.spike_initial(spec, 1)
    traj = stepper.simulate(spec, cfg, u0, probes=[1, 2], sample_every=5)
    mat = dense_scheme(d, 3, h, kind)
    u = u0.values.copy()
    slots = stepper.interior_slots(spec, [1, 2])
    for k in range(1, 26):
        u = mat @ u
        np.testing.assert_allclose(traj.probe_values[k], u[slots], atol=1e-10)
        if k % 5 == 0:
            np.testing.assert_allclose(traj.snapshots[k], u, atol=1e-10)
    assert sorted(traj.snapshots) == [0, 5, 10, 15, 20, 25]
    assert traj.times[-1] == pytest.approx(cfg.T)


def test_simulate_zero_steps():
    spec = SimplexSpec(3, 2)
    u0 = stepper.spike_initial(spec, 1)
    traj = stepper.simulate(spec, stepper.SchemeConfig("explicit", 1e-3, 1), u0, steps=0)
    assert traj.steps == 0
    assert list(traj.snapshots) == [0]
    np.testing.assert_array_equal(traj.final.values, u0.values)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
@pytest.mark.parametrize("kind", ["explicit", "implicit"])
def test_backends_agree(kind):
    spec = SimplexSpec(3, 4)
    h = spectral.cfl_max_step(3, 4) * (0.9 if kind == "explicit" else 40)
    cfg = stepper.SchemeConfig(kind, 300 * h, 300)
    u0 = stepper.spike_initial(spec, 1)
    runs = [stepper.simulate(spec, cfg, u0, probes=[1, 5], sample_every=100,
                             kernels=_backend.load(name)) for name in BACKENDS]
    a, b = runs
    tol = 0 if kind == "explicit" else 1e-9
    np.testing.assert_allclose(a.probe_values, b.probe_values, rtol=0, atol=tol)
    # the kernels sum squares in different orders
    np.testing.assert_allclose(a.norm2, b.norm2, rtol=1e-14, atol=tol)
    for k in a.snapshots:
        np.testing.assert_allclose(a.snapshots[k], b.snapshots[k], rtol=0, atol=tol)


def test_backend_override_rejects_unknown():
    with pytest.raises(ValueError):
        _backend.load("fortran")


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(["explicit", "implicit"]))
def test_linearity(alpha, beta, kind):
    spec = SimplexSpec(3, 3)
    rng = np.random.default_rng(7)
    u, v = rng.standard_normal((2, spec.n_interior))
    h = 0.7 * spectral.cfl_max_step(3, 3)
    cfg = stepper.SchemeConfig(kind, 20 * h, 20, cg_rel_tol=1e-12)

    def run(x):
        return stepper.simulate(spec, cfg, state(x, 3, 3), sample_every=20).final.values

    lhs = run(alpha * u + beta * v)
    rhs = alpha * run(u) + beta * run(v)
    scale = max(1.0, np.max(np.abs(rhs)))
    tol = 1e-12 if kind == "explicit" else 1e-9
    assert np.max(np.abs(lhs - rhs)) <= tol * scale * 10


@pytest.mark.parametrize("d", [3, 4])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_amplification_inside_unit_interval_at_cfl(d, m):
    lam = spectral.direct_spectrum(laplacian.restricted_laplacian(d, m)).values
    gamma = 1 - spectral.cfl_max_step(d, m) * laplacian.normalization(d, m).value * lam
    assert np.all(gamma >= -1 - 1e-12) and np.all(gamma <= 1)


def test_cfl_enforce_and_warn():
    spec = SimplexSpec(3, 2)
    u0 = stepper.spike_initial(spec, 1)
    h = 2 * spectral.cfl_max_step(3, 2)
    with pytest.raises(CFLViolation):
        stepper.simulate(spec, stepper.SchemeConfig("explicit", 5 * h, 5), u0)
    with pytest.warns(RuntimeWarning):
        stepper.simulate(spec, stepper.SchemeConfig("explicit", 5 * h, 5, cfl_policy="warn"), u0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        stepper.simulate(spec, stepper.SchemeConfig("explicit", 5 * h, 5, cfl_policy="ignore"), u0)


def test_divergence_is_reported():
    spec = SimplexSpec(3, 2)
    u0 = stepper.spike_initial(spec, 1)
    h = 50 * spectral.cfl_max_step(3, 2)
    cfg = stepper.SchemeConfig("explicit", 5000 * h, 5000, cfl_policy="ignore")
    with pytest.raises(DivergenceError):
        stepper.simulate(spec, cfg, u0)
    traj = stepper.simulate(spec, cfg, u0, max_growth=1e6)
    assert traj.halted_at is not None and traj.halted_at < 5000
    assert traj.steps == traj.halted_at


@pytest.mark.parametrize("d", [3, 4])
def test_implicit_positivity(d):
    spec = SimplexSpec(d, 3)
    cfg = stepper.SchemeConfig("implicit", 1.0, 10)
    traj = stepper.simulate(spec, cfg, stepper.spike_initial(spec, 1), sample_every=1)
    for snap in traj.snapshots.values():
        assert snap.min() >= -10 * cfg.cg_rel_tol


def test_explicit_and_implicit_agree_for_small_steps():
    d, m = 3, 3
    spec = SimplexSpec(d, m)
    h = spectral.cfl_max_step(d, m) / 10
    u0 = stepper.spike_initial(spec, 1)
    finals = [stepper.simulate(spec, stepper.SchemeConfig(k, 200 * h, 200, cg_rel_tol=1e-12),
                               u0, sample_every=200).final.values
              for k in ("explicit", "implicit")]
    bound = 10 * h * laplacian.normalization(d, m).value * 2 * d * np.max(np.abs(u0.values))
    assert np.max(np.abs(finals[0] - finals[1])) <= bound
