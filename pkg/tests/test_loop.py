import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdsysid import kernels
from cdsysid.dynamics import modal_comp_sensitivity
from cdsysid.loop import (
    settle_length,
    simulate_closed_loop,
    simulate_modal_loop,
    simulate_open_loop,
)
from cdsysid.modal import generate_synthetic_response, to_modal

from conftest import case_params


def zeros(N, n):
    return np.zeros((N, n))


def test_zero_inputs_zero_outputs(model8, params8):
    run = simulate_closed_loop(model8, params8, zeros(200, 8), zeros(200, 8), zeros(200, 8))
    assert not run.y.any() and not run.u.any()
    y, u = simulate_modal_loop(params8, 0, model8.sigma[0], np.zeros(50), np.zeros(50), np.zeros(50))
    assert not y.any() and not u.any()


def test_modal_fields_consistent(model8, params8, rng):
    d = rng.standard_normal((300, 8))
    run = simulate_closed_loop(model8, params8, d, 0.1 * rng.standard_normal((300, 8)), zeros(300, 8))
    np.testing.assert_allclose(run.y_modal, to_modal(run.y, model8.U), atol=1e-10)
    np.testing.assert_allclose(run.u_modal, to_modal(run.u, model8.V), atol=1e-10)
    # per-sample norm preservation between u and its modal image
    np.testing.assert_allclose(np.linalg.norm(run.u, axis=1), np.linalg.norm(run.u_modal, axis=1), rtol=1e-10)


def test_constant_reference_settles(model8, params8):
    N, i, c = 4000, 2, 3.0
    r = np.outer(np.full(N, c), model8.U[:, i])
    run = simulate_closed_loop(model8, params8, zeros(N, 8), zeros(N, 8), r)
    final = run.y_modal[-1]
    assert final[i] == pytest.approx(c, abs=1e-6)
    assert np.max(np.abs(np.delete(final, i))) < 1e-6


def test_unit_step_unit_gamma():
    params = case_params(np.array([2.0]), mu=0.0)
    assert params.gamma[0] == 1.0
    N = 3000
    y, u = simulate_modal_loop(params, 0, 2.0, np.zeros(N), np.zeros(N), np.ones(N))
    assert y[-1] == pytest.approx(1.0, abs=1e-9)
    assert u[-1] == pytest.approx(0.5, abs=1e-9)


def test_sinusoid_gain_matches_comp_sensitivity(model8, params8):
    Ts = params8.Ts
    N, i = 20000, 0
    for f in (20.0, 150.0, 400.0):
        w = 2 * np.pi * f
        rho = np.sin(w * np.arange(N) * Ts)
        y, _ = simulate_modal_loop(params8, i, model8.sigma[i], np.zeros(N), np.zeros(N), rho)
        amp = np.max(np.abs(y[N // 2:]))
        assert amp == pytest.approx(abs(modal_comp_sensitivity(params8, i, w)), rel=0.02)


def test_output_decomposition(model8, params8, rng):
    # y = S d + T (r - n) in discrete time: d and r - n enter through complementary paths
    N, i, s = 2000, 3, model8.sigma[3]
    d, n, r = rng.standard_normal((3, N))
    y_all, u_all = simulate_modal_loop(params8, i, s, d, n, r)
    y_d, u_d = simulate_modal_loop(params8, i, s, d, np.zeros(N), np.zeros(N))
    y_rn, u_rn = simulate_modal_loop(params8, i, s, np.zeros(N), np.zeros(N), r - n)
    np.testing.assert_allclose(y_all, y_d + y_rn, atol=1e-10)
    # u depends only on d + n - r
    y2, u2 = simulate_modal_loop(params8, i, s, d + n - r, np.zeros(N), np.zeros(N))
    np.testing.assert_allclose(u_all, u2, atol=1e-10)


def test_mimo_matches_modal(model8, params8, rng):
    N = 1500
    d, n, r = (rng.standard_normal((N, 8)) for _ in range(3))
    a = simulate_closed_loop(model8, params8, d, n, r, method="modal")
    b = simulate_closed_loop(model8, params8, d, n, r, method="mimo")
    assert np.linalg.norm(a.y_modal - b.y_modal) <= 1e-9 * np.linalg.norm(b.y_modal)
    assert np.linalg.norm(a.u_modal - b.u_modal) <= 1e-9 * np.linalg.norm(b.u_modal)


def test_mimo_matches_modal_non_square(rng):
    model = generate_synthetic_response(5, 7, 50.0, 1.0, seed=9)
    params = case_params(model.sigma)
    N = 800
    d, n, r = (rng.standard_normal((N, 5)) for _ in range(3))
    a = simulate_closed_loop(model, params, d, n, r)
    b = simulate_closed_loop(model, params, d, n, r, method="mimo")
    np.testing.assert_allclose(a.y, b.y, atol=1e-9 * np.abs(b.y).max())
    np.testing.assert_allclose(a.u, b.u, atol=1e-9 * np.abs(b.u).max())


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernel not built")
def test_backends_agree(model8, params8, rng):
    N = 3000
    d, n, r = (rng.standard_normal((N, 8)) for _ in range(3))
    a = simulate_closed_loop(model8, params8, d, n, r, backend="cython")
    b = simulate_closed_loop(model8, params8, d, n, r, backend="python")
    np.testing.assert_allclose(a.y, b.y, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a.u, b.u, rtol=1e-12, atol=1e-12)


def test_unknown_backend(model8, params8):
    with pytest.raises(ValueError):
        simulate_closed_loop(model8, params8, zeros(5, 8), zeros(5, 8), zeros(5, 8), backend="fortran")


@pytest.mark.parametrize("bad", ["shape", "nan", "inf"])
def test_input_validation(model8, params8, bad):
    d = zeros(10, 8)
    n = zeros(10, 8) if bad != "shape" else zeros(9, 8)
    if bad == "nan":
        d[3, 1] = np.nan
    elif bad == "inf":
        d[3, 1] = np.inf
    with pytest.raises(ValueError):
        simulate_closed_loop(model8, params8, d, n, zeros(10, 8))


def test_unknown_method(model8, params8):
    with pytest.raises(ValueError):
        simulate_closed_loop(model8, params8, zeros(5, 8), zeros(5, 8), zeros(5, 8), method="lqr")


def test_nonpositive_sigma(params8):
    with pytest.raises(ValueError):
        simulate_modal_loop(params8, 0, 0.0, np.zeros(3), np.zeros(3), np.zeros(3))


def test_controller_model_mismatch(model8, model165, params165):
    with pytest.raises(ValueError):
        simulate_closed_loop(model8, params165, zeros(5, 8), zeros(5, 8), zeros(5, 8))


def test_saturation_counted_not_enforced(model8, params8):
    N = 500
    r = np.outer(np.full(N, 100.0), model8.U[:, 7])
    run = simulate_closed_loop(model8, params8, zeros(N, 8), zeros(N, 8), r, u_max=1.0, y_max=1.0)
    assert run.saturation["u_exceed"] > 0 and run.saturation["y_exceed"] > 0
    assert np.max(np.abs(run.u)) > 1.0


def test_open_loop(rng):
    d = rng.standard_normal((20, 4))
    run = simulate_open_loop(d, np.zeros_like(d))
    np.testing.assert_array_equal(run.y, d)
    assert not run.u.any()
    assert not simulate_open_loop(np.zeros((5, 2)), np.zeros((5, 2))).y.any()
    with pytest.raises(ValueError):
        simulate_open_loop(np.zeros((5, 2)), np.zeros((4, 2)))


def test_settle_length(params165, params8):
    assert settle_length(params165, 10_000) == 2500
    s = settle_length(params8, 10_000)
    assert 0 < s < 2500


@settings(max_examples=15, deadline=None)
@given(alpha=st.floats(-5, 5), beta=st.floats(-5, 5), seed=st.integers(0, 2**31))
def test_linearity(model8, params8, alpha, beta, seed):
    rng = np.random.default_rng(seed)
    N = 300
    d1, d2, n1, n2, r1, r2 = (rng.standard_normal((N, 8)) for _ in range(6))
    a = simulate_closed_loop(model8, params8, d1, n1, r1)
    b = simulate_closed_loop(model8, params8, d2, n2, r2)
    c = simulate_closed_loop(model8, params8, alpha * d1 + beta * d2, alpha * n1 + beta * n2,
                             alpha * r1 + beta * r2)
    scale = max(1.0, np.abs(c.y).max())
    np.testing.assert_allclose(c.y, alpha * a.y + beta * b.y, atol=1e-10 * scale)
    np.testing.assert_allclose(c.u, alpha * a.u + beta * b.u, atol=1e-10 * max(1.0, np.abs(c.u).max()))


def test_pure_python_fallback_selected_by_env():
    import os
    import subprocess
    import sys

    env = dict(os.environ, CDSYSID_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from cdsysid import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
