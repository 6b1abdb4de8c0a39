import numpy as np
import pytest
from scipy.signal import welch

from cdsysid.disturbance import (
    DisturbanceSpec,
    load_timeseries,
    save_timeseries,
    synth_disturbance,
    synth_modal_disturbance,
    synth_noise,
)
from cdsysid.modal import generate_synthetic_response, to_modal


@pytest.fixture(scope="module")
def model():
    return generate_synthetic_response(6, 6, 10.0, 1.0, seed=5)


def spec(model, **kw):
    args = dict(scale=0.01, corner_hz=50.0, noise_std=0.2, seed=7) | kw
    return DisturbanceSpec(model, **args)


def test_zero_scale_gives_zeros(model):
    assert not synth_disturbance(spec(model, scale=0.0), 100).any()
    assert not synth_noise(spec(model, noise_std=0.0), 100).any()


def test_determinism(model):
    s = spec(model)
    assert synth_disturbance(s, 500).tobytes() == synth_disturbance(s, 500).tobytes()
    assert synth_noise(s, 500).tobytes() == synth_noise(s, 500).tobytes()
    assert not np.array_equal(synth_disturbance(s, 500), synth_disturbance(spec(model, seed=8), 500))
    # realizations are independent draws
    assert not np.array_equal(synth_disturbance(s, 500, 0), synth_disturbance(s, 500, 1))


def test_modal_rms_ratio(model):
    s = spec(model)
    y = to_modal(synth_disturbance(s, 100_000), model.U)
    rms = np.sqrt(np.mean(y**2, axis=0))
    expected = (model.sigma / model.sigma[0]) ** 2
    np.testing.assert_allclose(rms / rms[0], expected, rtol=0.10)
    np.testing.assert_allclose(rms, s.modal_rms, rtol=0.10)


def test_plateau_scales_with_sigma_squared(model):
    s = spec(model)
    x = synth_modal_disturbance(s, 100_000)
    f, pxx = welch(x, fs=s.fs, nperseg=1024, axis=0)
    plateau = np.sqrt(np.mean(pxx[(f > 0) & (f < 100)], axis=0))
    np.testing.assert_allclose(plateau / plateau[0], (model.sigma / model.sigma[0]) ** 2, rtol=0.10)
    # rolled off by roughly 1/f well above the corner
    hi = np.sqrt(np.mean(pxx[(f > 900) & (f < 1100)], axis=0))
    assert np.all(hi / plateau < 0.1)


def test_independent_of_n_u():
    a = generate_synthetic_response(4, 4, 10.0, 1.0, seed=2)
    b = generate_synthetic_response(4, 9, 10.0, 1.0, seed=2)
    # same U and sigma shared between models -> identical disturbances
    b_same_u = type(b)(R=(a.U * a.sigma) @ b.V.T, U=a.U, sigma=a.sigma, V=b.V)
    np.testing.assert_array_equal(synth_disturbance(spec(a), 200), synth_disturbance(spec(b_same_u), 200))


def test_noise_statistics(model):
    x = synth_noise(spec(model, noise_std=0.3), 100_000)
    np.testing.assert_allclose(x.std(axis=0), 0.3, rtol=0.05)
    c = np.corrcoef(x.T)
    assert np.max(np.abs(c - np.eye(6))) <= 0.05


def test_invalid_specs(model):
    for kw in (dict(scale=-1.0), dict(noise_std=-0.1), dict(corner_hz=0.0), dict(corner_hz=6000.0)):
        with pytest.raises(ValueError):
            spec(model, **kw)
    with pytest.raises(ValueError):
        synth_disturbance(spec(model), 0)
    with pytest.raises(ValueError):
        synth_noise(spec(model), 0)


def test_timeseries_roundtrip(tmp_path, rng):
    x = rng.standard_normal((3, 4)) * 10.0 ** rng.integers(-20, 20, (3, 4))
    save_timeseries(tmp_path / "x.csv", x, 1e-4)
    back = load_timeseries(tmp_path / "x.csv", 4)
    assert back.shape == (3, 4)
    assert back.tobytes() == x.tobytes()


@pytest.mark.parametrize("body", [
    "t,ch_0\n0,1\n1e-4,nan\n",
    "t,ch_0\n0,1\n1e-4,inf\n",
    "t,ch_0\n0,1,2\n",
    "t,ch_0\n0,abc\n",
    "time,ch_0\n0,1\n",
    "t,ch_1\n0,1\n",
    "",
])
def test_malformed_timeseries(tmp_path, body):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(ValueError):
        load_timeseries(p)


def test_channel_mismatch(tmp_path):
    save_timeseries(tmp_path / "x.csv", np.zeros((2, 3)), 1e-4)
    with pytest.raises(ValueError):
        load_timeseries(tmp_path / "x.csv", 4)
