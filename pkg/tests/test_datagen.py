import math
from dataclasses import replace

import numpy as np
import pytest

from streamqm import datagen
from streamqm.datagen import (
    TEST_MU,
    TRAIN_MUS,
    VALIDATION_MU,
    WaveConfig,
    WaveState,
    grid_coordinates,
    initial_condition,
    initial_density,
    iter_snapshots,
    rhs,
    rk4_step,
    trajectory_matrix,
    trajectory_stream,
    wave_stream,
)
from streamqm.errors import ConfigurationError


def energy(state):
    return 0.5 * float(np.sum(state.rho**2) + np.sum(state.v1**2) + np.sum(state.v2**2))


def run(cfg, steps=None):
    state = initial_condition(cfg)
    for _ in range(cfg.n_steps if steps is None else steps):
        state = rk4_step(state, cfg.dt)
    return state


def random_state(rng, g=16):
    return WaveState(*(rng.standard_normal((g, g)) for _ in range(3)))


# configuration

def test_defaults():
    cfg = WaveConfig()
    assert cfg.g == 64 and cfg.dx == 0.125
    assert cfg.dt == pytest.approx(0.05)
    assert cfg.n_steps == 160 and cfg.n_samples == 161
    assert cfg.state_dim == 3 * 64 * 64


def test_parameter_sets():
    assert len(TRAIN_MUS) == 9
    assert all(0.0 < mu < 1.0 for mu in TRAIN_MUS)
    np.testing.assert_allclose(np.diff(TRAIN_MUS), 1 / 9)
    assert VALIDATION_MU == 0.25 and TEST_MU == 0.75
    assert VALIDATION_MU not in TRAIN_MUS and TEST_MU not in TRAIN_MUS


def test_config_errors():
    with pytest.raises(ConfigurationError):
        WaveConfig(g=4)
    with pytest.raises(ConfigurationError, match="dt"):
        WaveConfig(g=16, dt=0.26)
    with pytest.raises(ConfigurationError):
        WaveConfig(dt=-1.0)
    with pytest.raises(ConfigurationError):
        WaveConfig(T=-1.0)
    with pytest.raises(ConfigurationError):
        WaveConfig(sample_stride=0)
    WaveConfig(g=16, dt=0.25)


# initial condition

@pytest.mark.parametrize("mu", [0.0, 0.3, 1.0])
def test_initial_density_peak(mu):
    assert initial_density(2.0, 2.0, mu) == 1.0


def test_initial_density_value():
    assert initial_density(3.0, 2.0, 0.0) == pytest.approx(math.exp(-36.0), rel=1e-15)


def test_initial_density_radial_symmetry():
    for d in (0.125, 0.5, -1.25):
        assert initial_density(2.0 + d, 2.0, 0.4) == initial_density(2.0, 2.0 + d, 0.4)


def test_initial_condition_grid():
    cfg = WaveConfig(g=32, mu=0.5)
    s = initial_condition(cfg)
    x = grid_coordinates(32)
    assert x[0] == -4.0 + 0.125 and x[-1] == 4.0 - 0.125
    np.testing.assert_array_equal(s.rho, s.rho.T)
    np.testing.assert_array_equal(s.v1, 0.0)
    np.testing.assert_array_equal(s.v2, 0.0)
    assert s.rho[20, 5] == initial_density(x[20], x[5], 0.5)
    assert s.t == 0.0


def test_state_vector_layout(rng):
    s = random_state(rng, g=8)
    x = s.vector()
    assert x.shape == (192,)
    np.testing.assert_array_equal(x[:64], s.rho.ravel(order="F"))
    np.testing.assert_array_equal(x[128:], s.v2.ravel(order="F"))
    back = WaveState.from_vector(x, 8)
    for a, b in zip((back.rho, back.v1, back.v2), (s.rho, s.v1, s.v2)):
        np.testing.assert_array_equal(a, b)


# right-hand side

def test_rhs_constant_fields(kernel_backend):
    g = 16
    s = WaveState(np.full((g, g), 2.0), np.full((g, g), -1.0), np.full((g, g), 0.5))
    for d in rhs(s):
        np.testing.assert_array_equal(d, 0.0)


def test_rhs_discrete_eigenfunction(kernel_backend):
    g = 32
    dx = 8.0 / g
    x = grid_coordinates(g)
    X1, _ = np.meshgrid(x, x, indexing="ij")
    w = 2 * np.pi / 8
    s = WaveState(np.sin(w * X1), np.zeros((g, g)), np.zeros((g, g)))
    drho, dv1, dv2 = rhs(s)
    np.testing.assert_allclose(dv1, -(np.sin(w * dx) / dx) * np.cos(w * X1), atol=1e-14)
    np.testing.assert_array_equal(dv2, 0.0)
    np.testing.assert_array_equal(drho, 0.0)


def test_rhs_sums_to_zero(rng, kernel_backend):
    for d in rhs(random_state(rng)):
        assert abs(np.sum(d)) < 1e-12


def test_rhs_is_skew(rng):
    a, b = random_state(rng), random_state(rng)
    inner = sum(np.sum(x * y) for x, y in zip((a.rho, a.v1, a.v2), rhs(b)))
    inner_t = sum(np.sum(x * y) for x, y in zip(rhs(a), (b.rho, b.v1, b.v2)))
    assert abs(inner + inner_t) < 1e-11


# time stepping

def test_rk4_zero_fixed_point():
    z = np.zeros((16, 16))
    out = rk4_step(WaveState(z, z, z), 0.1)
    for f in (out.rho, out.v1, out.v2):
        np.testing.assert_array_equal(f, 0.0)
    assert out.t == 0.1


def test_rk4_linearity(rng):
    s = random_state(rng)
    a = 3.7
    scaled = rk4_step(WaveState(a * s.rho, a * s.v1, a * s.v2), 0.2)
    ref = rk4_step(s, 0.2)
    for x, y in zip((scaled.rho, scaled.v1, scaled.v2), (ref.rho, ref.v1, ref.v2)):
        np.testing.assert_allclose(x, a * y, rtol=0, atol=1e-13 * np.max(np.abs(a * y)))


def test_rk4_mass_per_step(rng):
    s = random_state(rng)
    s.rho += 5.0
    m0 = np.sum(s.rho)
    assert abs(np.sum(rk4_step(s, 0.2).rho) - m0) <= 1e-12 * abs(m0)


def rk4_amplification(y):
    z = 1j * y
    return np.abs(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24)


@pytest.mark.parametrize("g,mu,steps", [(64, 0.0, 200), (32, 1.0, 50)])
def test_energy_matches_fourier_oracle(g, mu, steps):
    """Energy decay equals the per-mode RK4 amplification of the semi-discrete system."""
    cfg = WaveConfig(g=g, mu=mu, T=1e9)
    state = initial_condition(cfg)
    rho_hat = np.fft.fft2(state.rho)
    k = 2 * np.pi * np.fft.fftfreq(g)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    lam = np.sqrt(np.sin(K1) ** 2 + np.sin(K2) ** 2) / cfg.dx
    amp = rk4_amplification(lam * cfg.dt)
    mode_energy = 0.5 * np.abs(rho_hat) ** 2 / g**2
    for n in range(1, steps + 1):
        state = rk4_step(state, cfg.dt)
        if n % 25 == 0 or n == steps:
            predicted = float(np.sum(mode_energy * amp ** (2 * n)))
            assert energy(state) == pytest.approx(predicted, rel=1e-10)


@pytest.mark.xfail(strict=True, reason="RK4 damping of under-resolved pulse modes exceeds 1e-6 at the desk CFL")
def test_energy_drift_regression_guard():
    cfg = WaveConfig(mu=0.0)
    state = initial_condition(cfg)
    e0 = energy(state)
    for _ in range(200):
        state = rk4_step(state, cfg.dt)
    assert abs(energy(state) - e0) / e0 < 1e-6


def test_energy_never_grows():
    cfg = WaveConfig(g=32, mu=0.5)
    state = initial_condition(cfg)
    e = energy(state)
    for _ in range(40):
        state = rk4_step(state, cfg.dt)
        e_new = energy(state)
        assert e_new <= e * (1 + 1e-14)
        e = e_new


# streams

def test_column_count():
    for T, stride in ((1.0, 1), (1.0, 3), (2.0, 4), (0.33, 2)):
        cfg = WaveConfig(g=16, T=T, sample_stride=stride)
        cols = sum(C.shape[1] for C in trajectory_stream(cfg, 7))
        assert cols == math.floor(T / (cfg.dt * stride) + 1e-9) + 1 == cfg.n_samples


def test_zero_final_time():
    cfg = WaveConfig(g=16, T=0.0, mu=0.2)
    chunks = list(trajectory_stream(cfg, 5))
    assert len(chunks) == 1 and chunks[0].shape == (3 * 256, 1)
    np.testing.assert_array_equal(chunks[0][:, 0], initial_condition(cfg).vector())


def test_stream_deterministic():
    cfg = WaveConfig(g=16, T=1.0, mu=0.3)
    a = [C.tobytes() for C in trajectory_stream(cfg, 4)]
    b = [C.tobytes() for C in trajectory_stream(cfg, 4)]
    assert a == b


def test_stream_backends_identical(monkeypatch):
    cfg = WaveConfig(g=16, T=1.0, mu=0.3)
    monkeypatch.setenv("STREAMQM_NUMBA", "0")
    a = trajectory_matrix(cfg)
    monkeypatch.setenv("STREAMQM_NUMBA", "1")
    b = trajectory_matrix(cfg)
    np.testing.assert_array_equal(a, b)


def test_wave_stream_order():
    base = WaveConfig(g=16, T=0.5)
    mus = (0.1, 0.9)
    chunks = list(wave_stream(base, mus, 4))
    S = np.hstack(chunks)
    ref = np.hstack([trajectory_matrix(replace(base, mu=mu)) for mu in mus])
    np.testing.assert_array_equal(S, ref)
    assert all(C.shape[1] == 4 for C in chunks[:-1])


def test_rechunk_width_error():
    with pytest.raises(ConfigurationError):
        list(datagen.rechunk(iter([]), 0))


def test_snapshot_times():
    cfg = WaveConfig(g=16, T=1.0, sample_stride=2)
    snaps = list(iter_snapshots(cfg))
    assert len(snaps) == cfg.n_samples
