"""Snapshot generator: 2D acoustic wave equation in Hamiltonian form.

    d/dt rho = -div v,   d/dt v = -grad rho   on [-4, 4)^2, periodic,

with initial density ``exp(-(mu + 6)^2 ((x1 - 2)^2 + (x2 - 2)^2))`` and zero
velocity, discretized by periodic central differences on cell centers and
integrated with classical RK4. Snapshots stack (rho, v1, v2), each field
flattened column-major, so N = 3 g^2.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import ConfigurationError

DOMAIN_MIN = -4.0
DOMAIN_LENGTH = 8.0
# dt / dx used for the desk-scale defaults (the full-scale run has 5e-3 / (8/600) = 0.375)
DEFAULT_CFL = 0.4
MAX_CFL = 0.5

TRAIN_MUS = tuple((k + 0.5) / 9 for k in range(9))
VALIDATION_MU = 0.25
TEST_MU = 0.75


@dataclass(frozen=True)
class WaveConfig:
    g: int = 64
    dt: float | None = None
    T: float = 8.0
    mu: float = 0.0
    sample_stride: int = 1

    def __post_init__(self):
        if self.g < 8:
            raise ConfigurationError(f"grid size must be >= 8, got {self.g}")
        if self.dt is None:
            object.__setattr__(self, "dt", DEFAULT_CFL * self.dx)
        if not self.dt > 0.0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if self.dt > MAX_CFL * self.dx * (1 + 1e-12):
            raise ConfigurationError(
                f"dt={self.dt} violates dt <= {MAX_CFL} * dx = {MAX_CFL * self.dx}"
            )
        if self.T < 0.0:
            raise ConfigurationError(f"final time must be >= 0, got {self.T}")
        if self.sample_stride < 1:
            raise ConfigurationError(f"sample stride must be >= 1, got {self.sample_stride}")

    @property
    def dx(self):
        return DOMAIN_LENGTH / self.g

    @property
    def n_steps(self):
        return int(math.floor(self.T / self.dt + 1e-9))

    @property
    def n_samples(self):
        return self.n_steps // self.sample_stride + 1

    @property
    def state_dim(self):
        return 3 * self.g * self.g


@dataclass
class WaveState:
    rho: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    t: float = 0.0

    @property
    def g(self):
        return self.rho.shape[0]

    def vector(self):
        return np.concatenate([f.ravel(order="F") for f in (self.rho, self.v1, self.v2)])

    @classmethod
    def from_vector(cls, x, g, t=0.0):
        fields = np.asarray(x, dtype=np.float64).reshape(3, g * g)
        return cls(*(f.reshape((g, g), order="F") for f in fields), t=t)


def grid_coordinates(g):
    """Cell-center coordinates along one axis."""
    dx = DOMAIN_LENGTH / g
    return DOMAIN_MIN + (np.arange(g) + 0.5) * dx


def initial_density(x1, x2, mu):
    return np.exp(-((mu + 6.0) ** 2) * ((x1 - 2.0) ** 2 + (x2 - 2.0) ** 2))


def initial_condition(cfg):
    x = grid_coordinates(cfg.g)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    rho = initial_density(X1, X2, cfg.mu)
    return WaveState(rho, np.zeros_like(rho), np.zeros_like(rho), 0.0)


def rhs(state):
    """Time derivatives ``(d rho, d v1, d v2)`` of the semi-discrete system."""
    inv2dx = state.g / (2.0 * DOMAIN_LENGTH)
    return _kernels.wave_rhs(state.rho, state.v1, state.v2, inv2dx)


def rk4_step(state, dt):
    def shifted(k, h):
        return WaveState(state.rho + h * k[0], state.v1 + h * k[1], state.v2 + h * k[2])

    k1 = rhs(state)
    k2 = rhs(shifted(k1, 0.5 * dt))
    k3 = rhs(shifted(k2, 0.5 * dt))
    k4 = rhs(shifted(k3, dt))
    w = dt / 6.0
    fields = [
        f + w * (a + 2.0 * b + 2.0 * c + d)
        for f, a, b, c, d in zip((state.rho, state.v1, state.v2), k1, k2, k3, k4)
    ]
    return WaveState(*fields, t=state.t + dt)


def iter_snapshots(cfg):
    """Stacked state vectors at every ``sample_stride``-th step, starting at t = 0."""
    state = initial_condition(cfg)
    yield state.vector()
    for step in range(1, cfg.n_steps + 1):
        state = rk4_step(state, cfg.dt)
        if step % cfg.sample_stride == 0:
            yield state.vector()


def trajectory_matrix(cfg):
    return np.column_stack(list(iter_snapshots(cfg)))


def rechunk(columns, width):
    """Group an iterable of column vectors into N x ``width`` blocks (last may be narrower)."""
    if width < 1:
        raise ConfigurationError(f"chunk width must be >= 1, got {width}")
    buf = []
    for col in columns:
        buf.append(col)
        if len(buf) == width:
            yield np.column_stack(buf)
            buf = []
    if buf:
        yield np.column_stack(buf)


def trajectory_stream(cfg, width):
    return rechunk(iter_snapshots(cfg), width)


def wave_stream(base_cfg, mus, width):
    """Chunks of all trajectories in ``mus``, parameter-major and time-minor."""

    def columns():
        for mu in mus:
            yield from iter_snapshots(replace(base_cfg, mu=float(mu)))

    return rechunk(columns(), width)
