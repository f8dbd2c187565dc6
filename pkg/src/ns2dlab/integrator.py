"""Time stepping of the truncated stochastic vorticity equation.

The stochastic scheme is an exponential Euler-Maruyama step

    w' = E (w + dt N(w) + Q dW),    E = diag(exp(-nu |k|^2 dt)),

where ``N(w)`` is the transport nonlinearity.  Its exact derivative is the
discrete tangent map used by :mod:`ns2dlab.tangent`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .forcing import Mode
from .spectral import (
    ConfigurationError,
    SpectralGrid,
    nonlinearity_fft,
    sobolev_norm_sq,
)

SCHEMES = ("exp-euler-maruyama", "rk4")


class IntegrationError(RuntimeError):
    def __init__(self, step: int, msg: str = "non-finite state"):
        super().__init__(f"{msg} at step {step}")
        self.step = step


@dataclass(frozen=True)
class NoiseModel:
    """Forced modes with amplitudes; column n of Q is q_n times a unit basis vector."""

    modes: tuple
    amplitudes: tuple

    def __post_init__(self):
        modes = tuple(Mode(int(k[0]), int(k[1])) for k in self.modes)
        amps = tuple(float(q) for q in self.amplitudes)
        if len(modes) != len(amps):
            raise ConfigurationError("modes and amplitudes differ in length")
        if len(set(modes)) != len(modes):
            raise ConfigurationError("duplicate forced mode")
        if any(k == (0, 0) for k in modes):
            raise ConfigurationError("the origin cannot be forced")
        if any(not (q > 0) for q in amps):
            raise ConfigurationError("amplitudes must be positive")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def uniform(cls, modes, q: float = 1.0) -> "NoiseModel":
        modes = sorted(Mode(*k) for k in modes)
        return cls(tuple(modes), tuple([q] * len(modes)))

    @classmethod
    def empty(cls) -> "NoiseModel":
        return cls((), ())

    @property
    def m(self) -> int:
        return len(self.modes)

    @property
    def e0(self) -> float:
        return float(sum(q * q for q in self.amplitudes))

    def indices(self, grid: SpectralGrid) -> np.ndarray:
        out = []
        for n, k in enumerate(self.modes):
            if not grid.contains(k):
                raise ConfigurationError(f"forced mode {tuple(k)} (entry {n}) outside truncation N={grid.N}")
            out.append(grid.index[tuple(k)])
        return np.array(out, dtype=np.int64)

    def matrix(self, grid: SpectralGrid) -> np.ndarray:
        Q = np.zeros((grid.dim, self.m))
        Q[self.indices(grid), np.arange(self.m)] = self.amplitudes
        return Q

    def apply(self, grid: SpectralGrid, dW: np.ndarray) -> np.ndarray:
        dW = np.asarray(dW, float)
        out = np.zeros(dW.shape[:-1] + (grid.dim,))
        if self.m:
            out[..., self.indices(grid)] = dW * np.asarray(self.amplitudes)
        return out

    def apply_transpose(self, grid: SpectralGrid, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        return x[..., self.indices(grid)] * np.asarray(self.amplitudes)


@dataclass(frozen=True)
class IntegratorConfig:
    nu: float
    dt: float
    scheme: str = "exp-euler-maruyama"
    seed: int = 0
    nonlinear: bool = True

    def validate(self, noise: NoiseModel | None = None):
        if not (self.dt > 0):
            raise ConfigurationError("dt must be positive")
        if self.nu < 0:
            raise ConfigurationError("nu must be nonnegative")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.nu == 0 and not (self.scheme == "rk4" and (noise is None or noise.m == 0)):
            raise ConfigurationError("nu = 0 is only allowed for the deterministic rk4 scheme without noise")
        return self


class Stepper:
    """Precomputed per-grid data for repeated steps."""

    def __init__(self, grid: SpectralGrid, cfg: IntegratorConfig, noise: NoiseModel, workers=None):
        cfg.validate(noise)
        self.grid = grid
        self.cfg = cfg
        self.noise = noise
        self.E = grid.heat(cfg.nu, cfg.dt)
        self.workers = workers
        self.idx = noise.indices(grid) if noise.m else np.zeros(0, np.int64)
        self.q = np.asarray(noise.amplitudes)

    def drift(self, x: np.ndarray) -> np.ndarray:
        if not self.cfg.nonlinear:
            return np.zeros_like(x)
        return nonlinearity_fft(self.grid, x, self.workers)

    def kick(self, dW: np.ndarray, shape) -> np.ndarray:
        out = np.zeros(shape)
        if self.idx.size:
            out[..., self.idx] = dW * self.q
        return out

    def step(self, x: np.ndarray, dW: np.ndarray | None) -> np.ndarray:
        dt = self.cfg.dt
        if self.cfg.scheme == "rk4":
            return self._rk4(x)
        y = x + dt * self.drift(x)
        if dW is not None and self.idx.size:
            y[..., self.idx] += dW * self.q
        return self.E * y

    def _rk4(self, x):
        dt = self.cfg.dt
        lam = self.cfg.nu * self.grid.ksq

        def f(z):
            return -lam * z + self.drift(z)

        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def step(grid, x, dW, cfg: IntegratorConfig, noise: NoiseModel) -> np.ndarray:
    """One step from real coordinates ``x`` with increment vector ``dW``."""
    dW = None if dW is None else np.asarray(dW, float)
    if dW is not None and dW.shape[-1] != noise.m:
        raise ValueError(f"increment has {dW.shape[-1]} components, noise has {noise.m}")
    out = Stepper(grid, cfg, noise).step(np.asarray(x, float), dW)
    if not np.all(np.isfinite(out)):
        raise IntegrationError(0)
    return out


def n_steps_for(T: float, dt: float) -> int:
    if T < 0:
        raise ValueError("T must be nonnegative")
    return int(math.ceil(T / dt - 1e-9))


@dataclass(frozen=True)
class TrajectoryRecord:
    grid: SpectralGrid
    config: IntegratorConfig
    noise: NoiseModel
    states: np.ndarray = field(repr=False)  # (n+1, dim)
    increments: np.ndarray = field(repr=False)  # (n, m)
    replica: int = 0

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.config.dt

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]

    def step_index(self, t: float) -> int:
        """Grid index of time ``t``; raises if ``t`` is not on the step grid."""
        i = int(round(t / self.config.dt))
        if abs(i * self.config.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not aligned with dt={self.config.dt}")
        if i < 0 or i > self.n_steps:
            raise ValueError(f"time {t} outside trajectory span [0, {self.n_steps * self.config.dt}]")
        return i

    def replay(self) -> "TrajectoryRecord":
        return simulate(
            self.grid, self.x0, self.n_steps * self.config.dt, self.config, self.noise,
            increments=self.increments, replica=self.replica,
        )

    def with_increments(self, increments: np.ndarray) -> "TrajectoryRecord":
        return simulate(
            self.grid, self.x0, self.n_steps * self.config.dt, self.config, self.noise,
            increments=increments, replica=self.replica,
        )

    def diagnostics(self) -> dict:
        """Kinetic energy ``|u|^2``, enstrophy ``|w|^2`` and ``|w|_1^2`` per stored time."""
        g = self.grid
        return {
            "t": self.times,
            "energy": sobolev_norm_sq(g, self.states, -1.0),
            "enstrophy": sobolev_norm_sq(g, self.states, 0.0),
            "hnorm1sq": sobolev_norm_sq(g, self.states, 1.0),
        }


def simulate(grid, x0, T, cfg: IntegratorConfig, noise: NoiseModel,
             increments: np.ndarray | None = None, replica: int = 0,
             workers=None) -> TrajectoryRecord:
    """Integrate ``ceil(T/dt)`` steps, storing every state and increment."""
    n = n_steps_for(T, cfg.dt)
    st = Stepper(grid, cfg, noise, workers)
    x0 = np.asarray(x0, float)
    if x0.shape != (grid.dim,):
        raise ValueError(f"initial state must have {grid.dim} coordinates")
    if increments is None:
        if cfg.scheme == "rk4":
            increments = np.zeros((n, noise.m))
        else:
            increments = _rng.wiener_increments(cfg.seed, replica, 0, n, noise.m, cfg.dt)
    increments = np.asarray(increments, float)
    if increments.shape != (n, noise.m):
        raise ValueError(f"increments must have shape {(n, noise.m)}, got {increments.shape}")
    states = np.empty((n + 1, grid.dim))
    states[0] = x0
    x = x0
    for i in range(n):
        x = st.step(x, increments[i])
        if not np.all(np.isfinite(x)):
            raise IntegrationError(i)
        states[i + 1] = x
    increments = increments.copy()
    states.setflags(write=False)
    increments.setflags(write=False)
    return TrajectoryRecord(grid, cfg, noise, states, increments, replica)


def simulate_ensemble(grid, x0, T, cfg: IntegratorConfig, noise: NoiseModel, replicas,
                      observe=None, every: int = 1, workers=None):
    """Integrate many replicas at once, keeping only observations.

    ``x0`` is a single state or one per replica.  ``observe(i, x, dW)`` is
    called before step ``i`` (and once more at the end with ``dW=None``)
    whenever ``i % every == 0``; its return values are collected.  Returns
    ``(final_states, observations)``.
    """
    replicas = list(replicas)
    n = n_steps_for(T, cfg.dt)
    st = Stepper(grid, cfg, noise, workers)
    x = np.broadcast_to(np.asarray(x0, float), (len(replicas), grid.dim)).copy()
    stream = _rng.IncrementStream(cfg.seed, replicas, noise.m, cfg.dt)
    obs = []
    for i in range(n):
        dW = stream.step(i) if cfg.scheme != "rk4" else None
        if observe is not None and i % every == 0:
            obs.append(observe(i, x, dW))
        x = st.step(x, dW)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(i)
    if observe is not None and n % every == 0:
        obs.append(observe(n, x, None))
    return x, obs


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of increments (same Brownian path, larger dt)."""
    n, m = increments.shape
    if n % factor:
        raise ValueError("number of steps not divisible by factor")
    return increments.reshape(n // factor, factor, m).sum(axis=1)


# --------------------------------------------------------------------------
# energy identity


@dataclass
class EnergyBalance:
    residual: np.ndarray  # per-step discrete residual
    max_abs_residual: float
    mean_dissipation: float  # time average of 2 nu ||w||_1^2
    e0: float
    relative_balance_error: float
    dt: float


def energy_residuals(grid, states, increments, cfg: IntegratorConfig, noise: NoiseModel) -> np.ndarray:
    """Per-step residual of the discrete Ito energy identity.

    ``|w_{i+1}|^2 - |w_i|^2 + 2 nu |w_i|_1^2 dt - 2 <w_i, Q dW_i> - E0 dt``
    """
    dt = cfg.dt
    en = sobolev_norm_sq(grid, states, 0.0)
    h1 = sobolev_norm_sq(grid, states[:-1], 1.0)
    qdw = noise.apply(grid, increments)
    mart = np.sum(states[:-1] * qdw, axis=-1)
    return en[1:] - en[:-1] + 2 * cfg.nu * h1 * dt - 2 * mart - noise.e0 * dt


def energy_balance_report(traj: TrajectoryRecord, burn_in: float = 0.0) -> EnergyBalance:
    if traj.config.scheme == "rk4" and traj.noise.m:
        raise ValueError("energy balance needs the stochastic scheme")
    g, cfg = traj.grid, traj.config
    r = energy_residuals(g, traj.states, traj.increments, cfg, traj.noise)
    i0 = int(round(burn_in / cfg.dt))
    h1 = sobolev_norm_sq(g, traj.states[i0:-1], 1.0)
    diss = float(np.mean(2 * cfg.nu * h1)) if h1.size else float("nan")
    e0 = traj.noise.e0
    return EnergyBalance(
        residual=r,
        max_abs_residual=float(np.max(np.abs(r))) if r.size else 0.0,
        mean_dissipation=diss,
        e0=e0,
        relative_balance_error=abs(diss - e0) / e0 if e0 else float("nan"),
        dt=cfg.dt,
    )


def stationary_dissipation(grid, x0, T, burn_in, cfg, noise, replica=0, every=1, workers=None) -> dict:
    """Streaming time average of ``2 nu ||w||_1^2`` for long runs (no states kept)."""
    i0 = int(round(burn_in / cfg.dt))
    acc = {"sum": 0.0, "n": 0, "samples": []}

    def observe(i, x, dW):
        if i >= i0:
            d = 2 * cfg.nu * float(sobolev_norm_sq(grid, x[0], 1.0))
            acc["sum"] += d
            acc["n"] += 1
            acc["samples"].append(d)
        return None

    simulate_ensemble(grid, x0, T, cfg, noise, [replica], observe=observe, every=every, workers=workers)
    samples = np.asarray(acc["samples"])
    return {
        "mean": acc["sum"] / max(acc["n"], 1),
        "samples": samples,
        "batch_se": batch_means_se(samples),
        "e0": noise.e0,
    }


def batch_means_se(samples: np.ndarray, n_batches: int = 20) -> float:
    """Standard error of a correlated time average by non-overlapping batch means."""
    samples = np.asarray(samples)
    b = len(samples) // n_batches
    if b < 1:
        return float("nan")
    means = samples[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def ou_stationary_energy(grid: SpectralGrid, nu: float, noise: NoiseModel) -> float:
    """``sum q_n^2 / (2 nu |k_n|^2)`` for the linear (nonlinearity off) system."""
    return float(sum(q * q / (2 * nu * Mode(*k).norm2) for k, q in zip(noise.modes, noise.amplitudes)))


def ou_discrete_stationary_energy(grid: SpectralGrid, nu: float, dt: float, noise: NoiseModel) -> float:
    """Exact stationary energy of the discrete scheme in the linear case."""
    out = 0.0
    for k, q in zip(noise.modes, noise.amplitudes):
        e = math.exp(-nu * Mode(*k).norm2 * dt)
        out += q * q * dt * e * e / (1 - e * e)
    return out


# --------------------------------------------------------------------------
# exponential moments


@dataclass
class MomentProbe:
    eta: float
    times: np.ndarray
    log_moment: np.ndarray | None  # log E exp(eta |w_t|^2)
    log_moment_path: np.ndarray | None  # log E exp(eta (sup |w|^2 + nu int |w|_1^2 - E0 t))
    slope: float | None
    slope_se: float | None
    ess_min: float
    exceeded: bool


def _logmeanexp(a: np.ndarray, axis=0):
    m = np.max(a, axis=axis, keepdims=True)
    return (m + np.log(np.mean(np.exp(a - m), axis=axis, keepdims=True))).squeeze(axis)


def _ess(a: np.ndarray, axis=0):
    w = np.exp(a - np.max(a, axis=axis, keepdims=True))
    return np.sum(w, axis=axis) ** 2 / np.sum(w * w, axis=axis)


def apriori_moment_probe(energy: np.ndarray, h1: np.ndarray, times: np.ndarray, eta: float,
                         nu: float, e0: float, ess_floor: float = 20.0) -> MomentProbe:
    """Empirical exponential moments from an ensemble.

    ``energy`` and ``h1`` have shape (replicas, times) and hold ``|w_t|^2``
    and ``|w_t|_1^2`` on a uniform time grid.  When the effective sample size
    of the exponential weights drops below ``ess_floor`` anywhere, the
    estimate is meaningless and the probe reports ``exceeded`` instead.
    """
    energy = np.asarray(energy, float)
    h1 = np.asarray(h1, float)
    R = energy.shape[0]
    if R < 100:
        raise ValueError("moment probe needs at least 100 trajectories")
    times = np.asarray(times, float)
    dtt = np.diff(times, prepend=times[0])
    a = eta * energy
    running_sup = np.maximum.accumulate(energy, axis=1)
    integral = np.concatenate([np.zeros((R, 1)), np.cumsum(h1[:, :-1] * np.diff(times), axis=1)], axis=1)
    b = eta * (running_sup + nu * integral - e0 * times)
    del dtt
    ess = min(float(_ess(a).min()), float(_ess(b).min()))
    if ess < ess_floor or not np.all(np.isfinite(a)):
        return MomentProbe(eta, times, None, None, None, None, ess, True)
    lm = _logmeanexp(a)
    lp = _logmeanexp(b)
    half = len(times) // 2
    tt = times[half:]
    yy = lm[half:]
    A = np.vstack([tt - tt.mean(), np.ones_like(tt)]).T
    coef, res, *_ = np.linalg.lstsq(A, yy, rcond=None)
    dof = max(len(tt) - 2, 1)
    sig2 = float(np.sum((yy - A @ coef) ** 2) / dof)
    se = math.sqrt(sig2 / max(np.sum((tt - tt.mean()) ** 2), 1e-300))
    return MomentProbe(eta, times, lm, lp, float(coef[0]), se, ess, False)


def gaussian_log_moment(variances: np.ndarray, eta: float) -> float:
    """``log E exp(eta |X|^2)`` for centred Gaussian X with independent coordinates."""
    v = np.asarray(variances, float)
    if np.any(2 * eta * v >= 1):
        return float("inf")
    return float(-0.5 * np.sum(np.log1p(-2 * eta * v)))
