"""Gradient and coupling probes on toy diffusions and on the truncated flow.

Toy systems
-----------
``sde1``     dx = -x dt + dW,          dy = -y dt
``sde2``     dx = (x - x^3) dt + dW,   dy = -y dt
``ouchain``  complex modes |k| <= 16,  du_k = -(1 + k^2) u_k dt + exp(-|k|^3) dB_k
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .integrator import IntegratorConfig, NoiseModel, simulate_ensemble
from .metrics import EmpiricalMeasure, PseudoMetric, coupling_distance

SYSTEMS = ("sde1", "sde2", "ouchain")
OU_KMAX = 16


def _generator(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


# --------------------------------------------------------------------------
# two-dimensional toys


def simulate_toy2d(system: str, x0, t_grid, n_paths: int, seed: int = 0, dt: float = 1e-2):
    """States and tangent matrices at the times in ``t_grid``.

    Returns ``(X, J)`` with ``X`` of shape (len(t_grid), n_paths, 2) and
    ``J`` of shape (len(t_grid), n_paths, 2, 2).  Noise draws depend only on
    ``seed`` and the step index, so runs from different initial points share
    their Brownian paths.
    """
    if system not in ("sde1", "sde2"):
        raise ValueError(f"unknown system id {system!r}")
    t_grid = np.asarray(t_grid, float)
    n_steps = int(round(t_grid.max() / dt)) if len(t_grid) else 0
    record = {int(round(t / dt)): k for k, t in enumerate(t_grid)}
    rng = _generator(seed)
    x = np.full(n_paths, float(x0[0]))
    y = np.full(n_paths, float(x0[1]))
    jx = np.ones(n_paths)  # d x_t / d x_0; y is linear and decoupled
    X = np.zeros((len(t_grid), n_paths, 2))
    J = np.zeros((len(t_grid), n_paths, 2, 2))
    decay = math.exp(-dt)
    ou_sd = math.sqrt((1 - math.exp(-2 * dt)) / 2)

    def rec(i):
        if i in record:
            k = record[i]
            X[k, :, 0] = x
            X[k, :, 1] = y
            J[k, :, 0, 0] = jx
            J[k, :, 1, 1] = math.exp(-i * dt)

    rec(0)
    for i in range(n_steps):
        z = rng.standard_normal(n_paths)
        if system == "sde1":
            x = decay * x + ou_sd * z
            jx = decay * jx
        else:
            jx = jx * (1 + dt * (1 - 3 * x * x))
            x = x + dt * (x - x ** 3) + math.sqrt(dt) * z
        y = decay * y
        rec(i + 1)
    return X, J


@dataclass
class TanhTest:
    """``phi(z) = a * tanh(<g, z> / width)``: sup norm ``|a|``, Lipschitz constant ``|a| |g| / width``."""

    g: np.ndarray
    width: float = 1.0
    a: float = 1.0

    def __call__(self, z):
        return self.a * np.tanh(np.asarray(z) @ self.g / self.width)

    def grad(self, z):
        s = 1.0 / np.cosh(np.asarray(z) @ self.g / self.width) ** 2
        return (self.a * s / self.width)[..., None] * self.g

    @property
    def sup(self) -> float:
        return abs(self.a)

    @property
    def lip(self) -> float:
        return abs(self.a) * float(np.linalg.norm(self.g)) / self.width


@dataclass
class GradientTable:
    system: str
    times: np.ndarray
    estimate: np.ndarray  # |grad P_t phi . xi|
    stderr: np.ndarray
    sup_phi: float
    lip_phi: float
    fit: dict
    analytic_bound: np.ndarray | None
    distances: list = None  # rows (t, eps, distance) when scales are given
    xi_complex: np.ndarray | None = None

    def within_bound(self, k: float = 2.0) -> bool:
        if self.analytic_bound is None:
            return True
        return bool(np.all(self.estimate <= self.analytic_bound + k * self.stderr))


def fit_decomposition(times, values, sup_phi, lip_phi) -> dict:
    """Least-squares fit of ``values ~ a sup_phi + b lip_phi exp(-delta t)`` with a, b, delta >= 0."""
    times = np.asarray(times, float)
    values = np.asarray(values, float)

    def model(t, a, b, d):
        return a * sup_phi + b * lip_phi * np.exp(-d * t)

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", optimize.OptimizeWarning)
            p, _ = optimize.curve_fit(model, times, values, p0=[0.01, 1.0, 1.0],
                                      bounds=([0, 0, 0], [np.inf, np.inf, 50]), maxfev=20000)
        return {"a": float(p[0]), "b": float(p[1]), "delta": float(p[2]), "ok": True}
    except (RuntimeError, ValueError):
        return {"a": float("nan"), "b": float("nan"), "delta": float("nan"), "ok": False}


def asf_probe_toy(system: str, x0, times, epsilons=None, n_paths: int = 20000, phi=None, xi=None,
                  seed: int = 0, dt: float = 1e-2, n_coupling: int = 300) -> GradientTable:
    """Monte-Carlo ``grad P_t phi(x0) . xi`` through tangent flows.

    With ``epsilons`` (one scale per time) the table also holds the
    d_eps coupling distance between the laws started at ``x0`` and
    ``x0 + xi``.
    """
    if system not in SYSTEMS:
        raise ValueError(f"unknown system id {system!r}")
    times = np.asarray(times, float)
    if epsilons is not None and len(epsilons) != len(times):
        raise ValueError("need one scale per time")
    if system == "ouchain":
        table = _asf_ouchain(x0, times, n_paths, phi, xi, seed)
        if epsilons is not None:
            table.distances = [(float(t), float(e), ou_chain_distance(table.xi_complex, t, e, n_coupling, seed))
                               for t, e in zip(times, epsilons)]
        return table
    xi = np.array([0.0, 1.0]) if xi is None else np.asarray(xi, float)
    phi = phi or TanhTest(np.array([0.3, 1.0]), width=1.0)
    X, J = simulate_toy2d(system, x0, times, n_paths, seed, dt)
    Jxi = J @ xi
    samples = np.sum(phi.grad(X) * Jxi, axis=-1)
    mean = samples.mean(axis=1)
    se = samples.std(axis=1, ddof=1) / math.sqrt(n_paths)
    est = np.abs(mean)
    bound = phi.lip * np.linalg.norm(xi) * np.exp(-times) if system == "sde1" else None
    table = GradientTable(system, times, est, se, phi.sup, phi.lip,
                          fit_decomposition(times, est, phi.sup, phi.lip), bound)
    if epsilons is not None:
        Y, _ = simulate_toy2d(system, np.asarray(x0, float) + xi, times, n_coupling, seed, dt)
        X0, _ = simulate_toy2d(system, x0, times, n_coupling, seed, dt)
        table.distances = [
            (float(t), float(e), coupling_distance(EmpiricalMeasure.uniform(X0[k]), EmpiricalMeasure.uniform(Y[k]),
                                                   PseudoMetric.scaled(e)))
            for k, (t, e) in enumerate(zip(times, epsilons))
        ]
    return table


def mollified_sign_table(widths, t: float, y_min: float = 0.1, n_y: int = 201):
    """Semigroup of ``sde1`` on ``tanh(y / width)`` (exact: ``tanh(y e^-t / width)``).

    Returns rows ``(width, sup_{|y|>=y_min} |P_t phi - sgn|, d/dy P_t phi at 0)``:
    the first column tends to 0 and the slope blows up as the width shrinks,
    so no bound in terms of the sup norm alone is possible.
    """
    ys = np.concatenate([np.linspace(-3, -y_min, n_y), np.linspace(y_min, 3, n_y)])
    rows = []
    for w in widths:
        pt = np.tanh(ys * math.exp(-t) / w)
        rows.append((float(w), float(np.max(np.abs(pt - np.sign(ys)))), math.exp(-t) / w))
    return rows


# --------------------------------------------------------------------------
# OU chain


def ou_chain_rates(kmax: int = OU_KMAX):
    k = np.arange(-kmax, kmax + 1)
    lam = 1.0 + k.astype(float) ** 2
    amp = np.exp(-np.abs(k).astype(float) ** 3)
    return k, lam, amp


def ou_chain_variance(t: float, kmax: int = OU_KMAX) -> np.ndarray:
    """``E|u_k(t) - mean|^2`` per complex mode (standard complex noise with ``E|B_t|^2 = t``)."""
    _, lam, amp = ou_chain_rates(kmax)
    return amp ** 2 * (-np.expm1(-2 * lam * t)) / (2 * lam)


def ou_chain_sample(u0: np.ndarray, t: float, n: int, seed: int = 0, kmax: int = OU_KMAX) -> np.ndarray:
    """Exact samples of the chain at time t as real vectors ``[Re u, Im u]``."""
    _, lam, _ = ou_chain_rates(kmax)
    mean = np.exp(-lam * t) * np.asarray(u0, complex)
    sd = np.sqrt(ou_chain_variance(t, kmax) / 2)
    z = _generator(seed, 1).standard_normal((n, 2, len(lam)))
    re = mean.real + sd * z[:, 0]
    im = mean.imag + sd * z[:, 1]
    return np.concatenate([re, im], axis=1)


def _clip_mean(mu: float, s: float, eps: float) -> float:
    """``E clip(Z, 0, eps) / eps`` for ``Z ~ N(mu, s^2)``."""
    if s == 0:
        return min(max(mu, 0.0), eps) / eps

    def F(u):  # antiderivative of the Gaussian tail
        return u * stats.norm.sf(u) - stats.norm.pdf(u)

    a = (0.0 - mu) / s
    b = (eps - mu) / s
    return float(s * (F(b) - F(a)) / eps)


def ou_chain_bounds(delta: np.ndarray, t: float, eps: float, kmax: int = OU_KMAX) -> dict:
    """Closed-form brackets for the d_eps distance between the laws from x and x + delta.

    ``upper`` comes from the synchronous coupling, ``lower`` from a clipped
    linear test function along the Fisher direction, and ``tv`` is the total
    variation between the two Gaussians.
    """
    k, lam, _ = ou_chain_rates(kmax)
    m = np.exp(-lam * t) * np.asarray(delta, complex)
    mr = np.concatenate([m.real, m.imag])
    var = np.concatenate([ou_chain_variance(t, kmax) / 2] * 2)
    # the variance underflows for |k| >~ 9; keep it in log form for the Mahalanobis distance
    kk = np.concatenate([k, k]).astype(float)
    log_var = -2 * np.abs(kk) ** 3 + np.log(-np.expm1(-2 * np.concatenate([lam, lam]) * t) / (4 * np.concatenate([lam, lam])))
    with np.errstate(divide="ignore"):
        terms = np.where(mr != 0, np.exp(np.minimum(2 * np.log(np.abs(mr)) - log_var, 700.0)), 0.0)
    maha = float(np.sqrt(terms.sum()))
    tv = float(2 * stats.norm.cdf(maha / 2) - 1)
    upper = min(1.0, float(np.linalg.norm(mr)) / eps)
    lower = 0.0
    directions = [mr]
    ok = var > 1e-280
    if np.any(mr[ok] != 0):
        directions.append(np.where(ok, mr / np.where(ok, var, 1.0), 0.0))
    for e in directions:
        ne = np.linalg.norm(e)
        if ne == 0:
            continue
        e = e / ne
        shift = float(e @ mr)
        s = float(np.sqrt(e @ (var * e)))
        # f(z) = clip(<z - c, e>, 0, eps) / eps is 1-Lipschitz for d_eps; scan the offset c
        for c in np.linspace(-eps - 3 * s, shift + 3 * s, 121):
            lower = max(lower, _clip_mean(shift - c, s, eps) - _clip_mean(-c, s, eps))
    return {"upper": upper, "lower": lower, "tv": tv, "mean_gap": float(np.linalg.norm(mr))}


def ou_chain_distance(delta: np.ndarray, t: float, eps: float, n: int = 400, seed: int = 0) -> float:
    """Empirical d_eps coupling distance between ensembles started at 0 and at ``delta``."""
    a = ou_chain_sample(np.zeros_like(delta, dtype=complex), t, n, seed)
    b = ou_chain_sample(delta, t, n, seed)
    return coupling_distance(EmpiricalMeasure.uniform(a), EmpiricalMeasure.uniform(b), PseudoMetric.scaled(eps))


def _asf_ouchain(u0, times, n_paths, phi, xi, seed):
    _, lam, _ = ou_chain_rates()
    dim = 2 * len(lam)
    u0 = np.zeros(len(lam), complex) if u0 is None else np.asarray(u0, complex)
    xi = np.eye(dim)[OU_KMAX] if xi is None else np.asarray(xi, float)
    phi = phi or TanhTest(np.eye(dim)[OU_KMAX] + np.eye(dim)[OU_KMAX + 1], width=1.0)
    decay = np.exp(-np.concatenate([lam, lam]))
    est, se = [], []
    for t in times:
        X = ou_chain_sample(u0, t, n_paths, seed)
        s = phi.grad(X) @ (decay ** t * xi)
        est.append(abs(s.mean()))
        se.append(s.std(ddof=1) / math.sqrt(n_paths))
    est, se = np.array(est), np.array(se)
    bound = phi.lip * np.linalg.norm(xi) * np.exp(-times)  # slowest rate is 1
    table = GradientTable("ouchain", times, est, se, phi.sup, phi.lip,
                          fit_decomposition(times, est, phi.sup, phi.lip), bound)
    table.xi_complex = xi[: len(lam)] + 1j * xi[len(lam):]
    return table


# --------------------------------------------------------------------------
# gamma scan


def asf_gamma_scan(system: str, x0, gammas, t: float, eps: float, n_paths: int = 300,
                   n_dirs: int = 4, seed: int = 0):
    """``max_{|y - x0| = gamma} d_eps-distance of P_t(x0, .) and P_t(y, .)`` per gamma."""
    x0 = np.asarray(x0, float)
    base, _ = simulate_toy2d(system, x0, [t], n_paths, seed)
    rows = []
    angles = np.linspace(0, 2 * np.pi, n_dirs, endpoint=False)
    for g in gammas:
        worst = 0.0
        for a in angles:
            y = x0 + g * np.array([np.cos(a), np.sin(a)])
            other, _ = simulate_toy2d(system, y, [t], n_paths, seed)
            d = coupling_distance(EmpiricalMeasure.uniform(base[0]), EmpiricalMeasure.uniform(other[0]),
                                  PseudoMetric.scaled(eps))
            worst = max(worst, d)
        rows.append((float(g), worst))
    return rows


# --------------------------------------------------------------------------
# truncated Navier-Stokes


@dataclass
class DistanceRow:
    T: float
    eps: float
    distance: float
    nsamples: int


def nse_coupling_distance(grid, w0a, w0b, T_list, eps_list, cfg: IntegratorConfig, noise: NoiseModel,
                          n_replicas: int, cap: int = 2000, common_noise: bool = True) -> list:
    """d_eps coupling distance between ensembles started at ``w0a`` and ``w0b``.

    With ``common_noise`` replica ``r`` of both ensembles uses the same noise
    stream, so identical starting points give identical ensembles.  Otherwise
    the second ensemble uses the next block of replica streams.
    """
    T_list = sorted(float(T) for T in T_list)
    n = min(n_replicas, cap)
    steps = {int(round(T / cfg.dt)): T for T in T_list}
    out = {}
    for label, w0, first in (("a", w0a, 0), ("b", w0b, 0 if common_noise else n)):
        snap = {}

        def observe(i, x, dW, snap=snap):
            if i in steps:
                snap[steps[i]] = x.copy()

        simulate_ensemble(grid, w0, max(T_list), cfg, noise, range(first, first + n), observe=observe)
        out[label] = snap
    rows = []
    for T in T_list:
        A = EmpiricalMeasure.uniform(out["a"][T])
        B = EmpiricalMeasure.uniform(out["b"][T])
        for e in eps_list:
            rows.append(DistanceRow(T, float(e), coupling_distance(A, B, PseudoMetric.scaled(e), cap=cap), n))
    return rows
