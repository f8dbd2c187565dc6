"""Derivatives of the discrete flow map along a stored trajectory.

Step ``i`` maps ``w_i`` to ``w_{i+1} = E (w_i + dt N(w_i) + Q dW_i)``.  Its
derivative is ``S_i = E (I + dt L_i)`` with ``L_i xi = symmetrized(w_i, xi)``,
so the Jacobian between step indices ``s <= t`` is ``S_{t-1} ... S_s``.  The
noise increment of step ``i`` enters the state at index ``i + 1`` through
``E Q``; control paths are sampled per step and paired with ``sum u_i v_i dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrator import TrajectoryRecord
from .spectral import (
    linearization_adjoint_fft,
    linearization_matrix,
    symmetrized_fft,
)


class LinearizedFlow:
    """Jacobian data of ``traj`` between times ``s`` and ``t`` (on the step grid)."""

    def __init__(self, traj: TrajectoryRecord, s: float = 0.0, t: float | None = None, *, steps=None):
        self.traj = traj
        self.grid = traj.grid
        cfg = traj.config
        self.dt = cfg.dt
        if steps is not None:
            self.s, self.t = int(steps[0]), int(steps[1])
            if not (0 <= self.s <= self.t <= traj.n_steps):
                raise ValueError(f"step range {steps} outside trajectory")
        else:
            if t is None:
                t = traj.n_steps * cfg.dt
            self.s = traj.step_index(s)
            self.t = traj.step_index(t)
        if self.s > self.t:
            raise ValueError("need s <= t")
        self.nonlinear = cfg.nonlinear
        self.E = self.grid.heat(cfg.nu, cfg.dt)
        self.Q = traj.noise.matrix(self.grid)
        self.EQ = self.E[:, None] * self.Q
        self.m = traj.noise.m

    @property
    def n(self) -> int:
        return self.t - self.s

    def sub(self, s_idx: int, t_idx: int) -> "LinearizedFlow":
        return LinearizedFlow(self.traj, steps=(s_idx, t_idx))

    def state(self, i: int) -> np.ndarray:
        return self.traj.states[i]

    # single steps -------------------------------------------------------

    def step(self, i: int, xi: np.ndarray) -> np.ndarray:
        if not self.nonlinear:
            return self.E * xi
        w = self.traj.states[i]
        return self.E * (xi + self.dt * symmetrized_fft(self.grid, w, xi))

    def step_adjoint(self, i: int, eta: np.ndarray) -> np.ndarray:
        y = self.E * eta
        if not self.nonlinear:
            return y
        w = self.traj.states[i]
        return y + self.dt * linearization_adjoint_fft(self.grid, w, y)

    def lin_matrix(self, i: int) -> np.ndarray:
        if not self.nonlinear:
            return np.zeros((self.grid.dim, self.grid.dim))
        return linearization_matrix(self.grid, self.traj.states[i])

    def step_matrix(self, i: int) -> np.ndarray:
        S = self.lin_matrix(i) * self.dt
        S[np.diag_indices_from(S)] += 1.0
        return self.E[:, None] * S


def _check_vec(flow: LinearizedFlow, xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, float)
    if xi.shape[-1] != flow.grid.dim:
        raise ValueError(f"tangent vector must have {flow.grid.dim} coordinates")
    return xi


def jacobian_apply(flow: LinearizedFlow, xi: np.ndarray) -> np.ndarray:
    x = _check_vec(flow, xi).copy()
    for i in range(flow.s, flow.t):
        x = flow.step(i, x)
    return x


def jacobian_path(flow: LinearizedFlow, xi: np.ndarray) -> np.ndarray:
    """``J_{s,i} xi`` for ``i = s .. t``, shape (n+1, ..., dim)."""
    x = _check_vec(flow, xi).copy()
    out = [x]
    for i in range(flow.s, flow.t):
        x = flow.step(i, x)
        out.append(x)
    return np.stack(out)


def jacobian_adjoint_apply(flow: LinearizedFlow, eta: np.ndarray) -> np.ndarray:
    y = _check_vec(flow, eta).copy()
    for i in range(flow.t - 1, flow.s - 1, -1):
        y = flow.step_adjoint(i, y)
    return y


def jacobian_matrix(flow: LinearizedFlow) -> np.ndarray:
    P = np.eye(flow.grid.dim)
    for i in range(flow.s, flow.t):
        P = flow.step_matrix(i) @ P
    return P


def second_variation(flow: LinearizedFlow, xi: np.ndarray, xi2: np.ndarray) -> np.ndarray:
    """Exact second derivative of the discrete flow in directions ``xi, xi2``."""
    xi = _check_vec(flow, xi)
    xi2 = _check_vec(flow, xi2)
    a, b = xi.copy(), xi2.copy()
    kappa = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    if not flow.nonlinear:
        return kappa
    g, dt, E = flow.grid, flow.dt, flow.E
    for i in range(flow.s, flow.t):
        w = flow.traj.states[i]
        kappa = E * (kappa + dt * symmetrized_fft(g, w, kappa) + dt * symmetrized_fft(g, a, b))
        a = flow.step(i, a)
        b = flow.step(i, b)
    return kappa


def a_apply(flow: LinearizedFlow, v: np.ndarray) -> np.ndarray:
    """Response at time t to the control path ``v`` of shape (n, m)."""
    v = np.asarray(v, float)
    if v.shape != (flow.n, flow.m):
        raise ValueError(f"control path must have shape {(flow.n, flow.m)}, got {v.shape}")
    x = np.zeros(flow.grid.dim)
    for k, i in enumerate(range(flow.s, flow.t)):
        x = flow.step(i, x) + flow.EQ @ v[k] * flow.dt
    return x


def a_adjoint_apply(flow: LinearizedFlow, xi: np.ndarray) -> np.ndarray:
    """Control path ``(Q^T E J_{i+1,t}^T xi)_i`` of shape (n, m)."""
    y = _check_vec(flow, xi).copy()
    out = np.zeros((flow.n, flow.m))
    for k in range(flow.n - 1, -1, -1):
        i = flow.s + k
        out[k] = flow.EQ.T @ y
        y = flow.step_adjoint(i, y)
    return out


def l2_pairing(u: np.ndarray, v: np.ndarray, dt: float) -> float:
    return float(np.sum(u * v) * dt)


def response_columns(flow: LinearizedFlow, with_jacobian: bool = False):
    """``G_i = J_{i+1,t} E Q`` for every step of the interval, shape (n, dim, m).

    Propagated forward as a growing block of columns.  When
    ``with_jacobian`` is set the dense ``J_{s,t}`` is returned as well.
    """
    dim, m, n = flow.grid.dim, flow.m, flow.n
    C = np.zeros((dim, m * n))
    P = np.eye(dim) if with_jacobian else None
    for k, i in enumerate(range(flow.s, flow.t)):
        S = flow.step_matrix(i)
        if k:
            C[:, : m * k] = S @ C[:, : m * k]
        C[:, m * k: m * (k + 1)] = flow.EQ
        if with_jacobian:
            P = S @ P
    G = C.reshape(dim, n, m).transpose(1, 0, 2)
    return (G, P) if with_jacobian else G


@dataclass
class MalliavinMatrix:
    s: float
    t: float
    beta: float
    matrix: np.ndarray  # includes beta on the diagonal

    @property
    def bare(self) -> np.ndarray:
        return self.matrix - self.beta * np.eye(self.matrix.shape[0])

    def quadratic_form(self, xi: np.ndarray) -> float:
        return float(xi @ self.matrix @ xi)

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def gram(G: np.ndarray, dt: float) -> np.ndarray:
    n, dim, m = G.shape
    F = G.transpose(1, 0, 2).reshape(dim, n * m)
    M = (F @ F.T) * dt
    return 0.5 * (M + M.T)


def malliavin_matrix(flow: LinearizedFlow, beta: float = 0.0) -> MalliavinMatrix:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    dim = flow.grid.dim
    if flow.m == 0 or flow.n == 0:
        M = np.zeros((dim, dim))
    else:
        M = gram(response_columns(flow), flow.dt)
    M = M + beta * np.eye(dim)
    return MalliavinMatrix(flow.s * flow.dt, flow.t * flow.dt, beta, M)


def malliavin_quadratic_form(flow: LinearizedFlow, xi: np.ndarray) -> float:
    """``|A* xi|^2`` through the adjoint sweep (independent of the assembly)."""
    u = a_adjoint_apply(flow, xi)
    return l2_pairing(u, u, flow.dt)


# --------------------------------------------------------------------------
# probes


@dataclass
class TailCurve:
    epsilons: np.ndarray
    frequency: np.ndarray
    n_probes: int
    empty: bool


def lowmode_probe(matrices, probes, grid, alpha: float, cut: int, epsilons) -> TailCurve:
    """Frequency of ``<M phi, phi> < eps |phi|_1^2`` over matrices and admissible probes.

    A probe is admissible when ``|pi phi| >= alpha |phi|_1`` with ``pi`` the
    projector onto modes of max-norm at most ``cut``.
    """
    epsilons = np.asarray(sorted(epsilons), float)
    low = grid.low_mask(cut)
    probes = np.atleast_2d(np.asarray(probes, float))
    h1 = np.sqrt(np.sum(grid.ksq * probes ** 2, axis=1))
    lown = np.linalg.norm(probes[:, low], axis=1)
    ok = lown >= alpha * h1
    probes, h1 = probes[ok], h1[ok]
    if len(probes) == 0 or len(matrices) == 0:
        return TailCurve(epsilons, np.full(len(epsilons), np.nan), 0, True)
    ratios = []
    for M in matrices:
        Mm = M.matrix if isinstance(M, MalliavinMatrix) else np.asarray(M)
        q = np.einsum("pi,ij,pj->p", probes, Mm, probes)
        ratios.append(q / h1 ** 2)
    ratios = np.concatenate(ratios)
    freq = np.array([np.mean(ratios < e) for e in epsilons])
    return TailCurve(epsilons, freq, len(ratios), False)


@dataclass
class NormEstimate:
    value: float
    converged: bool
    iterations: int


def power_norm(apply, apply_t, dim: int, rng: np.random.Generator, tol: float = 1e-10,
               max_iter: int = 500) -> NormEstimate:
    """Operator norm from power iteration on ``apply_t o apply``."""
    x = rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = apply_t(apply(x))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return NormEstimate(0.0, True, it)
        new = float(x @ y)
        x = y / ny
        if abs(new - lam) <= tol * max(abs(new), 1e-300):
            return NormEstimate(float(np.sqrt(max(new, 0.0))), True, it)
        lam = new
    return NormEstimate(float(np.sqrt(max(lam, 0.0))), False, max_iter)


def projected_jacobian_norm(flow: LinearizedFlow, cut: int, rng: np.random.Generator,
                            side: str = "left", **kw) -> NormEstimate:
    """``|(1 - pi) J|`` (side="left") or ``|J (1 - pi)|`` (side="right")."""
    high = ~flow.grid.low_mask(cut)

    def P(x):
        return x * high

    if side == "left":
        def f(x): return P(jacobian_apply(flow, x))
        def ft(y): return jacobian_adjoint_apply(flow, P(y))
    elif side == "right":
        def f(x): return jacobian_apply(flow, P(x))
        def ft(y): return P(jacobian_adjoint_apply(flow, y))
    else:
        raise ValueError("side must be 'left' or 'right'")
    if not high.any():
        return NormEstimate(0.0, True, 0)
    return power_norm(f, ft, flow.grid.dim, rng, **kw)


# --------------------------------------------------------------------------
# Malliavin derivative of the Jacobian


def malliavin_deriv_jacobian(flow: LinearizedFlow, r: int, i: int, xi: np.ndarray) -> np.ndarray:
    """Derivative of ``J_{s,t} xi`` with respect to component ``i`` of the increment at step ``r``.

    All indices are step indices of the underlying trajectory; ``s`` and
    ``t`` come from ``flow``.
    """
    s, t = flow.s, flow.t
    if not (0 <= r < flow.traj.n_steps) or not (0 <= i < flow.m):
        raise IndexError("noise index out of range")
    xi = _check_vec(flow, xi)
    if r + 1 >= t or not flow.nonlinear:
        return np.zeros_like(xi)
    h = flow.EQ[:, i]
    if r + 1 >= s:
        inner = jacobian_apply(flow.sub(s, r + 1), xi)
        return second_variation(flow.sub(r + 1, t), h, inner)
    hh = jacobian_apply(flow.sub(r + 1, s), h)
    return second_variation(flow.sub(s, t), hh, xi)
