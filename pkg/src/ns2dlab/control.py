"""Control paths that steer a Jacobian perturbation back to zero.

Two constructions are provided.  The elliptic one needs every low mode to be
forced and shrinks the low part of the perturbation at unit speed while the
high part evolves under the linearized flow.  The hypoelliptic one acts on
the first half of each unit interval through the regularized inverse of the
Malliavin matrix and lets the Jacobian contract on the second half.

Residuals obey ``rho_{i+1} = S_i rho_i - E Q v_i dt`` with ``rho_0 = xi``,
which is the discrete form of the controlled linearized equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .integrator import IntegratorConfig, NoiseModel, TrajectoryRecord, simulate
from .spectral import ConfigurationError, linearization_matrix
from .tangent import (
    LinearizedFlow,
    gram,
    jacobian_apply,
    response_columns,
)


def residual_ode(traj: TrajectoryRecord, v: np.ndarray, xi: np.ndarray, s: int = 0) -> np.ndarray:
    """States of the controlled linearized equation from step ``s``; ``v`` has shape (n, ..., m)."""
    v = np.asarray(v, float)
    flow = LinearizedFlow(traj, steps=(s, s + v.shape[0]))
    rho = np.broadcast_to(np.asarray(xi, float), v.shape[1:-1] + (traj.grid.dim,)).copy()
    out = [rho]
    for k in range(v.shape[0]):
        rho = flow.step(s + k, rho) - (v[k] @ flow.EQ.T) * flow.dt
        out.append(rho)
    return np.stack(out)


def residual_ode_check(traj: TrajectoryRecord, v: np.ndarray, xi: np.ndarray, rho_ref: np.ndarray,
                       ref_steps=None) -> float:
    """Max deviation between the integrated residual and reference values.

    ``rho_ref[k]`` is compared with the ODE state at step ``ref_steps[k]``
    (all steps by default).
    """
    v = np.asarray(v, float)
    if v.shape[0] > traj.n_steps:
        raise ValueError("control path longer than trajectory")
    path = residual_ode(traj, v, xi)
    rho_ref = np.asarray(rho_ref, float)
    if ref_steps is None:
        ref_steps = np.arange(rho_ref.shape[0])
    return float(np.max(np.abs(path[np.asarray(ref_steps)] - rho_ref)))


# --------------------------------------------------------------------------
# elliptic control


@dataclass
class EllipticRun:
    cut: int
    v: np.ndarray  # (n, m)
    zeta: np.ndarray  # (n+1, dim)
    low_norm: np.ndarray  # |pi_low zeta_i|
    times: np.ndarray
    residual_deviation: float


def low_index_check(grid, noise: NoiseModel, cut: int) -> np.ndarray:
    """Real indices of low modes; raises when one of them is not forced."""
    low = np.nonzero(grid.low_mask(cut))[0]
    forced = set(noise.indices(grid).tolist()) if noise.m else set()
    for i in low:
        if int(i) not in forced:
            raise ConfigurationError(
                f"low mode {grid.mode_of(int(i))} (max-norm <= {cut}) is not forced"
            )
    return low


def elliptic_control_run(traj: TrajectoryRecord, xi: np.ndarray, cut: int) -> EllipticRun:
    grid = traj.grid
    noise = traj.noise
    low = low_index_check(grid, noise, cut)
    lowmask = np.zeros(grid.dim, bool)
    lowmask[low] = True
    flow = LinearizedFlow(traj)
    dt, E = flow.dt, flow.E
    n = traj.n_steps
    nidx = noise.indices(grid)
    q = np.asarray(noise.amplitudes)
    col_low = lowmask[nidx]

    zeta = np.empty((n + 1, grid.dim))
    zeta[0] = xi
    v = np.zeros((n, noise.m))
    z = np.asarray(xi, float).copy()
    for i in range(n):
        zl = np.where(lowmask, z, 0.0)
        nl = np.linalg.norm(zl)
        # exact unit-speed shrinkage of the low part, with 0/0 = 0
        zl_next = zl * (max(0.0, nl - 0.5 * dt) / nl) if nl > 0 else zl
        bz = np.zeros(grid.dim)
        if flow.nonlinear:
            bz = linearization_matrix(grid, traj.states[i]) @ z
        lin = z + dt * bz
        z_next = np.where(lowmask, zl_next, E * lin)
        F = (lin - zl_next / E) / dt
        v[i, col_low] = F[nidx[col_low]] / q[col_low]
        z = z_next
        zeta[i + 1] = z
    low_norm = np.linalg.norm(zeta[:, lowmask], axis=1)
    dev = residual_ode_check(traj, v, xi, zeta)
    return EllipticRun(cut, v, zeta, low_norm, traj.times, dev)


# --------------------------------------------------------------------------
# hypoelliptic control


@dataclass
class IntervalData:
    """Objects of one unit interval that do not depend on beta."""

    start: int  # step index of the interval start
    half: int  # steps in the active half
    length: int  # steps in the whole interval
    G: np.ndarray  # (half, dim, m) response columns to the midpoint
    M: np.ndarray  # bare Malliavin matrix over the active half
    evals: np.ndarray
    evecs: np.ndarray


def interval_data(traj: TrajectoryRecord, start: int, length: int) -> IntervalData:
    if length % 2:
        raise ValueError("steps per interval must be even")
    half = length // 2
    if start + length > traj.n_steps:
        raise ValueError("interval exceeds trajectory")
    flow = LinearizedFlow(traj, steps=(start, start + half))
    G = response_columns(flow)
    M = gram(G, flow.dt)
    ev, U = np.linalg.eigh(M)
    return IntervalData(start, half, length, G, M, ev, U)


@dataclass
class HypoStep:
    beta: np.ndarray
    v: np.ndarray  # (length, ..., m); zero on the idle half
    rho_next: np.ndarray
    x: np.ndarray
    interval_residual: float
    recursion_gap: float
    beta_inv_norm: float  # max over beta of |beta (beta + M)^-1|
    adjoint_norm: float  # max over beta of |A* (beta + M)^-1/2|


def _cholesky_solve(M: np.ndarray, beta: float, b: np.ndarray) -> np.ndarray:
    try:
        cf = sla.cho_factor(M + beta * np.eye(M.shape[0]), lower=True)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"Cholesky failed for beta={beta}") from exc
    return sla.cho_solve(cf, b)


def hypo_interval(traj: TrajectoryRecord, rho: np.ndarray, beta, start: int = 0,
                  length: int | None = None, data: IntervalData | None = None,
                  check: bool = True) -> HypoStep:
    """Control on one unit interval and the residual it leaves behind.

    ``rho`` is one vector or a stack of shape (B, dim); ``beta`` is a scalar
    or one value per stacked vector.  The residual is computed from its
    definition ``Jv (J rho - A v)`` so that the interval identity is exact
    up to roundoff.
    """
    rho = np.asarray(rho, float)
    single = rho.ndim == 1
    R = rho[None] if single else rho
    betas = np.broadcast_to(np.asarray(beta, float), (R.shape[0],))
    if not np.all(betas > 0):
        raise ValueError("beta must be positive")
    if length is None:
        length = int(round(1.0 / traj.config.dt))
    if data is None:
        data = interval_data(traj, start, length)
    half = data.half
    dt = traj.config.dt
    active = LinearizedFlow(traj, steps=(start, start + half))
    idle = LinearizedFlow(traj, steps=(start + half, start + length))
    b = jacobian_apply(active, R)
    x = np.stack([_cholesky_solve(data.M, be, bb) for be, bb in zip(betas, b)])
    vh = np.einsum("kdm,bd->kbm", data.G, x)
    Av = np.einsum("kdm,kbm->bd", data.G, vh) * dt
    rho_next = jacobian_apply(idle, b - Av)
    v = np.zeros((length,) + vh.shape[1:])
    v[:half] = vh
    interval_residual = recursion_gap = bn = an = float("nan")
    if check:
        full = LinearizedFlow(traj, steps=(start, start + length))
        direct = jacobian_apply(full, R)
        interval_residual = float(np.max(np.abs(direct - a_apply_batched(full, v) - rho_next)))
        recursion_gap = float(np.max(np.abs(jacobian_apply(idle, betas[:, None] * x) - rho_next)))
        lam = np.maximum(data.evals, 0.0)  # PSD up to roundoff; checked separately
        bn = float(max(np.max(be / (be + lam)) for be in betas))
        an = float(max(np.sqrt(np.max(np.maximum(lam, 0) / (be + lam))) for be in betas))
    if single:
        v, rho_next, x = v[:, 0], rho_next[0], x[0]
        betas = betas[0]
    return HypoStep(betas, v, rho_next, x, interval_residual, recursion_gap, bn, an)


@dataclass
class HypoRun:
    betas: np.ndarray
    rho_norms: np.ndarray  # (replicas, betas, n_intervals+1)
    telescope: np.ndarray  # (replicas, betas)
    interval_residual: np.ndarray  # (replicas, betas) max over intervals
    ito_cost: np.ndarray  # (replicas, betas, n_intervals) cumulative Ito sums
    control_energy: np.ndarray  # (replicas, betas, n_intervals) cumulative sum |v|^2 dt
    norm_checks_ok: bool
    monotone_ok: bool

    def mean_rho(self) -> np.ndarray:
        return self.rho_norms.mean(axis=0)

    def decay_factors(self) -> np.ndarray:
        """Geometric factor per unit time fitted to the ensemble mean of |rho_n|, per beta."""
        return np.array([fit_geometric(r) for r in self.mean_rho()])


def fit_geometric(series: np.ndarray) -> float:
    series = np.asarray(series, float)
    n = np.arange(len(series))
    ok = series > 0
    if ok.sum() < 2:
        return 0.0
    slope = np.polyfit(n[ok], np.log(series[ok]), 1)[0]
    return float(np.exp(slope))


def hypo_run(grid, w0, xi, betas, n_intervals: int, replicas, cfg: IntegratorConfig,
             noise: NoiseModel, steps_per_unit: int | None = None, keep=None) -> HypoRun:
    """Ensemble of hypoelliptic control runs sharing trajectories across the beta scan."""
    betas = np.atleast_1d(np.asarray(betas, float))
    replicas = list(replicas)
    L = steps_per_unit or int(round(1.0 / cfg.dt))
    if abs(L * cfg.dt - 1.0) > 1e-9 and steps_per_unit is None:
        raise ConfigurationError("1/dt must be an integer number of steps")
    xi = np.asarray(xi, float)
    nb = len(betas)
    R = len(replicas)
    rho_norms = np.zeros((R, nb, n_intervals + 1))
    tele = np.zeros((R, nb))
    ires = np.zeros((R, nb))
    ito = np.zeros((R, nb, n_intervals))
    energy = np.zeros((R, nb, n_intervals))
    norms_ok = True
    mono_ok = True
    order = np.argsort(betas)
    for ri, rep in enumerate(replicas):
        traj = simulate(grid, w0, n_intervals * L * cfg.dt, cfg, noise, replica=rep)
        rho = np.broadcast_to(xi, (nb, grid.dim)).copy()
        rho_norms[ri, :, 0] = np.linalg.norm(rho, axis=1)
        vs = []
        cum_ito = np.zeros(nb)
        cum_en = np.zeros(nb)
        for n in range(n_intervals):
            data = interval_data(traj, n * L, L)
            st = hypo_interval(traj, rho, betas, n * L, L, data, check=True)
            ires[ri] = np.maximum(ires[ri], st.interval_residual)
            if st.beta_inv_norm > 1 + 1e-12 or st.adjoint_norm > 1 + 1e-12:
                norms_ok = False
            # |beta M~^-1 b| is nondecreasing in beta for a fixed right side b
            b_common = data.M @ st.x[0] + betas[0] * st.x[0]
            vals = [np.linalg.norm(betas[b] * _solve(data, betas[b], b_common)) for b in order]
            if np.any(np.diff(vals) < -1e-12 * max(vals)):
                mono_ok = False
            v_int = st.v  # (L, nb, m)
            dW = traj.increments[n * L:(n + 1) * L]
            cum_ito += np.einsum("kbm,km->b", v_int, dW)
            cum_en += np.einsum("kbm,kbm->b", v_int, v_int) * cfg.dt
            ito[ri, :, n] = cum_ito
            energy[ri, :, n] = cum_en
            vs.append(v_int)
            rho = st.rho_next
            rho_norms[ri, :, n + 1] = np.linalg.norm(rho, axis=1)
        if n_intervals:
            vall = np.concatenate(vs)  # (N L, nb, m)
            full = LinearizedFlow(traj, steps=(0, n_intervals * L))
            Jxi = jacobian_apply(full, xi)
            Av = a_apply_batched(full, vall)
            tele[ri] = np.max(np.abs(Jxi - Av - rho), axis=1)
        if keep is not None:
            keep(rep, traj)
    return HypoRun(betas, rho_norms, tele, ires, ito, energy, norms_ok, mono_ok)


def _solve(data: IntervalData, beta: float, b: np.ndarray) -> np.ndarray:
    return data.evecs @ ((data.evecs.T @ b) / (beta + data.evals))


def a_apply_batched(flow: LinearizedFlow, v: np.ndarray) -> np.ndarray:
    """Like :func:`ns2dlab.tangent.a_apply` for ``v`` of shape (n, batch, m)."""
    x = np.zeros(v.shape[1:-1] + (flow.grid.dim,))
    for k, i in enumerate(range(flow.s, flow.t)):
        x = flow.step(i, x) + (v[k] @ flow.EQ.T) * flow.dt
    return x


# --------------------------------------------------------------------------
# Malliavin derivative of the control and the Skorokhod correction


@dataclass
class IntervalSensitivity:
    """Derivatives of the active-half control w.r.t. its own increments."""

    dv: np.ndarray  # (half, m, half, m): d v_k / d dW_r^j indexed [r, j, k, :]
    trace: float  # sum_r sum_j dt * d v_r^j / d dW_r^j
    dv_l2: np.ndarray  # (half, m) |D_r^j v|_{L2}
    dA_norm: np.ndarray  # (half, m)
    dJ_norm: np.ndarray  # (half, m)
    J_norm: float
    rho_norm: float
    bound: np.ndarray  # (half, m) right side of the almost-sure bound
    v: np.ndarray  # (half, m)


def interval_sensitivity(traj: TrajectoryRecord, rho: np.ndarray, beta: float, start: int,
                         length: int) -> IntervalSensitivity:
    """Forward-mode derivative of ``v = A* (beta + M)^-1 J rho`` in every increment of the active half."""
    grid = traj.grid
    half = length // 2
    flow = LinearizedFlow(traj, steps=(start, start + half))
    dim, m, dt = grid.dim, flow.m, flow.dt
    E, EQ = flow.E, flow.EQ
    Ss = [flow.step_matrix(i) for i in range(start, start + half)]
    # base quantities
    C = np.zeros((dim, m * half))
    P = np.eye(dim)
    for k in range(half):
        S = Ss[k]
        if k:
            C[:, : m * k] = S @ C[:, : m * k]
        C[:, m * k: m * (k + 1)] = EQ
        P = S @ P
    G = C.reshape(dim, half, m).transpose(1, 0, 2)
    M = gram(G, dt)
    Mt = M + beta * np.eye(dim)
    cf = sla.cho_factor(Mt, lower=True)
    b = P @ rho
    x = sla.cho_solve(cf, b)
    v = np.einsum("kdm,d->km", G, x)

    dv = np.zeros((half, m, half, m))
    dv_l2 = np.zeros((half, m))
    dA = np.zeros((half, m))
    dJ = np.zeros((half, m))
    trace = 0.0
    for r in range(half):
        for j in range(m):
            dC = np.zeros_like(C)
            dP = np.zeros_like(P)
            Cc = np.zeros_like(C)
            Pc = np.eye(dim)
            dw = None  # perturbation of the state at local index k
            for k in range(half):
                S = Ss[k]
                dS = None if dw is None or not flow.nonlinear else E[:, None] * (dt * linearization_matrix(grid, dw))
                if k:
                    blk = slice(0, m * k)
                    dC[:, blk] = S @ dC[:, blk] + (dS @ Cc[:, blk] if dS is not None else 0.0)
                    Cc[:, blk] = S @ Cc[:, blk]
                Cc[:, m * k: m * (k + 1)] = EQ
                dP = S @ dP + (dS @ Pc if dS is not None else 0.0)
                Pc = S @ Pc
                if k == r:
                    dw = EQ[:, j].copy()
                elif dw is not None:
                    dw = S @ dw
            dG = dC.reshape(dim, half, m).transpose(1, 0, 2)
            FG = G.transpose(1, 0, 2).reshape(dim, half * m)
            FdG = dG.transpose(1, 0, 2).reshape(dim, half * m)
            dMm = (FdG @ FG.T + FG @ FdG.T) * dt
            dx = sla.cho_solve(cf, dP @ rho - dMm @ x)
            dvv = np.einsum("kdm,d->km", dG, x) + np.einsum("kdm,d->km", G, dx)
            dv[r, j] = dvv
            trace += dt * dvv[r, j]
            dv_l2[r, j] = math.sqrt(float(np.sum(dvv ** 2) * dt))
            ev = np.linalg.eigvalsh(FdG @ FdG.T * dt)
            dA[r, j] = math.sqrt(max(float(ev[-1]), 0.0))
            dJ[r, j] = float(np.linalg.norm(dP, 2))
    Jn = float(np.linalg.norm(P, 2))
    rn = float(np.linalg.norm(rho))
    bound = 3.0 / beta * dA * Jn * rn + beta ** -0.5 * dJ * rn
    return IntervalSensitivity(dv, trace, dv_l2, dA, dJ, Jn, rn, bound, v)


def control_on_interval(traj: TrajectoryRecord, rho: np.ndarray, beta: float, start: int,
                        length: int) -> np.ndarray:
    """Active-half control path; convenience wrapper used by differencing oracles."""
    st = hypo_interval(traj, rho, beta, start, length, check=False)
    return st.v[: length // 2]


def skorokhod_trace_fd(traj: TrajectoryRecord, control, steps, eps: float = 1e-6) -> float:
    """Central-difference estimate of ``sum dt d v_r^j / d dW_r^j`` over ``steps``.

    ``control(traj)`` must return the path indexed by absolute step.
    """
    dW = np.array(traj.increments)
    total = 0.0
    for r in steps:
        for j in range(dW.shape[1]):
            up = dW.copy()
            up[r, j] += eps
            dn = dW.copy()
            dn[r, j] -= eps
            vu = control(traj.with_increments(up))[r, j]
            vd = control(traj.with_increments(dn))[r, j]
            total += traj.config.dt * (vu - vd) / (2 * eps)
    return total


@dataclass
class CostReport:
    ito: float
    skorokhod_correction: float
    bound_total: float
    componentwise_ok: bool
    bound_holds_l2: bool
    max_ratio: float
    per_interval: np.ndarray = None  # (n_intervals, 3) cumulative ito, correction, bound


def control_cost_bound(traj: TrajectoryRecord, xi: np.ndarray, beta: float, n_intervals: int,
                       length: int | None = None, budget: int = 2_000_000) -> CostReport:
    """Ito part, Skorokhod trace correction and the almost-sure derivative bound.

    ``budget`` caps ``dim * steps`` so the dense derivative computation does
    not run away on large truncations.
    """
    grid = traj.grid
    if length is None:
        length = int(round(1.0 / traj.config.dt))
    if grid.dim * n_intervals * length > budget:
        raise MemoryError(
            f"dim*steps = {grid.dim * n_intervals * length} exceeds budget {budget}; reduce N or steps"
        )
    dt = traj.config.dt
    rho = np.asarray(xi, float)
    ito = corr = bound_total = 0.0
    comp_ok = l2_ok = True
    max_ratio = 0.0
    series = np.zeros((n_intervals, 3))
    for n in range(n_intervals):
        start = n * length
        sens = interval_sensitivity(traj, rho, beta, start, length)
        half = length // 2
        ito += float(np.sum(sens.v * traj.increments[start:start + half]))
        corr += sens.trace
        pointwise = np.abs(np.einsum("rjrj->rj", sens.dv)) * dt
        rhs = math.sqrt(dt) * sens.bound
        bound_total += float(np.sum(rhs))
        tiny = 1e-12 * (1.0 + sens.bound)
        comp_ok &= bool(np.all(pointwise <= rhs + tiny))
        l2_ok &= bool(np.all(sens.dv_l2 <= sens.bound * (1 + 1e-10) + tiny))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(sens.bound > 0, sens.dv_l2 / sens.bound, 0.0)
        max_ratio = max(max_ratio, float(np.max(ratio)))
        series[n] = ito, corr, bound_total
        rho = hypo_interval(traj, rho, beta, start, length, check=False).rho_next
    return CostReport(ito, corr, bound_total, comp_ok and abs(corr) <= bound_total + 1e-12, l2_ok, max_ratio,
                      series)


# --------------------------------------------------------------------------
# gradient bound


def lowest_coordinates(grid, n_modes: int = 4) -> np.ndarray:
    """Real indices of the ``n_modes`` lowest half-plane modes (sine and cosine parts)."""
    j = np.arange(n_modes)
    return np.concatenate([j, j + grid.h])


@dataclass
class CylinderTest:
    """``phi(w) = tanh(<g, w restricted to the lowest modes>)``."""

    coords: np.ndarray
    g: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(np.asarray(x)[..., self.coords] @ self.g)

    @property
    def sup(self) -> float:
        return 1.0 if np.any(self.g) else 0.0

    @property
    def lip(self) -> float:
        return float(np.linalg.norm(self.g))


@dataclass
class GradientBoundReport:
    times: np.ndarray
    first_term: np.ndarray  # E |Ito sum of v| per n
    second_term: np.ndarray  # E |rho_n| per n
    second_se: np.ndarray
    delta: float
    delta_ci: tuple
    lhs: np.ndarray  # finite-difference |grad P_n phi . xi|
    lhs_se: np.ndarray
    rhs: np.ndarray
    beta: float
    widened: bool = False
    notes: list = field(default_factory=list)


def fit_decay_rate(rho_norms: np.ndarray, rng: np.random.Generator, n_boot: int = 2000,
                   skip: int = 0):
    """Rate ``delta`` in ``E|rho_n| ~ C exp(-delta n)`` with a bootstrap 95% interval."""
    R, T = rho_norms.shape
    n = np.arange(T)[skip:]

    def fit(rows):
        mean = rows.mean(axis=0)[skip:]
        return -np.polyfit(n, np.log(mean), 1)[0]

    est = float(fit(rho_norms))
    boots = np.empty(n_boot)
    for b in range(n_boot):
        boots[b] = fit(rho_norms[rng.integers(0, R, R)])
    lo, hi = np.quantile(boots, [0.025, 0.975])
    return est, (float(lo), float(hi))


def gradient_bound_estimate(grid, w0, xi, phi: CylinderTest, n_max: int, replicas,
                            cfg: IntegratorConfig, noise: NoiseModel, beta: float,
                            fd_eps: float = 1e-4, rng: np.random.Generator | None = None) -> GradientBoundReport:
    """Both terms of the gradient decomposition and a direct finite-difference estimate."""
    rng = rng or np.random.default_rng(cfg.seed)
    replicas = list(replicas)
    run = hypo_run(grid, w0, xi, [beta], n_max, replicas, cfg, noise)
    rho = run.rho_norms[:, 0, :]
    first = np.concatenate([[0.0], np.mean(np.abs(run.ito_cost[:, 0, :]), axis=0)])
    second = rho.mean(axis=0)
    second_se = rho.std(axis=0, ddof=1) / math.sqrt(len(replicas))
    if np.all(second[1:] == 0):
        delta, ci = float("inf"), (float("inf"), float("inf"))
    else:
        delta, ci = fit_decay_rate(rho, rng)
    L = int(round(1.0 / cfg.dt))
    lhs = np.zeros(n_max + 1)
    lhs_se = np.zeros(n_max + 1)
    diffs = np.zeros((len(replicas), n_max + 1))
    xi = np.asarray(xi, float)
    w0 = np.asarray(w0, float)
    for ri, rep in enumerate(replicas):
        tp = simulate(grid, w0 + fd_eps * xi, n_max * L * cfg.dt, cfg, noise, replica=rep)
        tm = simulate(grid, w0 - fd_eps * xi, n_max * L * cfg.dt, cfg, noise, replica=rep)
        idx = np.arange(n_max + 1) * L
        diffs[ri] = (phi(tp.states[idx]) - phi(tm.states[idx])) / (2 * fd_eps)
    lhs = np.abs(diffs.mean(axis=0))
    lhs_se = diffs.std(axis=0, ddof=1) / math.sqrt(len(replicas))
    rhs = phi.sup * first + phi.lip * second
    widened = bool(np.any(second_se > 0.5 * np.maximum(second, 1e-300)))
    notes = []
    if widened:
        notes.append("standard error exceeds half the mean at some n; interval widened")
        span = ci[1] - ci[0]
        ci = (ci[0] - span, ci[1] + span)
    return GradientBoundReport(
        np.arange(n_max + 1, dtype=float), first, second, second_se, delta, ci, lhs, lhs_se, rhs,
        beta, widened, notes,
    )
