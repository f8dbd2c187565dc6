"""Fast invariant checks runnable from an installed package (``ns2dlab selftest``)."""

from __future__ import annotations

import time

import numpy as np

from . import forcing, metrics, spectral, tangent
from .control import elliptic_control_run, hypo_run
from .integrator import IntegratorConfig, NoiseModel, simulate

ELLIPTIC_MODES = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]


def _reference_sets():
    got = [forcing.classify(z).classification.value
           for z in (forcing.FORCING_SPANNING, forcing.FORCING_AXES, forcing.FORCING_EVEN)]
    return got == ["FullSpace", "FiniteOU", "ProperSublattice"], str(got)


def _zinfty():
    worst = []
    for z in (forcing.FORCING_SPANNING, forcing.FORCING_EVEN):
        worst.append(forcing.zinfty_ball(z, 6) == forcing.lattice_ball(z, 6))
    ok = all(worst) and forcing.zinfty_ball(forcing.FORCING_AXES, 6) == forcing.FORCING_AXES
    return ok, ""


def _fft_vs_direct():
    g = spectral.get_grid(5)
    x = spectral.random_field(g, np.random.default_rng(1), 1.0, 4)
    a = spectral.nonlinearity_fft(g, x)
    b = spectral.nonlinearity_direct(g, x)
    err = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
    return err < 1e-11, f"relative {err:.2e}"


def _neutrality():
    g = spectral.get_grid(5)
    x = spectral.random_field(g, np.random.default_rng(2), 1.0)
    b = spectral.nonlinearity_fft(g, x)
    e1 = abs(float(b @ x))
    e2 = abs(float(b @ (x / g.ksq)))
    scale = float(np.linalg.norm(b) * np.linalg.norm(x))
    return max(e1, e2) < 1e-12 * scale, f"{e1:.1e} {e2:.1e}"


def _small_traj(N=4, T=0.5, dt=0.05, modes=forcing.FORCING_SPANNING, seed=3):
    g = spectral.get_grid(N)
    cfg = IntegratorConfig(0.3, dt, seed=seed)
    noise = NoiseModel.uniform(modes, 1.0)
    x0 = spectral.random_field(g, np.random.default_rng(seed), 1.5)
    return simulate(g, x0, T, cfg, noise), cfg, noise


def _adjoint():
    traj, _, _ = _small_traj()
    flow = tangent.LinearizedFlow(traj)
    rng = np.random.default_rng(4)
    xi, eta = rng.standard_normal((2, traj.grid.dim))
    lhs = float(eta @ tangent.jacobian_apply(flow, xi))
    rhs = float(xi @ tangent.jacobian_adjoint_apply(flow, eta))
    err = abs(lhs - rhs) / (abs(lhs) + 1e-300)
    return err < 1e-10, f"relative {err:.2e}"


def _malliavin_routes():
    traj, _, _ = _small_traj()
    flow = tangent.LinearizedFlow(traj)
    M = tangent.malliavin_matrix(flow).matrix
    xi = np.random.default_rng(5).standard_normal(traj.grid.dim)
    a = float(xi @ M @ xi)
    b = tangent.malliavin_quadratic_form(flow, xi)
    ev = np.linalg.eigvalsh(M)
    err = abs(a - b) / b
    return err < 1e-12 and ev[0] > -1e-12 * ev[-1], f"relative {err:.2e}, min eig {ev[0]:.2e}"


def _telescoping():
    g = spectral.get_grid(4)
    cfg = IntegratorConfig(0.3, 0.05, seed=6)
    noise = NoiseModel.uniform(forcing.FORCING_SPANNING, 1.0)
    xi = np.zeros(g.dim)
    xi[0] = 1.0
    run = hypo_run(g, np.zeros(g.dim), xi, [1e-3, 1e-6], 2, range(2), cfg, noise)
    tele = float(run.telescope.max())
    ok = tele < 1e-8 and run.norm_checks_ok and run.monotone_ok
    return ok, f"residual {tele:.2e}"


def _elliptic():
    traj, _, _ = _small_traj(N=3, T=2.5, dt=0.01, modes=ELLIPTIC_MODES)
    g = traj.grid
    xi = np.zeros(g.dim)
    xi[g.index[(1, 0)]] = 0.6
    xi[g.index[(1, 1)]] = 0.8
    run = elliptic_control_run(traj, xi, 1)
    expected = np.maximum(0.0, 1.0 - run.times / 2)
    err = float(np.max(np.abs(run.low_norm - expected)))
    tail = run.low_norm[run.times >= 2.0 - 1e-12]
    return err < 1e-12 and np.all(tail == 0.0), f"max deviation {err:.1e}"


def _transport():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        m, n = rng.integers(1, 5, 2)
        a = rng.dirichlet(np.ones(m))
        b = rng.dirichlet(np.ones(n))
        C = rng.uniform(0, 1, (m, n))
        worst = max(worst, abs(metrics.cost_matrix_distance(a, b, C) - metrics.vertex_enumeration_cost(a, b, C)))
    return worst < 1e-9, f"max difference {worst:.1e}"


CHECKS = [
    ("reference forcing sets", _reference_sets),
    ("Z_inf equals lattice ball", _zinfty),
    ("FFT nonlinearity vs direct sum", _fft_vs_direct),
    ("energy and enstrophy neutrality", _neutrality),
    ("Jacobian adjoint pairing", _adjoint),
    ("Malliavin matrix two routes", _malliavin_routes),
    ("telescoping identity", _telescoping),
    ("elliptic low-mode shrinkage", _elliptic),
    ("transport LP vs vertex enumeration", _transport),
]


def run_selftest(verbose: bool = True) -> int:
    failures = 0
    for name, check in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = check()
        except Exception as e:  # a crash is a failed check
            ok, detail = False, f"{type(e).__name__}: {e}"
        failures += not ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name:40s} {detail}  ({time.perf_counter() - t0:.2f}s)")
    if verbose:
        print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return failures
