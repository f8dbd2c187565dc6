"""Command line entry point: ``ns2dlab <command> ...``.

Exit codes: 0 success, 1 numeric or experiment failure, 2 usage, 3 configuration.
The environment variable ``NS2DLAB_THREADS`` caps BLAS and FFT threads.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as _config
from . import io as _io
from .spectral import ConfigurationError

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 3


class NumericFailure(RuntimeError):
    pass


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header: list, rows, meta: dict) -> None:
    """CSV with a leading ``# key=value`` comment line carrying provenance."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("# " + " ".join(f"{k}={meta[k]}" for k in sorted(meta)) + "\n")
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(_fmt(v) for v in r) + "\n")


def _meta(cfg: _config.ExperimentConfig, **extra) -> dict:
    return {"config_hash": cfg.hash, "seed": cfg.seed, **extra}


def _initial(cfg, path):
    if path is None:
        return np.zeros(cfg.grid.dim)
    w = _io.read_field(path)
    if w.grid != cfg.grid:
        raise _config.ConfigError("w0", f"field truncation N={w.grid.N} differs from config N={cfg.N}")
    return w.x


def _mode_vector(grid, k) -> np.ndarray:
    xi = np.zeros(grid.dim)
    xi[grid.index[tuple(k)]] = 1.0
    return xi


# --------------------------------------------------------------------------
# commands


def cmd_analyze_forcing(args) -> int:
    from .forcing import classify, lattice_ball, parse_modes, zinfty_ball

    try:
        z0 = parse_modes(args.modes)
    except ValueError as e:
        raise _config.ConfigError("modes", str(e)) from None
    report = classify(z0)
    d = report.to_dict()
    if args.radius is not None:
        zi = zinfty_ball(z0, args.radius)
        d["radius"] = args.radius
        d["zinfty_size"] = len(zi)
        d["lattice_ball_size"] = len(lattice_ball(z0, args.radius))
    if args.json:
        print(json.dumps(d, indent=2))
    else:
        print(f"classification: {d['classification']}")
        print(f"a1={d['a1']} a2={d['a2']} gcd_det={d['gcd_det']} basis={d['lattice_basis']}")
        if d["periods_over_2pi"]:
            print(f"periods / 2pi: {d['periods_over_2pi']}")
        if "zinfty_size" in d:
            print(f"|Z_inf in ball R={args.radius}| = {d['zinfty_size']}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .integrator import simulate

    cfg = _config.load_config(args.config)
    x0 = _initial(cfg, args.w0)
    traj = simulate(cfg.grid, x0, cfg.T, cfg.integrator, cfg.noise, replica=args.replica)
    _io.write_trajectory(args.out, traj, cfg.hash)
    diag = traj.diagnostics()
    csv = args.diagnostics or str(Path(args.out).with_suffix(".csv"))
    rows = zip(diag["t"], diag["energy"], diag["enstrophy"], diag["hnorm1sq"])
    write_csv(csv, ["t", "energy", "enstrophy", "Hnorm1sq"], rows, _meta(cfg, replica=args.replica))
    print(f"wrote {traj.n_steps} steps to {args.out}; diagnostics in {csv}")
    print(f"final enstrophy {diag['enstrophy'][-1]:.6g}, mean |w|_1^2 {np.mean(diag['hnorm1sq']):.6g}")
    return EXIT_OK


def cmd_malliavin_spectrum(args) -> int:
    from .tangent import LinearizedFlow, malliavin_matrix

    traj, meta = _io.read_trajectory(args.traj)
    try:
        flow = LinearizedFlow(traj, args.s, args.t)
    except ValueError as e:
        raise _config.ConfigError("s/t", str(e)) from None
    if args.beta < 0:
        raise _config.ConfigError("beta", "must be nonnegative")
    M = malliavin_matrix(flow, args.beta)
    ev = np.linalg.eigvalsh(M.bare)
    out = args.out or str(Path(args.traj).with_name(Path(args.traj).stem + "_malliavin.bin"))
    _io.write_matrix(out, M.matrix, flow.s * flow.dt, flow.t * flow.dt, args.beta,
                     meta={"config_hash": meta.get("config_hash", ""), "seed": traj.config.seed})
    ev_path = str(Path(out).with_suffix("")) + "_eigs.csv"
    write_csv(ev_path, ["index", "eigenvalue"], enumerate(ev[::-1]),
              {"config_hash": meta.get("config_hash", ""), "seed": traj.config.seed,
               "s": args.s, "t": args.t, "beta": args.beta})
    print(f"dim {M.matrix.shape[0]}: largest {ev[-1]:.6g}, smallest {ev[0]:.6g}; "
          f"{int(np.sum(ev > 1e-12 * max(ev[-1], 1e-300)))} above 1e-12 relative")
    print(f"matrix in {out}, eigenvalues in {ev_path}")
    if ev[0] < -1e-12 * max(abs(ev[-1]), 1.0):
        print("matrix is not positive semidefinite", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_control_experiment(args) -> int:
    from .control import control_cost_bound, hypo_run
    from .integrator import simulate

    cfg = _config.load_config(args.config)
    c = cfg.control
    beta = args.beta if args.beta is not None else float(c["betas"][0])
    steps = args.steps if args.steps is not None else int(c["steps"])
    replicas = args.replicas if args.replicas is not None else int(c["replicas"])
    if beta <= 0 or steps <= 0 or replicas <= 0:
        raise _config.ConfigError("beta/steps/replicas", "must be positive")
    grid = cfg.grid
    L = int(round(c["interval"] / cfg.dt))
    xi = _mode_vector(grid, c["xi"])
    w0 = _initial(cfg, args.w0)
    run = hypo_run(grid, w0, xi, [beta], steps, range(replicas), cfg.integrator, cfg.noise, steps_per_unit=L)
    rho = run.rho_norms[:, 0, :]
    tele = float(np.max(run.telescope))
    n_cost = min(args.cost_replicas, replicas)
    costs = np.zeros((n_cost, steps, 3))
    for r in range(n_cost):
        traj = simulate(grid, w0, steps * L * cfg.dt, cfg.integrator, cfg.noise, replica=r)
        costs[r] = control_cost_bound(traj, xi, beta, steps, L).per_interval
    ito = np.concatenate([[0.0], np.mean(np.abs(run.ito_cost[:, 0, :]), axis=0)])
    corr = np.concatenate([[0.0], costs[:, :, 1].mean(axis=0)]) if n_cost else np.full(steps + 1, np.nan)
    bound = np.concatenate([[0.0], costs[:, :, 2].mean(axis=0)]) if n_cost else np.full(steps + 1, np.nan)
    rows = [
        (n, rho[:, n].mean(), np.quantile(rho[:, n], 0.95), tele, ito[n], corr[n], bound[n])
        for n in range(steps + 1)
    ]
    write_csv(args.out, ["n", "mean_rho", "p95_rho", "telescope_residual", "ito_cost",
                         "skorokhod_correction", "bound_value"], rows,
              _meta(cfg, beta=beta, replicas=replicas, cost_replicas=n_cost))
    factor = run.decay_factors()[0]
    print(f"beta={beta:g}: mean |rho_n| {rho[:, 0].mean():.4g} -> {rho[:, -1].mean():.4g}, "
          f"decay factor per unit time {factor:.4f}")
    print(f"telescoping residual {tele:.3g}; norm checks {'ok' if run.norm_checks_ok else 'FAILED'}")
    if tele > 1e-8 or not run.norm_checks_ok or not run.monotone_ok:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_gradient_bound(args) -> int:
    from .control import CylinderTest, gradient_bound_estimate, lowest_coordinates

    cfg = _config.load_config(args.config)
    g = cfg.gradient
    grid = cfg.grid
    coords = lowest_coordinates(grid, 4)
    phi = CylinderTest(coords, np.linspace(1.0, 0.25, len(coords)))
    rep = gradient_bound_estimate(
        grid, _initial(cfg, args.w0), _mode_vector(grid, g["xi"]), phi, int(g["n_max"]),
        range(int(g["replicas"])), cfg.integrator, cfg.noise, float(g["beta"]), float(g["fd_eps"]),
        rng=np.random.default_rng(cfg.seed),
    )
    rows = zip(rep.times, rep.first_term, rep.second_term, rep.second_se, rep.lhs, rep.lhs_se, rep.rhs)
    write_csv(args.out, ["n", "first_term", "second_term", "second_se", "lhs", "lhs_se", "rhs"], rows,
              _meta(cfg, beta=rep.beta, delta=f"{rep.delta:.6g}",
                    delta_lo=f"{rep.delta_ci[0]:.6g}", delta_hi=f"{rep.delta_ci[1]:.6g}"))
    print(f"fitted decay rate {rep.delta:.4f}, 95% interval [{rep.delta_ci[0]:.4f}, {rep.delta_ci[1]:.4f}]")
    for note in rep.notes:
        print("note:", note)
    return EXIT_OK


def cmd_coupling_distance(args) -> int:
    from .probes import nse_coupling_distance

    cfg = _config.load_config(args.config)
    c = cfg.coupling
    T_list = args.T if args.T is not None else c["T"]
    eps = args.eps if args.eps is not None else c["eps"]
    if any(not (t > 0) for t in T_list) or any(not (e > 0) for e in eps):
        raise _config.ConfigError("T/eps", "times and scales must be positive")
    replicas = args.replicas if args.replicas is not None else int(c["replicas"])
    wa = _initial(cfg, args.w0a)
    wb = _initial(cfg, args.w0b)
    rows = nse_coupling_distance(cfg.grid, wa, wb, T_list, eps, cfg.integrator, cfg.noise,
                                 replicas, cap=int(c["cap"]))
    write_csv(args.out, ["T", "eps", "distance", "nsamples"],
              [(r.T, r.eps, r.distance, r.nsamples) for r in rows], _meta(cfg))
    for r in rows:
        print(f"T={r.T:g} eps={r.eps:g}: {r.distance:.4f} ({r.nsamples} samples)")
    return EXIT_OK


def cmd_asf_toy(args) -> int:
    from .probes import asf_probe_toy

    times = args.times
    eps = args.eps
    if eps is not None and len(eps) == 1:
        eps = eps * len(times)
    if eps is not None and len(eps) != len(times):
        raise _config.ConfigError("eps", "give one scale or one per time")
    x0 = None
    if args.x0 is not None:
        x0 = np.asarray(args.x0)
    elif args.system != "ouchain":
        x0 = np.array([0.5, 0.8])
    try:
        table = asf_probe_toy(args.system, x0, times, eps, n_paths=args.paths, seed=args.seed)
    except ValueError as e:
        raise _config.ConfigError("system", str(e)) from None
    bound = table.analytic_bound if table.analytic_bound is not None else [math.nan] * len(times)
    dist = {t: (e, d) for t, e, d in (table.distances or [])}
    rows = [
        (t, est, se, b, *dist.get(float(t), (math.nan, math.nan)))
        for t, est, se, b in zip(table.times, table.estimate, table.stderr, bound)
    ]
    meta = {"system": args.system, "seed": args.seed, "paths": args.paths}
    if args.out:
        write_csv(args.out, ["t", "estimate", "stderr", "bound", "eps", "distance"], rows, meta)
    for r in rows:
        print("t={:g} |grad P_t phi . xi|={:.5g} (se {:.2g}) bound={:.5g} eps={:g} distance={:.4g}".format(*r))
    fit = table.fit
    print(f"fit: sup-term {fit['a']:.3g}, lip-term {fit['b']:.3g} exp(-{fit['delta']:.3g} t)")
    if args.system == "sde1" and not table.within_bound(2.0):
        print("analytic bound violated beyond 2 standard errors", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    failures = run_selftest(verbose=not args.quiet)
    return EXIT_NUMERIC if failures else EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ns2dlab", description="Truncated stochastic 2D Navier-Stokes experiments")
    sub = p.add_subparsers(dest="command", metavar="command")

    a = sub.add_parser("analyze-forcing", help="classify a forced mode set")
    a.add_argument("--modes", required=True, help='modes as "k1,k2;k1,k2;..."')
    a.add_argument("--radius", type=float)
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_analyze_forcing)

    a = sub.add_parser("simulate", help="integrate one trajectory")
    a.add_argument("--config", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--w0", help="initial field JSON (default: zero field)")
    a.add_argument("--diagnostics", help="diagnostics CSV (default: OUT with .csv suffix)")
    a.add_argument("--replica", type=int, default=0)
    a.set_defaults(func=cmd_simulate)

    a = sub.add_parser("malliavin-spectrum", help="Malliavin matrix of a stored trajectory")
    a.add_argument("--traj", required=True)
    a.add_argument("--s", type=float, default=0.0)
    a.add_argument("--t", type=float, required=True)
    a.add_argument("--beta", type=float, default=0.0)
    a.add_argument("--out", help="matrix dump (.bin or .csv)")
    a.set_defaults(func=cmd_malliavin_spectrum)

    a = sub.add_parser("control-experiment", help="hypoelliptic control residual decay")
    a.add_argument("--config", required=True)
    a.add_argument("--beta", type=float)
    a.add_argument("--steps", type=int)
    a.add_argument("--replicas", type=int)
    a.add_argument("--cost-replicas", type=int, default=2,
                   help="replicas used for the Skorokhod correction and bound columns")
    a.add_argument("--w0")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_control_experiment)

    a = sub.add_parser("gradient-bound", help="gradient decomposition probe on the truncated flow")
    a.add_argument("--config", required=True)
    a.add_argument("--w0")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_gradient_bound)

    a = sub.add_parser("coupling-distance", help="coupling distance between two ensembles")
    a.add_argument("--config", required=True)
    a.add_argument("--w0a", required=True)
    a.add_argument("--w0b", required=True)
    a.add_argument("--T", type=_floats)
    a.add_argument("--eps", type=_floats)
    a.add_argument("--replicas", type=int)
    a.add_argument("--out", default="coupling.csv")
    a.set_defaults(func=cmd_coupling_distance)

    a = sub.add_parser("asf-toy", help="gradient probes on the toy diffusions")
    a.add_argument("--system", default="sde1", help="sde1, sde2 or ouchain")
    a.add_argument("--x0", type=_floats)
    a.add_argument("--times", type=_floats, default=[0.0, 0.5, 1.0, 2.0, 3.0])
    a.add_argument("--eps", type=_floats)
    a.add_argument("--paths", type=int, default=20000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out")
    a.set_defaults(func=cmd_asf_toy)

    a = sub.add_parser("selftest", help="run the built-in invariant checks")
    a.add_argument("--quiet", action="store_true")
    a.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigurationError, _io.FormatError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"{args.command}: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, MemoryError, np.linalg.LinAlgError) as e:
        print(f"{args.command}: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
