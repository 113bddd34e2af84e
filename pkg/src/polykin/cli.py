"""Command-line front end: ``polykin {simulate,verify,sweep,steady}``.

Exit codes: 0 ok, 1 verification failure, 2 config error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load, parse
from .ensemble import Ensemble, NumericAbort, simulate_ensemble
from .forces import FENEDomainError, FlowField, SpringModel

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3


# builders -----------------------------------------------------------------------------


def build_flow(cfg: ExperimentConfig, dim: int | None = None) -> FlowField:
    d = cfg.dim if dim is None else dim
    if cfg.flow == "quiescent" or cfg.shear_rate == 0:
        return FlowField.quiescent(d)
    if d == 1:
        return FlowField(np.array([[cfg.shear_rate]]), "extension")
    if cfg.flow == "shear":
        return FlowField.simple_shear(cfg.shear_rate, d)
    return FlowField.planar_extension(cfg.shear_rate, d)


def build_spring(cfg: ExperimentConfig) -> SpringModel:
    return SpringModel(cfg.spring, cfg.H, cfg.n0 if cfg.spring == "fene" else None)


def sample_times(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.t_final == 0 or cfg.n_samples == 1:
        return np.array([cfg.t_final])
    return np.linspace(0.0, cfg.t_final, cfg.n_samples)


# output ---------------------------------------------------------------------------------


def _cell(v) -> str:
    return repr(float(v))


def moments_csv(rows: list[tuple[float, dict]]) -> str:
    """CSV text with a schema header; column order is fixed by ``MomentSet.columns``."""
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    names = list(rows[0][1]) if rows else []
    w.writerow(["t"] + names)
    for t, cols in rows:
        w.writerow([_cell(t)] + [_cell(cols[k]) for k in names])
    return buf.getvalue()


def write_array(out: Path, name: str, arr: np.ndarray, index: dict) -> None:
    np.save(out / f"{name}.npy", np.asarray(arr))
    sidecar = {"schema_version": SCHEMA_VERSION, "shape": list(np.shape(arr)), "dtype": str(np.asarray(arr).dtype)}
    sidecar.update(index)
    (out / f"{name}.json").write_text(json.dumps(sidecar, indent=2, default=_jsonable))


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


def write_run_json(out: Path, cfg: ExperimentConfig, raw: bytes, command: str, wall: float, extra=None) -> None:
    import hashlib

    meta = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "config": cfg.to_text(),
        "code_version": __version__,
        "seed": cfg.seed,
        "wall_time_s": wall,
    }
    meta.update(extra or {})
    (out / "run.json").write_text(json.dumps(meta, indent=2, default=_jsonable))


# density moments for the deterministic engines -------------------------------------------


def _density_moments(points: np.ndarray, weights: np.ndarray, rod: bool):
    from .harness import MomentSet

    w = weights / weights.sum()
    d = points.shape[-1]
    mean = w @ points
    second = np.einsum("k,ki,kj->ij", w, points, points)
    cov = second - np.outer(mean, mean)
    S = float(1.5 * np.linalg.eigvalsh(second - np.eye(3) / 3)[-1]) if rod else 0.0
    z = np.zeros(d)
    se = {"mean_n": z, "cov_nn": np.zeros((d, d)), "J1": z, "J2": z, "S": 0.0}
    return MomentSet(float(weights.sum()), mean, cov, z.copy(), z.copy(), S, se)


def _grid_moments(grid, rho: np.ndarray):
    """Moments of a cell-centre density; radial grids are isotropic by construction."""
    mass = (rho * grid.volumes).ravel()
    if grid.coords != "radial":
        return _density_moments(grid.centers.reshape(-1, grid.dim), mass, False)
    d = grid.dim
    r = grid.radius.ravel()
    pts = np.zeros((r.size, d))
    pts[:, 0] = r
    ms = _density_moments(pts, mass, False)
    ms.mean_n = np.zeros(d)
    ms.cov_nn = np.eye(d) * float(mass @ r**2 / mass.sum()) / d
    return ms


# engines ----------------------------------------------------------------------------------


def _sde_dumbbell(cfg: ExperimentConfig, threads: int):
    from .dumbbell import InertialDumbbell, OverdampedDumbbell, PhysParamsDumbbell, equilibrium_state
    from .harness import estimate_moments

    par = PhysParamsDumbbell(cfg.epsilon, cfg.zeta, cfg.kBT, build_spring(cfg), build_flow(cfg), cfg.dim)
    rng = np.random.default_rng([cfg.seed, 0x1A17])
    state = equilibrium_state(cfg.N, par, rng, np.asarray(cfg.n_init) if cfg.n_init else None)
    dyn = InertialDumbbell(par) if cfg.engine == "sde-inertial" else OverdampedDumbbell(par, cfg.x_noise)
    rows = []
    obs = lambda t, st: rows.append((t, estimate_moments(st, cfg.epsilon).columns()))  # noqa: E731
    ens = simulate_ensemble(Ensemble(state, cfg.seed), dyn, cfg.dt, cfg.t_final, [obs], sample_times(cfg), threads)
    return rows, {"state_n": (ens.state.n, {"index": "trajectory, component", "time": ens.time})}


def _sde_rod(cfg: ExperimentConfig, threads: int):
    from .harness import estimate_moments
    from .rod import InertialRod, MeanFieldOnsager, OverdampedRod, PhysParamsRod, equilibrium_state

    par = PhysParamsRod(cfg.epsilon, cfg.zeta_t, cfg.zeta_r, cfg.kBT, cfg.L, build_flow(cfg, 3))
    pot = MeanFieldOnsager(cfg.onsager_strength, min(cfg.l_max, 8)) if cfg.onsager_strength else None
    rng = np.random.default_rng([cfg.seed, 0x1A17])
    state = equilibrium_state(cfg.N, par, rng, np.asarray(cfg.n_init) if cfg.n_init else None)
    dyn = InertialRod(par, pot) if cfg.engine == "sde-inertial" else OverdampedRod(par, pot, cfg.x_noise)
    rows = []
    obs = lambda t, st: rows.append((t, estimate_moments(st, cfg.epsilon, par).columns()))  # noqa: E731
    ens = simulate_ensemble(Ensemble(state, cfg.seed), dyn, cfg.dt, cfg.t_final, [obs], sample_times(cfg), threads)
    return rows, {"state_n": (ens.state.n, {"index": "trajectory, component", "time": ens.time})}


def _fp_limit_dumbbell(cfg: ExperimentConfig):
    from .fp.ball import LimitParams, LimitSolver, ball_grid, equilibrium_density

    par = LimitParams(cfg.zeta, cfg.kBT, build_spring(cfg), build_flow(cfg), cfg.dim)
    coords = "auto"
    if cfg.n_init and cfg.dim > 1:
        coords = "polar" if cfg.dim == 2 else "spherical"
    grid = ball_grid(par, cfg.n_r, cfg.n_theta, cfg.n_phi, coords)
    solver = LimitSolver(grid, par)
    if cfg.n_init:
        width = 0.3 * par.extent(1.0) if not par.spring.is_fene else 0.1 * par.spring.n0
        r2 = np.sum((grid.centers - np.asarray(cfg.n_init)) ** 2, axis=-1)
        rho = np.exp(-r2 / (2 * width**2))
        rho /= grid.integrate(rho)
    else:
        rho = equilibrium_density(grid, par)
        rho /= grid.integrate(rho)
    rows, t = [], 0.0
    for ts in sample_times(cfg):
        rho = solver.advance(rho, ts - t, dt=cfg.dt)
        t = ts
        rows.append((t, _grid_moments(grid, rho).columns()))
    index = {"coords": grid.coords, "edges": [e for e in grid.edges], "dim": grid.dim, "time": t,
             "values": "density at cell centres"}
    return rows, {"rho": (rho, index)}


def _fp_limit_rod(cfg: ExperimentConfig):
    from .fp.doi import DoiParams, DoiSolver, uniform_coefs, von_mises_fisher

    par = DoiParams(cfg.kBT / cfg.zeta_r, cfg.kBT, cfg.onsager_strength, build_flow(cfg, 3), cfg.l_max)
    s = DoiSolver(par)
    a = von_mises_fisher(cfg.l_max, 10.0, cfg.n_init, s.h.grid) if cfg.n_init else uniform_coefs(cfg.l_max)
    g = s.h.grid
    pts = g.points.reshape(-1, 3)
    rows, t = [], 0.0
    for ts in sample_times(cfg):
        a = s.advance(a, ts - t, dt=cfg.dt)
        t = ts
        rows.append((t, _density_moments(pts, (s.values(a) * g.weights).ravel(), True).columns()))
    index = {"grid": "Gauss-Legendre cos(theta) x uniform phi", "theta": g.theta, "phi": g.phi, "time": t}
    return rows, {"rho": (s.values(a), index)}


def _fp_reduced(cfg: ExperimentConfig):
    from .fp.inertial import InertialParams, InertialReducedSolver, ReducedInertialGrid

    par = InertialParams(cfg.zeta, cfg.kBT, build_spring(cfg), cfg.shear_rate if cfg.flow != "quiescent" else 0.0)
    s = InertialReducedSolver(par, ReducedInertialGrid(cfg.n_cells, cfg.n_modes))
    center = cfg.n_init[0] if cfg.n_init else 0.0
    rho0 = np.exp(-((s.x - center) ** 2) / 0.4)
    rho0 /= rho0.sum() * s.h
    c = s.initial(rho0)
    rows, t = [], 0.0
    for ts in sample_times(cfg):
        c = s.advance(c, cfg.epsilon, ts - t)
        t = ts
        rho = s.density(c)
        ms = _density_moments(s.x[:, None], rho * s.h, False)
        ms.J2 = np.array([s.flux_J2(c, cfg.epsilon).sum() * s.h])
        rows.append((t, ms.columns()))
    index = {"n_centres": s.x, "time": t, "modes": "Hermite coefficients c_k(n); even at centres, odd at faces"}
    return rows, {"rho": (s.density(c), {"n_centres": s.x, "time": t}), "modes": (c, index)}


def run_simulation(cfg: ExperimentConfig, threads: int = 1):
    if cfg.engine.startswith("sde"):
        return _sde_dumbbell(cfg, threads) if cfg.model == "dumbbell" else _sde_rod(cfg, threads)
    if cfg.engine == "fp-limit":
        return _fp_limit_dumbbell(cfg) if cfg.model == "dumbbell" else _fp_limit_rod(cfg)
    return _fp_reduced(cfg)


# commands ---------------------------------------------------------------------------------


def _load(args) -> tuple[ExperimentConfig, bytes]:
    if args.config is None:
        cfg, raw = ExperimentConfig(), ExperimentConfig().to_text().encode()
    else:
        cfg, raw = load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed).validate()
    if args.quick:
        cfg = replace(cfg, N=min(cfg.N, 2000), n_samples=min(cfg.n_samples, 3))
    if cfg.engine.startswith("sde") and cfg.N < 100:
        raise ConfigError("ensemble estimators need N >= 100", "N")
    return cfg, raw


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg, raw = _load(args)
    out = _outdir(args)
    t0 = time.perf_counter()
    rows, arrays = run_simulation(cfg, args.threads)
    (out / "moments.csv").write_text(moments_csv(rows))
    for name, (arr, index) in arrays.items():
        write_array(out, name, arr, index)
    write_run_json(out, cfg, raw, "simulate", time.perf_counter() - t0, {"threads": args.threads})
    print(f"wrote {len(rows)} sample(s) to {out / 'moments.csv'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import report, run_battery

    t0 = time.perf_counter()
    verdicts = run_battery(args.suite, args.quick, args.threads)
    for v in verdicts:
        print(v.line())
    failed = [v.name for v in verdicts if not v.passed]
    if args.out:
        out = _outdir(args)
        (out / f"verify_{args.suite}.json").write_text(report(verdicts))
    print(f"{args.suite}: {len(verdicts) - len(failed)}/{len(verdicts)} passed in {time.perf_counter() - t0:.1f}s")
    if failed:
        print("failing invariants: " + ", ".join(failed))
        return EXIT_VERIFY
    return EXIT_OK


def sweep_config(cfg: ExperimentConfig, threads: int, quick: bool):
    from .harness import SweepConfig

    kw = dict(
        model=cfg.model, engine=cfg.sweep_engine, epsilons=tuple(cfg.epsilons), N=cfg.N, dt=cfg.dt,
        t_final=cfg.t_final, seed=cfg.seed, kBT=cfg.kBT, H=cfg.H, spring=cfg.spring, n0=cfg.n0,
        n_cells=cfg.n_cells, n_modes=cfg.n_modes, threads=threads,
    )
    if cfg.model == "rod":
        kw.update(zeta=cfg.zeta_r, D_r=cfg.kBT / cfg.zeta_r)
    else:
        kw.update(zeta=cfg.zeta)
        if cfg.n_init:
            kw["n_init"] = float(cfg.n_init[0])
    if quick:
        kw["epsilons"] = tuple(sorted(cfg.epsilons, reverse=True)[:2])
        kw["N"] = min(cfg.N, 100_000)
    return SweepConfig(**kw)


def cmd_sweep(args) -> int:
    from .harness import epsilon_sweep

    cfg, raw = _load(args)
    if len(cfg.epsilons) < 2:
        raise ConfigError("need ≥2 epsilons", "epsilons")
    out = _outdir(args)
    t0 = time.perf_counter()
    rep = epsilon_sweep(sweep_config(cfg, args.threads, args.quick))
    (out / "report.json").write_text(rep.to_json())
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "l1_distance", "factorization_distance"])
    for e, d, f in zip(rep.epsilons, rep.distances, rep.factorization):
        w.writerow([_cell(e), _cell(d), _cell(f)])
    (out / "distances.csv").write_text(buf.getvalue())
    write_run_json(out, cfg, raw, "sweep", time.perf_counter() - t0)
    for e, d, f in zip(rep.epsilons, rep.distances, rep.factorization):
        print(f"eps={e:<6g} L1={d:.4e} factorization={f:.4e}")
    print(f"fitted order {rep.fitted_order:.3f}; flags {rep.pass_flags}")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_steady(args) -> int:
    cfg, raw = _load(args)
    out = _outdir(args)
    t0 = time.perf_counter()
    summary: dict = {}
    if cfg.model == "dumbbell":
        from .fp.ball import LimitParams, LimitSolver, ball_grid, equilibrium_density, l1_distance
        from .harness import lyapunov_covariance

        par = LimitParams(cfg.zeta, cfg.kBT, build_spring(cfg), build_flow(cfg), cfg.dim)
        grid = ball_grid(par, cfg.n_r, cfg.n_theta, cfg.n_phi)
        rho = LimitSolver(grid, par).steady_state()
        ms = _grid_moments(grid, rho)
        summary["cov_nn"] = ms.cov_nn
        if par.flow.is_quiescent:
            summary["l1_to_analytic"] = l1_distance(grid, rho, equilibrium_density(grid, par))
        elif not par.spring.is_fene:
            summary["cov_lyapunov"] = lyapunov_covariance(par.flow.kappa, par.spring.H, par.zeta, par.kBT)
        write_array(out, "rho", rho, {"coords": grid.coords, "edges": list(grid.edges), "dim": grid.dim})
        rows = [(float("inf"), ms.columns())]
    else:
        from .fp.doi import DoiParams, DoiSolver, ZonalOnsager, uniform_coefs, von_mises_fisher

        par = DoiParams(cfg.kBT / cfg.zeta_r, cfg.kBT, cfg.onsager_strength, build_flow(cfg, 3), cfg.l_max)
        s = DoiSolver(par)
        if par.flow.is_quiescent and cfg.onsager_strength:
            z = ZonalOnsager(cfg.onsager_strength, cfg.kBT)
            b = z.solve()
            summary.update(S_zonal=z.order_parameter(b), self_consistency=z.self_consistency(b))
        start = von_mises_fisher(cfg.l_max, 5.0, cfg.n_init or (0, 0, 1), s.h.grid) if cfg.onsager_strength \
            else uniform_coefs(cfg.l_max)
        a = s.steady_state(start, dt=cfg.dt)
        summary["S"] = s.order_parameter(a)
        summary["rhs_norm"] = float(np.abs(s.rhs(a)).max())
        g = s.h.grid
        ms = _density_moments(g.points.reshape(-1, 3), (s.values(a) * g.weights).ravel(), True)
        write_array(out, "rho", s.values(a), {"theta": g.theta, "phi": g.phi})
        rows = [(float("inf"), ms.columns())]
    (out / "moments.csv").write_text(moments_csv(rows))
    (out / "steady.json").write_text(json.dumps(summary, indent=2, default=_jsonable))
    write_run_json(out, cfg, raw, "steady", time.perf_counter() - t0)
    print(json.dumps(summary, default=_jsonable))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polykin", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", type=str, default=None, help="experiment INI file")
            sp.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
        sp.add_argument("--out", type=str, default="out", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (does not change results)")
        sp.add_argument("--quick", action="store_true", help="smaller smoke-test sizes")

    common(sub.add_parser("simulate", help="run one engine and write moments"))
    v = sub.add_parser("verify", help="run an invariant battery")
    v.add_argument("suite", choices=["geometry", "collision", "equilibrium", "limits"])
    common(v, config=False)
    common(sub.add_parser("sweep", help="epsilon sweep against the limit equation"))
    common(sub.add_parser("steady", help="direct steady-state solve"))
    return p


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "sweep": cmd_sweep, "steady": cmd_steady}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericAbort as err:
        print(f"numeric abort: {err}", file=sys.stderr)
        return EXIT_ABORT
    except (FloatingPointError, FENEDomainError) as err:
        print(f"numeric abort: {err}", file=sys.stderr)
        return EXIT_ABORT
    except RuntimeError as err:
        from .fp.ball import PositivityError

        if isinstance(err, PositivityError):
            print(f"numeric abort: {err}", file=sys.stderr)
            return EXIT_ABORT
        raise


if __name__ == "__main__":
    sys.exit(main())
