"""Command-line front end.

Subcommands: mesh-info, assemble, steady-solve, converge, tabulate,
simulate, bd, oracle, show-config. Exit codes: 0 success, 2 configuration
error, 3 mesh error, 4 numerical failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from .eafe import (
    MMatrixError,
    assemble_eafe_stiffness,
    check_m_matrix,
    transition_rate_matrix,
    verify_equilibrium,
)
from .fields import discrete_gibbs_boltzmann
from .fpe_oracle import (
    NumericsError,
    SteadySolveSpec,
    build_two_particle_generator,
    error_report,
    mean_absorption_time,
    solve_steady_state,
    stationary_distribution,
    transient_solve,
)
from .mesh import (
    MeshError,
    TriangleLocator,
    dual_cells,
    euler_characteristic,
    generate_mesh,
    is_delaunay,
    load_mesh,
    mesh_hash,
)
from .pipeline import build_assets, build_mesh, run_bd, run_simulation, write_manifest
from .reactions import save_tables
from .scenarios import (
    BUILTIN_SCENARIOS,
    ConfigError,
    STEADY_STUDIES,
    builtin_scenario,
    config_from_dict,
    steady_study,
)
from .ssa import SimulationError

EXIT_CONFIG = 2
EXIT_MESH = 3
EXIT_NUMERICS = 4


def _mesh_from_args(args):
    if args.mesh:
        return load_mesh(args.mesh)
    if not args.shape:
        raise ConfigError("mesh", "pass --mesh PATH or --shape square|disk")
    center = tuple(float(v) for v in args.center.split(","))
    return generate_mesh(args.shape, args.level, center=center, size=args.size)


def _config_from_args(args):
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = config_from_dict(json.load(fh))
    elif getattr(args, "scenario", None):
        overrides = {}
        if getattr(args, "level", None) is not None:
            overrides["level"] = args.level
        if getattr(args, "n", None) is not None:
            overrides["n_realizations"] = args.n
        if getattr(args, "seed", None) is not None:
            overrides["master_seed"] = args.seed
        cfg = builtin_scenario(args.scenario, **overrides)
    else:
        raise ConfigError("scenario", "pass --scenario NAME or --config FILE")
    return cfg


def cmd_mesh_info(args):
    mesh = _mesh_from_args(args)
    duals = dual_cells(mesh)
    ok, bad = is_delaunay(mesh)
    info = {
        "nodes": mesh.n_nodes,
        "triangles": mesh.n_triangles,
        "edges": len(mesh.edges),
        "boundary_edges": len(mesh.boundary_edges),
        "total_area": mesh.total_area(),
        "max_edge_length": mesh.max_edge_length(),
        "euler_characteristic": euler_characteristic(mesh),
        "delaunay": ok,
        "non_delaunay_edges": bad[:20],
        "mesh_hash": mesh_hash(mesh),
    }
    text = json.dumps(info, indent=2)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "mesh_info.json"), "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_assemble(args):
    cfg = _config_from_args(args)
    mesh = build_mesh(cfg.domain)
    duals = dual_cells(mesh)
    from .scenarios import make_potential

    spec = next((s for s in cfg.species if s.name == args.species), None)
    if spec is None:
        raise ConfigError("species", f"scenario has no species {args.species!r}")
    potential = make_potential(spec.potential)
    S = assemble_eafe_stiffness(mesh, potential, spec.diffusivity)
    report = check_m_matrix(S)
    op = transition_rate_matrix(S, duals, species=spec.name,
                                allow_nonmonotone=args.allow_nonmonotone)
    _, pbar = discrete_gibbs_boltzmann(mesh, duals, potential)
    residuals = verify_equilibrium(op, pbar)
    os.makedirs(args.out, exist_ok=True)
    coo = op.matrix.tocoo()
    with open(os.path.join(args.out, f"rate_operator_{spec.name}.txt"), "w") as fh:
        fh.write(f"{op.n} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v!r}\n")
    summary = {
        "species": spec.name,
        "n_voxels": int(op.n),
        "nnz": int(coo.nnz),
        "m_matrix": report["is_m_matrix"],
        "min_offdiag": report["min_offdiag"],
        "violating_edges": report["violating_edges"][:20],
        "diagnostic_clamped": op.diagnostic,
        "stationarity_residual": residuals["stationarity_residual"],
        "detailed_balance_residual": residuals["detailed_balance_residual"],
        "max_exit_rate": residuals["max_exit_rate"],
        "mesh_hash": mesh_hash(mesh),
    }
    with open(os.path.join(args.out, f"assemble_summary_{spec.name}.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_steady_solve(args):
    study = steady_study(args.study)
    mesh = generate_mesh(study.domain_kind, args.level, center=study.center, size=study.size)
    rho = solve_steady_state(
        SteadySolveSpec(mesh, study.potential, study.diffusivity, study.forcing, exact=study.exact)
    )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"steady_{study.name}_level{args.level}.csv")
    with open(path, "w") as fh:
        fh.write("node,x,y,solution\n")
        for i, ((x, y), v) in enumerate(zip(mesh.nodes, rho)):
            fh.write(f"{i},{x!r},{y!r},{v!r}\n")
    print(f"wrote {path} ({mesh.n_nodes} nodes)")
    return 0


def cmd_converge(args):
    study = steady_study(args.study)
    lo, hi = (int(v) for v in args.levels.split(":"))
    sols, meshes = [], []
    for level in range(lo, hi + 1):
        mesh = generate_mesh(study.domain_kind, level, center=study.center, size=study.size)
        sols.append(
            solve_steady_state(
                SteadySolveSpec(mesh, study.potential, study.diffusivity, study.forcing)
            )
        )
        meshes.append(mesh)
    report = error_report(sols, meshes)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"convergence_{study.name}.csv")
    with open(path, "w") as fh:
        fh.write("level,nodes,l2_error,rate\n")
        for m, err in enumerate(report["errors"]):
            rate = report["rates"][m - 1] if m >= 1 else np.nan
            fh.write(f"{lo + m},{meshes[m].n_nodes},{err!r},{rate!r}\n")
    print(f"wrote {path}")
    print("errors:", np.array2string(report["errors"], precision=4))
    print("rates:", np.array2string(report["rates"], precision=4))
    return 0


def cmd_tabulate(args):
    cfg = _config_from_args(args)
    if cfg.bimolecular is None:
        raise ConfigError("bimolecular", "scenario has no pair reaction to tabulate")
    assets = build_assets(cfg, cache_dir=args.cache)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "reaction_tables.txt")
    save_tables(assets.tables, path)
    print(f"wrote {path}: {assets.tables.n_pairs} pairs, "
          f"{len(assets.tables.pl_voxel)} placement entries, key {assets.tables_key[:16]}")
    return 0


def cmd_simulate(args):
    cfg = _config_from_args(args)
    out = run_simulation(cfg, outdir=args.out, cache_dir=args.cache)
    n = cfg.run.n_realizations
    msg = {"scenario": cfg.name, "realizations": n,
           "mean_events": float(np.mean(out["n_events"]))}
    print(json.dumps(msg))
    return 0


def cmd_bd(args):
    cfg = _config_from_args(args)
    run_bd(cfg, outdir=args.out, dt=args.dt)
    print(json.dumps({"scenario": cfg.name, "engine": "bd",
                      "realizations": cfg.run.n_realizations}))
    return 0


def cmd_oracle(args):
    cfg = _config_from_args(args)
    if cfg.bimolecular is None:
        raise ConfigError("bimolecular", "oracle tasks need the pair reaction")
    assets = build_assets(cfg, cache_dir=args.cache)
    names = cfg.species_names()
    b = cfg.bimolecular
    op_a = assets.rate_ops[names.index(b.species_a)]
    op_b = assets.rate_ops[names.index(b.species_b)]
    annihilation = not b.species_c
    os.makedirs(args.out, exist_ok=True)
    if annihilation:
        gen = build_two_particle_generator(op_a, op_b, None, assets.tables, mode="annihilation")
    else:
        op_c = assets.rate_ops[names.index(b.species_c)]
        gen = build_two_particle_generator(op_a, op_b, op_c, assets.tables, mode="reversible")
    w = assets.duals.volumes / assets.duals.total_volume()
    produced = []
    if args.task == "stationary":
        if annihilation:
            raise ConfigError("task", "stationary distribution needs the reversible reaction")
        p = stationary_distribution(gen)
        path = os.path.join(args.out, "stationary.csv")
        with open(path, "w") as fh:
            fh.write("state,probability\n")
            for i, v in enumerate(p):
                fh.write(f"{i},{v!r}\n")
        print(json.dumps({"bound_probability": float(p[gen.n_unbound:].sum())}))
        produced.append(path)
    elif args.task == "mean-binding-time":
        if not annihilation:
            raise ConfigError("task", "mean binding time needs the annihilation reaction")
        p0 = np.outer(w, w).ravel()
        mbt, _ = mean_absorption_time(gen, p0)
        path = os.path.join(args.out, "mean_binding_time.csv")
        with open(path, "w") as fh:
            fh.write("mean_binding_time\n")
            fh.write(f"{mbt!r}\n")
        print(json.dumps({"mean_binding_time": mbt}))
        produced.append(path)
    else:  # pbound-transient
        if annihilation:
            raise ConfigError("task", "bound-probability transient needs the reversible reaction")
        t_grid = np.linspace(0.0, cfg.run.t_end, cfg.run.t_grid_num or 41)
        p0 = np.zeros(gen.Q.shape[0])
        p0[gen.n_unbound:] = w  # one complex, uniformly placed
        P = transient_solve(gen, p0, t_grid)
        pb = P[gen.n_unbound:, :].sum(axis=0)
        path = os.path.join(args.out, "pbound_oracle.csv")
        with open(path, "w") as fh:
            fh.write("time,pbound\n")
            for t, v in zip(t_grid, pb):
                fh.write(f"{t!r},{v!r}\n")
        print(json.dumps({"pbound_final": float(pb[-1])}))
        produced.append(path)
    write_manifest(cfg, args.out, produced, engine="oracle")
    return 0


def cmd_show_config(args):
    cfg = builtin_scenario(args.scenario)
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    return 0


def _add_scenario_args(p, with_overrides=True):
    p.add_argument("--scenario", choices=sorted(BUILTIN_SCENARIOS), help="built-in scenario")
    p.add_argument("--config", help="scenario JSON file")
    if with_overrides:
        p.add_argument("--level", type=int, default=None, help="override mesh refinement level")
        p.add_argument("--n", type=int, default=None, help="override realization count")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.add_argument("--cache", default=None, help="reaction-table cache directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="crddme",
        description="Simulate reaction-drift-diffusion jump processes on triangular meshes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh-info", help="inspect a mesh")
    p.add_argument("--mesh", help="mesh file path")
    p.add_argument("--shape", choices=("square", "disk"))
    p.add_argument("--center", default="0,0")
    p.add_argument("--size", type=float, default=1.0)
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mesh_info)

    p = sub.add_parser("assemble", help="assemble and export a hop-rate operator")
    _add_scenario_args(p)
    p.add_argument("--species", required=True)
    p.add_argument("--allow-nonmonotone", action="store_true",
                   help="clamp negative rates to zero (diagnostic only)")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("steady-solve", help="solve one steady-state study level")
    p.add_argument("--study", choices=sorted(STEADY_STUDIES), required=True)
    p.add_argument("--level", type=int, default=3)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_steady_solve)

    p = sub.add_parser("converge", help="refinement study: L2 errors and rates")
    p.add_argument("--study", choices=sorted(STEADY_STUDIES), required=True)
    p.add_argument("--levels", default="2:5", help="coarse:fine refinement range")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("tabulate", help="tabulate reaction rate tables")
    _add_scenario_args(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_tabulate)

    p = sub.add_parser("simulate", help="run a jump-process ensemble")
    _add_scenario_args(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bd", help="run the time-discretized reference ensemble")
    _add_scenario_args(p)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_bd)

    p = sub.add_parser("oracle", help="direct master-equation solves")
    _add_scenario_args(p)
    p.add_argument("--task", choices=("stationary", "pbound-transient", "mean-binding-time"),
                   required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("show-config", help="print a built-in scenario as JSON")
    p.add_argument("--scenario", choices=sorted(BUILTIN_SCENARIOS), required=True)
    p.set_defaults(func=cmd_show_config)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MeshError, FileNotFoundError) as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH
    except (MMatrixError, NumericsError, SimulationError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
