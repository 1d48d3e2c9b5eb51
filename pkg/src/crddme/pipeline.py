"""Scenario orchestration: meshes, operators, tables, ensembles, outputs.

Tabulation artifacts are content-addressed by (mesh hash, kernel, seed,
sample count, dissociation parameters, potentials) so repeated runs reuse
tables only when every ingredient matches.
"""

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bd import BDConfig, BDSpecies, bd_simulate
from .eafe import assemble_eafe_stiffness, transition_rate_matrix
from .fields import values_at_nodes
from .mesh import TriangleLocator, dual_cells, generate_mesh, load_mesh, mesh_hash
from .reactions import (
    DoiKernel,
    load_tables,
    save_tables,
    tabulate_association,
    tabulate_dissociation,
)
from .scenarios import config_hash, make_potential
from .ssa import build_channels, run_ensemble
from .stats import mean_ci, pbound_curve

__all__ = ["Assets", "build_mesh", "build_assets", "run_simulation", "run_bd",
           "bd_config_from_scenario", "write_manifest"]


def build_mesh(domain):
    if domain.kind == "file":
        return load_mesh(domain.path)
    return generate_mesh(domain.kind, domain.level, center=tuple(domain.center), size=domain.size)


@dataclass
class Assets:
    config: object
    mesh: object
    duals: object
    locator: object
    potentials: dict
    rate_ops: list
    tables: object
    channels: object
    base_counts: np.ndarray
    random_inits: list
    init_weights: np.ndarray
    tables_key: str = ""


def _region_mask(mesh, domain, init):
    if init.region == "all":
        return np.ones(mesh.n_nodes, dtype=bool)
    r = np.hypot(
        mesh.nodes[:, 0] - domain.center[0], mesh.nodes[:, 1] - domain.center[1]
    )
    if init.region == "outside_radius":
        return r > init.radius
    return r <= init.radius


def _tables_cache_key(config, mhash):
    b = config.bimolecular
    pot_sig = [
        (s.potential.kind, tuple(sorted(s.potential.params.items())))
        for s in config.species
    ]
    payload = json.dumps(
        {
            "mesh": mhash,
            "kernel": [b.rate, b.radius, b.gamma],
            "samples": config.tabulation.samples_per_pair,
            "seed": config.tabulation.seed,
            "dissociation": [b.dissociation_mode, b.kd, b.mu, b.species_c],
            "potentials": pot_sig,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def build_assets(config, cache_dir=None, verbose=False):
    """Resolve a validated scenario into simulation-ready objects."""
    config.validate()
    mesh = build_mesh(config.domain)
    duals = dual_cells(mesh)
    locator = TriangleLocator(mesh)
    mhash = mesh_hash(mesh)

    potentials = {s.name: make_potential(s.potential) for s in config.species}
    rate_ops = []
    for s in config.species:
        S = assemble_eafe_stiffness(mesh, potentials[s.name], s.diffusivity)
        rate_ops.append(transition_rate_matrix(S, duals, species=s.name))

    tables = None
    tables_key = ""
    bim = None
    if config.bimolecular is not None:
        b = config.bimolecular
        tables_key = _tables_cache_key(config, mhash)
        cache_path = None
        if cache_dir:
            os.makedirs(cache_dir, exist_ok=True)
            cache_path = os.path.join(cache_dir, f"tables-{tables_key[:24]}.txt")
        if cache_path and os.path.exists(cache_path):
            tables = load_tables(cache_path)
            if tables.mesh_hash != mhash:
                raise RuntimeError(f"cached tables at {cache_path} were built for another mesh")
        else:
            kernel = DoiKernel(rate=b.rate, radius=b.radius, gamma=b.gamma)
            tables = tabulate_association(
                mesh, duals, kernel,
                samples_per_pair=config.tabulation.samples_per_pair,
                seed=config.tabulation.seed, locator=locator,
            )
            if b.species_c:
                tables = tabulate_dissociation(
                    tables, duals,
                    potentials[b.species_a], potentials[b.species_b], potentials[b.species_c],
                    b.dissociation_mode,
                    kd=b.kd or None, mu=b.mu or None,
                )
            if cache_path:
                save_tables(tables, cache_path)
        bim = (b.species_a, b.species_b, b.species_c or None)

    channels = build_channels(
        rate_ops,
        config.species_names(),
        tables=tables,
        bimolecular=bim,
        linear=[(l.source, l.target, l.rate) for l in config.linear],
    )

    base_counts = np.zeros((len(config.species), mesh.n_nodes), dtype=np.int64)
    random_inits = []
    for si, s in enumerate(config.species):
        if s.init.mode == "per_voxel":
            base_counts[si, _region_mask(mesh, config.domain, s.init)] = s.init.count
        elif s.init.mode == "uniform_particles":
            if s.init.region != "all":
                raise NotImplementedError("random placement is uniform over the whole domain")
            random_inits.append((s.name, s.init.count))

    return Assets(
        config=config,
        mesh=mesh,
        duals=duals,
        locator=locator,
        potentials=potentials,
        rate_ops=rate_ops,
        tables=tables,
        channels=channels,
        base_counts=base_counts,
        random_inits=random_inits,
        init_weights=duals.volumes,
        tables_key=tables_key,
    )


def _time_grid(run):
    if run.t_grid_num and run.t_grid_num > 0:
        return np.linspace(0.0, run.t_end, run.t_grid_num)
    return None


def run_simulation(config, outdir=None, cache_dir=None, assets=None):
    """Run the jump-process ensemble for a scenario; optionally write CSVs."""
    if assets is None:
        assets = build_assets(config, cache_dir=cache_dir)
    run = config.run
    t_grid = _time_grid(run)
    want_snapshots = "snapshots" in run.outputs and len(run.snapshot_times)
    out = run_ensemble(
        assets.channels,
        assets.base_counts,
        run.t_end,
        run.n_realizations,
        run.master_seed,
        random_inits=assets.random_inits,
        init_weights=assets.init_weights,
        t_grid=t_grid,
        snapshot_times=run.snapshot_times if want_snapshots else None,
        stop_after_first_assoc=("binding_times" in run.outputs
                                and config.bimolecular is not None
                                and not config.bimolecular.species_c),
    )
    out["species"] = config.species_names()
    if outdir:
        _write_outputs(config, assets, out, outdir, engine="crddme")
    return out


def bd_config_from_scenario(config, dt=None):
    """Map a scenario onto the time-discretized reference simulator."""
    b = config.bimolecular
    species = []
    for s in config.species:
        region = (0, 0.0)
        count = 0
        if s.init.mode == "uniform_particles":
            count = s.init.count
        elif s.init.mode == "per_voxel":
            raise NotImplementedError(
                "per-voxel initial conditions are mesh-bound; use particle counts for the reference simulator"
            )
        if s.init.region == "outside_radius":
            region = (1, s.init.radius)
        elif s.init.region == "inside_radius":
            region = (2, s.init.radius)
        species.append(
            BDSpecies(s.name, s.diffusivity, make_potential(s.potential),
                      init_count=count, region=region)
        )
    kernel = None
    dissociation = None
    annihilation = False
    if b is not None:
        kernel = DoiKernel(rate=b.rate, radius=b.radius, gamma=b.gamma)
        if b.species_c:
            if b.dissociation_mode == "detailed_balance":
                dissociation = ("detailed_balance", b.kd)
            else:
                dissociation = ("fixed_rate", b.mu)
        else:
            annihilation = True
        order = [b.species_a, b.species_b] + ([b.species_c] if b.species_c else [])
        rest = [s for s in species if s.name not in order]
        byname = {s.name: s for s in species}
        species = [byname[n] for n in order] + rest
    return BDConfig(
        domain=(config.domain.kind, tuple(config.domain.center), config.domain.size),
        species=species,
        dt=dt if dt is not None else config.run.bd_dt,
        kernel=kernel,
        dissociation=dissociation,
        annihilation=annihilation,
        linear=[(l.source, l.target, l.rate) for l in config.linear],
    )


def run_bd(config, outdir=None, dt=None):
    """Run the reference ensemble for a scenario; outputs mirror run_simulation."""
    bd_config = bd_config_from_scenario(config, dt=dt)
    run = config.run
    t_grid = _time_grid(run)
    out = bd_simulate(
        bd_config, run.t_end, run.n_realizations, run.master_seed,
        t_grid=t_grid,
        stop_after_first_bind=("binding_times" in run.outputs
                               and config.bimolecular is not None
                               and not config.bimolecular.species_c),
    )
    out["species"] = [s.name for s in bd_config.species]
    if outdir:
        _write_outputs(config, None, out, outdir, engine="bd")
    return out


def _write_outputs(config, assets, out, outdir, engine):
    os.makedirs(outdir, exist_ok=True)
    run = config.run
    species = out["species"]
    produced = []

    if "binding_times" in run.outputs:
        path = os.path.join(outdir, "binding_times.csv")
        with open(path, "w") as fh:
            fh.write("realization,binding_time\n")
            for r, t in enumerate(out["binding_times"]):
                fh.write(f"{r},{t!r}\n")
        produced.append(path)

    grid = out.get("grid_times")
    if grid is not None and len(grid) and "species_counts" in run.outputs:
        path = os.path.join(outdir, "species_counts.csv")
        with open(path, "w") as fh:
            fh.write("realization,time," + ",".join(species) + "\n")
            counts = out["grid_counts"]
            for r in range(counts.shape[0]):
                for g, t in enumerate(grid):
                    row = ",".join(str(int(counts[r, s, g])) for s in range(len(species)))
                    fh.write(f"{r},{t!r},{row}\n")
        produced.append(path)
        path = os.path.join(outdir, "mean_counts.csv")
        with open(path, "w") as fh:
            header = ",".join(f"{s}_mean,{s}_ci" for s in species)
            fh.write(f"time,{header}\n")
            counts = out["grid_counts"]
            for g, t in enumerate(grid):
                cells = []
                for s in range(len(species)):
                    m, h = mean_ci(counts[:, s, g].astype(float))
                    cells.append(f"{m!r},{h!r}")
                fh.write(f"{t!r}," + ",".join(cells) + "\n")
        produced.append(path)

    if grid is not None and len(grid) and "pbound" in run.outputs and config.bimolecular is not None:
        c_name = config.bimolecular.species_c
        if c_name:
            c_idx = species.index(c_name)
            ind = out["grid_counts"][:, c_idx, :] > 0
            p, half = pbound_curve(ind)
            path = os.path.join(outdir, "pbound.csv")
            with open(path, "w") as fh:
                fh.write("time,pbound,ci_halfwidth\n")
                for t, pv, hv in zip(grid, p, half):
                    fh.write(f"{t!r},{pv!r},{hv!r}\n")
            produced.append(path)

    snaps = out.get("snapshots")
    if snaps is not None and len(out.get("snapshot_times", ())) and "snapshots" in run.outputs:
        nodes = assets.mesh.nodes if assets is not None else None
        for ti, t in enumerate(out["snapshot_times"]):
            path = os.path.join(outdir, f"snapshot_t{t:g}.csv")
            with open(path, "w") as fh:
                fh.write("voxel,x,y," + ",".join(species) + "\n")
                snap = snaps[0, ti]
                for v in range(snap.shape[1]):
                    x, y = (nodes[v] if nodes is not None else (np.nan, np.nan))
                    row = ",".join(str(int(snap[s, v])) for s in range(len(species)))
                    fh.write(f"{v},{x!r},{y!r},{row}\n")
            produced.append(path)

    write_manifest(config, outdir, produced, engine=engine,
                   extra={"tables_key": getattr(assets, "tables_key", "") if assets else ""})
    return produced


def write_manifest(config, outdir, produced, engine="crddme", extra=None):
    manifest = {
        "engine": engine,
        "scenario": config.to_dict(),
        "config_hash": config_hash(config),
        "master_seed": config.run.master_seed,
        "version": __version__,
        "outputs": [os.path.basename(p) for p in produced],
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path
