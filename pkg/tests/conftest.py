import numpy as np
import pytest

from crddme.eafe import assemble_eafe_stiffness, transition_rate_matrix
from crddme.mesh import dual_cells, generate_mesh


@pytest.fixture(scope="session")
def small_disk():
    mesh = generate_mesh("disk", 1, center=(0.05, 0.05), size=0.1)
    return mesh, dual_cells(mesh)


def rate_operator(mesh, duals, potential, diffusivity):
    S = assemble_eafe_stiffness(mesh, potential, diffusivity)
    return transition_rate_matrix(S, duals)


def toy_tables(n_voxels, kplus_entries, km_entries=None, rate=1.0, radius=1.0, kd=0.0, mu=0.0, mode=""):
    """Hand-built ReactionTables from {(i, j): [(k, rate), ...]} dicts."""
    from crddme.reactions import DoiKernel, ReactionTables

    keys = sorted(kplus_entries)
    pairs = np.array(keys, dtype=np.int64).reshape(-1, 2) if keys else np.zeros((0, 2), dtype=np.int64)
    pl_start = np.zeros(len(keys) + 1, dtype=np.int64)
    pl_voxel, pl_rate = [], []
    kplus = np.zeros(len(keys))
    for p, key in enumerate(keys):
        ent = sorted(kplus_entries[key])
        pl_voxel.extend(k for k, _ in ent)
        rates = np.array([r for _, r in ent], dtype=float)
        pl_rate.extend(rates)
        kplus[p] = rates.sum()
        pl_start[p + 1] = pl_start[p] + len(ent)
    tables = ReactionTables(
        n_voxels=n_voxels,
        pairs=pairs,
        kplus_pair=kplus,
        pl_start=pl_start,
        pl_voxel=np.array(pl_voxel, dtype=np.int64),
        pl_rate=np.array(pl_rate, dtype=float),
        kernel=DoiKernel(rate=rate, radius=radius),
        seed=0,
        samples_per_pair=1000,
    )
    if km_entries is not None:
        dis_start = np.zeros(n_voxels + 1, dtype=np.int64)
        dis_i, dis_j, dis_rate = [], [], []
        km_total = np.zeros(n_voxels)
        for k in range(n_voxels):
            ent = sorted(km_entries.get(k, []))
            for i, j, r in ent:
                dis_i.append(i)
                dis_j.append(j)
                dis_rate.append(r)
            dis_start[k + 1] = dis_start[k] + len(ent)
            km_total[k] = sum(r for _, _, r in ent)
        from dataclasses import replace

        tables = replace(
            tables,
            km_total=km_total,
            dis_start=dis_start,
            dis_i=np.array(dis_i, dtype=np.int64),
            dis_j=np.array(dis_j, dtype=np.int64),
            dis_rate=np.array(dis_rate, dtype=float),
            dissociation_mode=mode or "detailed_balance",
            kd=kd,
            mu=mu,
        )
    return tables
