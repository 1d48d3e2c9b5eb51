"""Jump-process simulation of reaction-drift-diffusion systems on meshes."""

__version__ = "0.1.0"

from . import (  # noqa: F401
    bd,
    eafe,
    fields,
    fpe_oracle,
    mesh,
    pipeline,
    quadrature,
    reactions,
    scenarios,
    ssa,
    stats,
)
