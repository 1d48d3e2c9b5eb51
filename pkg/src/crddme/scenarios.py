"""Scenario configuration: a JSON-serializable description of a simulation.

A scenario names the domain, the species (diffusivity, potential, initial
placement), the reactions, the tabulation controls, and the run controls.
Configs round-trip losslessly through to_dict/from_dict; validation errors
name the offending field path.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .fields import (
    ConstantPotential,
    PiecewiseRadialPotential,
    QuadraticPotential,
    TwoWellPotential,
)

__all__ = [
    "ConfigError",
    "DomainSpec",
    "PotentialSpec",
    "InitSpec",
    "SpeciesSpec",
    "BimolecularSpec",
    "LinearSpec",
    "TabulationSpec",
    "RunSpec",
    "ScenarioConfig",
    "SteadyStudy",
    "make_potential",
    "config_from_dict",
    "config_hash",
    "builtin_scenario",
    "BUILTIN_SCENARIOS",
    "steady_study",
    "STEADY_STUDIES",
]


class ConfigError(Exception):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class DomainSpec:
    kind: str = "square"          # square | disk | file
    center: tuple = (0.0, 0.0)
    size: float = 1.0             # side length or radius
    level: int = 0
    path: str = ""


@dataclass
class PotentialSpec:
    kind: str = "constant"        # constant | quadratic | two_well | piecewise_radial
    params: dict = field(default_factory=dict)


@dataclass
class InitSpec:
    mode: str = "none"            # none | per_voxel | uniform_particles
    count: int = 0
    region: str = "all"           # all | outside_radius | inside_radius
    radius: float = 0.0


@dataclass
class SpeciesSpec:
    name: str
    diffusivity: float
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    init: InitSpec = field(default_factory=InitSpec)


@dataclass
class BimolecularSpec:
    species_a: str = "A"
    species_b: str = "B"
    species_c: str = ""           # empty: annihilation (no product)
    rate: float = 1.0
    radius: float = 1e-3
    gamma: float = 0.5
    dissociation_mode: str = ""   # detailed_balance | fixed_rate | "" (annihilation)
    kd: float = 0.0
    mu: float = 0.0


@dataclass
class LinearSpec:
    source: str
    target: str
    rate: float


@dataclass
class TabulationSpec:
    samples_per_pair: int = 10000
    seed: int = 0


@dataclass
class RunSpec:
    t_end: float = 1.0
    n_realizations: int = 100
    master_seed: int = 0
    outputs: tuple = ("species_counts",)  # binding_times | pbound | species_counts | snapshots
    t_grid_num: int = 0
    snapshot_times: tuple = ()
    bd_dt: float = 1e-10


@dataclass
class ScenarioConfig:
    name: str
    domain: DomainSpec
    species: list
    bimolecular: BimolecularSpec = None
    linear: list = field(default_factory=list)
    tabulation: TabulationSpec = field(default_factory=TabulationSpec)
    run: RunSpec = field(default_factory=RunSpec)

    def to_dict(self):
        d = asdict(self)
        if self.bimolecular is None:
            d["bimolecular"] = None
        return d

    def species_names(self):
        return [s.name for s in self.species]

    def validate(self):
        if self.domain.kind not in ("square", "disk", "file"):
            raise ConfigError("domain.kind", f"unknown kind {self.domain.kind!r}")
        if self.domain.kind != "file" and self.domain.size <= 0:
            raise ConfigError("domain.size", "must be positive")
        if self.domain.level < 0:
            raise ConfigError("domain.level", "must be nonnegative")
        names = self.species_names()
        if len(set(names)) != len(names):
            raise ConfigError("species", "duplicate species names")
        for i, s in enumerate(self.species):
            if s.diffusivity <= 0:
                raise ConfigError(f"species[{i}].diffusivity", "must be positive")
            if s.init.mode not in ("none", "per_voxel", "uniform_particles"):
                raise ConfigError(f"species[{i}].init.mode", f"unknown mode {s.init.mode!r}")
            if s.init.mode != "none" and s.init.count < 0:
                raise ConfigError(f"species[{i}].init.count", "must be nonnegative")
            if s.init.region not in ("all", "outside_radius", "inside_radius"):
                raise ConfigError(f"species[{i}].init.region", f"unknown region {s.init.region!r}")
            make_potential(s.potential, path=f"species[{i}].potential")
        b = self.bimolecular
        if b is not None:
            for key, nm in (("species_a", b.species_a), ("species_b", b.species_b)):
                if nm not in names:
                    raise ConfigError(f"bimolecular.{key}", f"unknown species {nm!r}")
            if b.species_c and b.species_c not in names:
                raise ConfigError("bimolecular.species_c", f"unknown species {b.species_c!r}")
            if b.rate < 0:
                raise ConfigError("bimolecular.rate", "must be nonnegative")
            if b.radius <= 0:
                raise ConfigError("bimolecular.radius", "must be positive")
            if not 0.0 <= b.gamma <= 1.0:
                raise ConfigError("bimolecular.gamma", "must lie in [0, 1]")
            if b.species_c:
                if b.dissociation_mode == "detailed_balance":
                    if b.kd <= 0:
                        raise ConfigError("bimolecular.kd", "must be positive")
                elif b.dissociation_mode == "fixed_rate":
                    if b.mu <= 0:
                        raise ConfigError("bimolecular.mu", "must be positive")
                else:
                    raise ConfigError(
                        "bimolecular.dissociation_mode",
                        f"reversible reaction needs a mode, got {b.dissociation_mode!r}",
                    )
        for i, lin in enumerate(self.linear):
            if lin.source not in names or lin.target not in names:
                raise ConfigError(f"linear[{i}]", "unknown species")
            if lin.rate < 0:
                raise ConfigError(f"linear[{i}].rate", "must be nonnegative")
        if self.tabulation.samples_per_pair < 1000:
            raise ConfigError("tabulation.samples_per_pair", "must be at least 1000")
        if self.run.t_end <= 0:
            raise ConfigError("run.t_end", "must be positive")
        if self.run.n_realizations < 1:
            raise ConfigError("run.n_realizations", "must be at least 1")
        for o in self.run.outputs:
            if o not in ("binding_times", "pbound", "species_counts", "snapshots"):
                raise ConfigError("run.outputs", f"unknown output {o!r}")
        return self


_POTENTIALS = {
    "constant": (ConstantPotential, {"value"}),
    "quadratic": (QuadraticPotential, {"scale"}),
    "two_well": (TwoWellPotential, set()),
    "piecewise_radial": (PiecewiseRadialPotential, {"f0", "break_radius"}),
}


def make_potential(spec, path="potential"):
    if spec.kind not in _POTENTIALS:
        raise ConfigError(f"{path}.kind", f"unknown potential {spec.kind!r}")
    cls, allowed = _POTENTIALS[spec.kind]
    extra = set(spec.params) - allowed
    if extra:
        raise ConfigError(f"{path}.params", f"unexpected parameter(s) {sorted(extra)}")
    try:
        return cls(**spec.params)
    except TypeError as exc:
        raise ConfigError(f"{path}.params", str(exc)) from None


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    fields = {f.name for f in cls.__dataclass_fields__.values()}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(path, f"unknown field(s) {sorted(unknown)}")
    return data


def config_from_dict(d):
    """Parse and validate a scenario dictionary (inverse of to_dict)."""
    data = _build(ScenarioConfig, d, "")
    try:
        domain = DomainSpec(**_build(DomainSpec, data.get("domain", {}), "domain"))
        domain.center = tuple(domain.center)
        species = []
        for i, s in enumerate(data.get("species", [])):
            s = dict(_build(SpeciesSpec, s, f"species[{i}]"))
            s["potential"] = PotentialSpec(**_build(PotentialSpec, s.get("potential", {}), f"species[{i}].potential"))
            s["init"] = InitSpec(**_build(InitSpec, s.get("init", {}), f"species[{i}].init"))
            species.append(SpeciesSpec(**s))
        bim = data.get("bimolecular")
        bim = BimolecularSpec(**_build(BimolecularSpec, bim, "bimolecular")) if bim else None
        linear = [
            LinearSpec(**_build(LinearSpec, l, f"linear[{i}]"))
            for i, l in enumerate(data.get("linear", []))
        ]
        tab = TabulationSpec(**_build(TabulationSpec, data.get("tabulation", {}), "tabulation"))
        run = dict(_build(RunSpec, data.get("run", {}), "run"))
        run["outputs"] = tuple(run.get("outputs", ("species_counts",)))
        run["snapshot_times"] = tuple(run.get("snapshot_times", ()))
        run = RunSpec(**run)
    except TypeError as exc:
        raise ConfigError("", str(exc)) from None
    cfg = ScenarioConfig(
        name=data.get("name", "unnamed"),
        domain=domain,
        species=species,
        bimolecular=bim,
        linear=linear,
        tabulation=tab,
        run=run,
    )
    return cfg.validate()


def canonical_json(config):
    return json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))


def config_hash(config):
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


# ---------------------------------------------------------------------------
# built-in scenarios


def annihilation_scenario(domain_kind="disk", level=3, n_realizations=10000,
                          master_seed=0, rate=1e9, radius=1e-3, diffusivity=10.0,
                          t_end=1.0, samples_per_pair=10000, tabulation_seed=0):
    """Two-particle pair annihilation in a quadratic well.

    Defaults: square of side 0.1 um at the origin or disk of radius 0.1 um
    at (0.05, 0.05); D = 10 um^2/s; attempt rate 1e9/s within 1 nm.
    """
    if domain_kind == "square":
        domain = DomainSpec("square", (0.0, 0.0), 0.1, level)
    else:
        domain = DomainSpec("disk", (0.05, 0.05), 0.1, level)
    quad = PotentialSpec("quadratic", {"scale": 1.0})
    uniform1 = InitSpec(mode="uniform_particles", count=1)
    return ScenarioConfig(
        name=f"annihilation-{domain_kind}",
        domain=domain,
        species=[
            SpeciesSpec("A", diffusivity, quad, uniform1),
            SpeciesSpec("B", diffusivity, quad, uniform1),
        ],
        bimolecular=BimolecularSpec(
            species_a="A", species_b="B", species_c="",
            rate=rate, radius=radius, gamma=0.5,
        ),
        tabulation=TabulationSpec(samples_per_pair, tabulation_seed),
        run=RunSpec(
            t_end=t_end, n_realizations=n_realizations, master_seed=master_seed,
            outputs=("binding_times",),
        ),
    ).validate()


def reversible_scenario(level=3, n_realizations=10000, master_seed=0,
                        rate=1e6, radius=1e-3, kd=2.0, diffusivity=0.1,
                        t_end=1.0, t_grid_num=41, samples_per_pair=10000,
                        tabulation_seed=0, bd_dt=1e-10):
    """Reversible pair reaction in a disk, started from one bound complex."""
    domain = DomainSpec("disk", (0.05, 0.05), 0.1, level)
    quad = PotentialSpec("quadratic", {"scale": 1.0})
    return ScenarioConfig(
        name="reversible-disk",
        domain=domain,
        species=[
            SpeciesSpec("A", diffusivity, quad),
            SpeciesSpec("B", diffusivity, quad),
            SpeciesSpec("C", diffusivity, quad, InitSpec(mode="uniform_particles", count=1)),
        ],
        bimolecular=BimolecularSpec(
            species_a="A", species_b="B", species_c="C",
            rate=rate, radius=radius, gamma=0.5,
            dissociation_mode="detailed_balance", kd=kd,
        ),
        tabulation=TabulationSpec(samples_per_pair, tabulation_seed),
        run=RunSpec(
            t_end=t_end, n_realizations=n_realizations, master_seed=master_seed,
            outputs=("pbound",), t_grid_num=t_grid_num, bd_dt=bd_dt,
        ),
    ).validate()


def multiparticle_scenario(level=3, n_realizations=100, master_seed=0,
                           rate=1e5, radius=1e-3, kd=2.0, diffusivity=0.1,
                           k_on=10.0, k_off=5.0, n_a=20, n_b=20,
                           t_end=0.5, t_grid_num=51, samples_per_pair=10000,
                           tabulation_seed=0, bd_dt=1e-10):
    """A <-> B conversions coupled to the reversible pair reaction.

    The published study leaves the initial copy numbers unstated; the
    defaults start n_a A and n_b B particles placed uniformly.
    """
    domain = DomainSpec("disk", (0.5, 0.5), 0.1, level)
    quad = PotentialSpec("quadratic", {"scale": 1.0})
    return ScenarioConfig(
        name="multiparticle-disk",
        domain=domain,
        species=[
            SpeciesSpec("A", diffusivity, quad, InitSpec(mode="uniform_particles", count=n_a)),
            SpeciesSpec("B", diffusivity, quad, InitSpec(mode="uniform_particles", count=n_b)),
            SpeciesSpec("C", diffusivity, quad),
        ],
        bimolecular=BimolecularSpec(
            species_a="A", species_b="B", species_c="C",
            rate=rate, radius=radius, gamma=0.5,
            dissociation_mode="detailed_balance", kd=kd,
        ),
        linear=[LinearSpec("A", "B", k_on), LinearSpec("B", "A", k_off)],
        tabulation=TabulationSpec(samples_per_pair, tabulation_seed),
        run=RunSpec(
            t_end=t_end, n_realizations=n_realizations, master_seed=master_seed,
            outputs=("species_counts",), t_grid_num=t_grid_num, bd_dt=bd_dt,
        ),
    ).validate()


def immune_synapse_scenario(level=6, n_realizations=1, master_seed=0,
                            per_voxel=10, t_end=20.0,
                            snapshot_times=(0.0, 0.1, 1.5, 3.0, 9.0, 20.0),
                            samples_per_pair=10000, tabulation_seed=0):
    """Receptor/ligand binding with centripetal transport of complexes.

    Disk of radius 5.6 um; free receptors and ligands diffuse at 0.1 um^2/s
    with no potential, starting per_voxel copies in every cell outside the
    2 um central region; complexes diffuse at 0.06 um^2/s under the radial
    ramp potential (slope 1 inside 4 um, 2 outside) and unbind at 0.1/s.
    """
    domain = DomainSpec("disk", (0.0, 0.0), 5.6, level)
    flat = PotentialSpec("constant", {"value": 0.0})
    ramp = PotentialSpec("piecewise_radial", {"f0": 1.0, "break_radius": 4.0})
    outside = InitSpec(mode="per_voxel", count=per_voxel, region="outside_radius", radius=2.0)
    return ScenarioConfig(
        name="immune-synapse",
        domain=domain,
        species=[
            SpeciesSpec("TCR", 0.1, flat, outside),
            SpeciesSpec("pMHC", 0.1, flat, outside),
            SpeciesSpec("TCR-pMHC", 0.06, ramp),
        ],
        bimolecular=BimolecularSpec(
            species_a="TCR", species_b="pMHC", species_c="TCR-pMHC",
            rate=2e5 / 6.023, radius=0.015, gamma=0.5,
            dissociation_mode="fixed_rate", mu=0.1,
        ),
        tabulation=TabulationSpec(samples_per_pair, tabulation_seed),
        run=RunSpec(
            t_end=t_end, n_realizations=n_realizations, master_seed=master_seed,
            outputs=("snapshots", "species_counts"), t_grid_num=21,
            snapshot_times=tuple(snapshot_times),
        ),
    ).validate()


BUILTIN_SCENARIOS = {
    "annihil-square": lambda **kw: annihilation_scenario("square", **kw),
    "annihil-disk": lambda **kw: annihilation_scenario("disk", **kw),
    "revAB-disk": reversible_scenario,
    "multiparticle-disk": multiparticle_scenario,
    "is-tcr-pmhc": immune_synapse_scenario,
}


def builtin_scenario(name, **overrides):
    if name not in BUILTIN_SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {name!r}; know {sorted(BUILTIN_SCENARIOS)}")
    return BUILTIN_SCENARIOS[name](**overrides)


# ---------------------------------------------------------------------------
# steady-state accuracy studies


def _gaussian(pts):
    pts = np.atleast_2d(pts)
    return np.exp(-(pts[:, 0] ** 2) - pts[:, 1] ** 2)


def _trig_solution(pts):
    pts = np.atleast_2d(pts)
    return _gaussian(pts) * np.cos(2 * np.pi * pts[:, 0]) * np.cos(2 * np.pi * pts[:, 1])


def _trig_forcing(pts):
    pts = np.atleast_2d(pts)
    x1, x2 = pts[:, 0], pts[:, 1]
    c1, c2 = np.cos(2 * np.pi * x1), np.cos(2 * np.pi * x2)
    s1, s2 = np.sin(2 * np.pi * x1), np.sin(2 * np.pi * x2)
    return -np.exp(-(x1**2) - x2**2) * (
        (-1 - 8 * np.pi**2) * c1 * c2 + 4 * np.pi * (x1 * c2 * s1 + x2 * c1 * s2)
    )


@dataclass
class SteadyStudy:
    """One steady-state accuracy case: domain, potential, forcing, exact."""

    name: str
    domain_kind: str
    center: tuple
    size: float
    potential: object
    diffusivity: float
    forcing: object
    exact: object = None


STEADY_STUDIES = {
    "square-quadratic": SteadyStudy(
        "square-quadratic", "square", (0.5, 0.5), 2.0,
        QuadraticPotential(1.0), 1.0, _trig_forcing, _trig_solution,
    ),
    "circle-quadratic": SteadyStudy(
        "circle-quadratic", "disk", (-0.5, 0.0), 1.0,
        QuadraticPotential(1.0), 10.0, _gaussian, _gaussian,
    ),
    "square-quadratic30x": SteadyStudy(
        "square-quadratic30x", "square", (0.5, 0.5), 2.0,
        QuadraticPotential(30.0), 1.0, _trig_forcing, None,
    ),
    "circle-quadratic30x": SteadyStudy(
        "circle-quadratic30x", "disk", (-0.5, 0.0), 1.0,
        QuadraticPotential(30.0), 10.0, _gaussian, None,
    ),
    "square-twowell": SteadyStudy(
        "square-twowell", "square", (0.0, 0.0), 1.0,
        TwoWellPotential(), 1.0, _gaussian, None,
    ),
    "circle-twowell": SteadyStudy(
        "circle-twowell", "disk", (0.0, 0.0), 1.0,
        TwoWellPotential(), 1.0, _gaussian, None,
    ),
}


def steady_study(name):
    if name not in STEADY_STUDIES:
        raise ConfigError("study", f"unknown study {name!r}; know {sorted(STEADY_STUDIES)}")
    return STEADY_STUDIES[name]
