import json

import numpy as np
import pytest

from crddme.scenarios import (
    BUILTIN_SCENARIOS,
    ConfigError,
    builtin_scenario,
    config_from_dict,
    config_hash,
    steady_study,
)


class TestRoundTrip:
    @pytest.mark.parametrize("name", sorted(BUILTIN_SCENARIOS))
    def test_builtin_roundtrip_lossless(self, name):
        cfg = builtin_scenario(name)
        d = cfg.to_dict()
        # through JSON text and back
        cfg2 = config_from_dict(json.loads(json.dumps(d)))
        assert cfg2.to_dict() == d
        assert config_hash(cfg2) == config_hash(cfg)

    def test_hash_changes_with_content(self):
        a = builtin_scenario("revAB-disk")
        b = builtin_scenario("revAB-disk", master_seed=99)
        assert config_hash(a) != config_hash(b)


class TestValidation:
    def base(self):
        return builtin_scenario("revAB-disk").to_dict()

    def test_unknown_field_reports_path(self):
        d = self.base()
        d["species"][0]["diffusivty"] = 1.0
        with pytest.raises(ConfigError, match=r"species\[0\]"):
            config_from_dict(d)

    def test_bad_potential_kind(self):
        d = self.base()
        d["species"][1]["potential"]["kind"] = "cubic"
        with pytest.raises(ConfigError, match=r"species\[1\].potential.kind"):
            config_from_dict(d)

    def test_unknown_reaction_species(self):
        d = self.base()
        d["bimolecular"]["species_b"] = "Z"
        with pytest.raises(ConfigError, match="bimolecular.species_b"):
            config_from_dict(d)

    def test_missing_dissociation_mode(self):
        d = self.base()
        d["bimolecular"]["dissociation_mode"] = ""
        with pytest.raises(ConfigError, match="dissociation_mode"):
            config_from_dict(d)

    def test_negative_diffusivity(self):
        d = self.base()
        d["species"][0]["diffusivity"] = -1.0
        with pytest.raises(ConfigError, match=r"species\[0\].diffusivity"):
            config_from_dict(d)

    def test_low_sample_count(self):
        d = self.base()
        d["tabulation"]["samples_per_pair"] = 10
        with pytest.raises(ConfigError, match="samples_per_pair"):
            config_from_dict(d)


class TestPaperParameterSets:
    def test_annihilation_defaults(self):
        cfg = builtin_scenario("annihil-disk")
        assert cfg.domain.kind == "disk"
        assert cfg.domain.center == (0.05, 0.05)
        assert cfg.domain.size == 0.1
        assert cfg.bimolecular.rate == 1e9
        assert cfg.bimolecular.radius == 1e-3
        assert all(s.diffusivity == 10.0 for s in cfg.species)
        sq = builtin_scenario("annihil-square")
        assert sq.domain.center == (0.0, 0.0)
        assert sq.domain.size == 0.1

    def test_reversible_defaults(self):
        cfg = builtin_scenario("revAB-disk")
        assert cfg.bimolecular.rate == 1e6
        assert cfg.bimolecular.kd == 2.0
        assert all(s.diffusivity == 0.1 for s in cfg.species)
        assert cfg.run.bd_dt == 1e-10

    def test_multiparticle_defaults(self):
        cfg = builtin_scenario("multiparticle-disk")
        rates = {(l.source, l.target): l.rate for l in cfg.linear}
        assert rates[("A", "B")] == 10.0
        assert rates[("B", "A")] == 5.0
        assert cfg.bimolecular.rate == 1e5
        assert cfg.bimolecular.kd == 2.0
        assert cfg.domain.center == (0.5, 0.5)

    def test_immune_synapse_defaults(self):
        cfg = builtin_scenario("is-tcr-pmhc")
        assert cfg.domain.size == 5.6
        by_name = {s.name: s for s in cfg.species}
        assert by_name["TCR"].diffusivity == 0.1
        assert by_name["TCR-pMHC"].diffusivity == 0.06
        assert by_name["TCR-pMHC"].potential.params == {"f0": 1.0, "break_radius": 4.0}
        assert by_name["TCR"].init.region == "outside_radius"
        assert by_name["TCR"].init.radius == 2.0
        assert cfg.bimolecular.rate == pytest.approx(2e5 / 6.023)
        assert cfg.bimolecular.radius == 0.015
        assert cfg.bimolecular.mu == 0.1
        assert cfg.run.snapshot_times == (0.0, 0.1, 1.5, 3.0, 9.0, 20.0)

    def test_steady_studies_cover_six_cases(self):
        names = {
            "square-quadratic", "circle-quadratic",
            "square-quadratic30x", "circle-quadratic30x",
            "square-twowell", "circle-twowell",
        }
        for n in names:
            steady_study(n)
        with pytest.raises(ConfigError):
            steady_study("hexagon-cubic")
