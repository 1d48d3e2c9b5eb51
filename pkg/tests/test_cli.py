import json
import os

import numpy as np
import pytest

from crddme.cli import main
from crddme.pipeline import bd_config_from_scenario, build_assets, run_bd, run_simulation
from crddme.scenarios import builtin_scenario


def small_reversible(tmp_path=None, **kw):
    args = dict(level=1, n_realizations=32, t_end=2e-3, t_grid_num=5,
                samples_per_pair=2000, rate=1e6, radius=0.02)
    args.update(kw)
    return builtin_scenario("revAB-disk", **args)


class TestPipeline:
    def test_run_simulation_writes_outputs(self, tmp_path):
        cfg = small_reversible()
        out = run_simulation(cfg, outdir=tmp_path / "run")
        assert (tmp_path / "run" / "pbound.csv").exists()
        assert (tmp_path / "run" / "manifest.json").exists()
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["engine"] == "crddme"
        assert manifest["config_hash"]
        assert out["grid_counts"].shape == (32, 3, 5)

    def test_reproducible_csv_bytes(self, tmp_path):
        cfg = small_reversible()
        run_simulation(cfg, outdir=tmp_path / "a")
        run_simulation(cfg, outdir=tmp_path / "b")
        pa = (tmp_path / "a" / "pbound.csv").read_bytes()
        pb = (tmp_path / "b" / "pbound.csv").read_bytes()
        assert pa == pb

    def test_table_cache_reused(self, tmp_path):
        cfg = small_reversible()
        cache = tmp_path / "cache"
        a1 = build_assets(cfg, cache_dir=cache)
        files = list(cache.iterdir())
        assert len(files) == 1
        a2 = build_assets(cfg, cache_dir=cache)
        assert np.array_equal(a1.tables.kplus_pair, a2.tables.kplus_pair)
        assert np.array_equal(a1.tables.dis_rate, a2.tables.dis_rate)
        # same files, untouched
        assert list(cache.iterdir()) == files

    def test_cache_key_tracks_mesh(self, tmp_path):
        cache = tmp_path / "cache"
        build_assets(small_reversible(), cache_dir=cache)
        build_assets(small_reversible(level=2), cache_dir=cache)
        assert len(list(cache.iterdir())) == 2

    def test_bd_mapping_matches_scenario(self):
        cfg = small_reversible()
        bdc = bd_config_from_scenario(cfg)
        assert bdc.domain == ("disk", (0.05, 0.05), 0.1)
        assert [s.name for s in bdc.species] == ["A", "B", "C"]
        assert bdc.kernel.rate == 1e6
        assert bdc.dissociation == ("detailed_balance", 2.0)
        assert bdc.dt == cfg.run.bd_dt

    def test_run_bd_writes_column_compatible_outputs(self, tmp_path):
        cfg = small_reversible(n_realizations=16, bd_dt=1e-6)
        run_simulation(cfg, outdir=tmp_path / "ssa")
        run_bd(cfg, outdir=tmp_path / "bd")
        head_a = (tmp_path / "ssa" / "pbound.csv").read_text().splitlines()[0]
        head_b = (tmp_path / "bd" / "pbound.csv").read_text().splitlines()[0]
        assert head_a == head_b == "time,pbound,ci_halfwidth"


class TestCLI:
    def test_mesh_info_exit_codes(self, tmp_path, capsys):
        assert main(["mesh-info", "--shape", "disk", "--size", "0.1", "--level", "1"]) == 0
        info = json.loads(capsys.readouterr().out)
        assert info["euler_characteristic"] == 1
        assert main(["mesh-info", "--mesh", str(tmp_path / "missing.txt")]) == 3

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        cfg = builtin_scenario("revAB-disk").to_dict()
        cfg["species"][0]["diffusivity"] = -2.0
        bad.write_text(json.dumps(cfg))
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_converge_smoke(self, tmp_path, capsys):
        rc = main(["converge", "--study", "circle-quadratic", "--levels", "1:3",
                   "--out", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "convergence_circle-quadratic.csv").read_text().splitlines()
        assert lines[0] == "level,nodes,l2_error,rate"
        assert len(lines) == 3  # two errors from three levels

    def test_simulate_smoke(self, tmp_path):
        cfg = small_reversible()
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        rc = main(["simulate", "--config", str(path), "--out", str(tmp_path / "run"),
                   "--cache", str(tmp_path / "cache")])
        assert rc == 0
        assert (tmp_path / "run" / "pbound.csv").exists()

    def test_oracle_smoke(self, tmp_path, capsys):
        cfg = small_reversible()
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        rc = main(["oracle", "--config", str(path), "--task", "stationary",
                   "--out", str(tmp_path / "o")])
        assert rc == 0
        out = json.loads(capsys.readouterr().out.splitlines()[-1])
        assert out["bound_probability"] == pytest.approx(1 / 3, abs=1e-9)

    def test_assemble_smoke(self, tmp_path, capsys):
        rc = main(["assemble", "--scenario", "revAB-disk", "--level", "1",
                   "--species", "A", "--out", str(tmp_path)])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["m_matrix"] is True
        assert summary["stationarity_residual"] <= 1e-12 * summary["max_exit_rate"]
        op_file = tmp_path / "rate_operator_A.txt"
        n, nnz = (int(v) for v in op_file.read_text().splitlines()[0].split())
        assert nnz > n

    def test_show_config(self, capsys):
        assert main(["show-config", "--scenario", "is-tcr-pmhc"]) == 0
        d = json.loads(capsys.readouterr().out)
        assert d["domain"]["size"] == 5.6
