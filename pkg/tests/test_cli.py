import json

import numpy as np
import pandas as pd
import pytest

from skillscape import CityPrimitives, EconomyConfig
from skillscape.cli import main
from skillscape.fileio import write_config, write_generator_spec
from skillscape.datagen import GeneratorSpec


def write_symmetric_config(path, C=2):
    config = EconomyConfig(n_cities=C, n_majors=1, lambda_=0.703, theta=1.5,
                           kappa_obs=10.0, sigma2_xi=0.5, sigma2_xihat=0.5,
                           gamma_sig=0.61, zeta_tilde=1.0, tau=0.2,
                           gamma_agg=0.22, gamma_h=0.3, kappa_h=1.0,
                           total_pop=1.0)
    cities = CityPrimitives(productivity=np.full(C, 10.0),
                            amenity=np.zeros(C))
    write_config(path, config, cities,
                 estimation={"zeta_by_year": {1980: 7.26, 1990: 7.59,
                                              2000: 8.03}})
    return config, cities


def small_spec(seed=0):
    return GeneratorSpec(seed=seed, n_cities=25)


class TestSolveCommand:
    def test_symmetric_equilibrium_csv(self, tmp_path):
        cfg = tmp_path / "econ.json"
        write_symmetric_config(cfg)
        out = tmp_path / "run"
        code = main(["solve", "--config", str(cfg), "--out", str(out),
                     "--mode", "steady-state"])
        assert code == 0
        table = pd.read_csv(out / "equilibrium.csv")
        assert table["population"].nunique() == 1
        np.testing.assert_allclose(table["unskilled_share"], 0.703, atol=1e-8)
        for name in ("state.json", "trace.csv", "trace.png"):
            assert (out / name).exists()

    def test_refuses_overwrite_without_force(self, tmp_path):
        cfg = tmp_path / "econ.json"
        write_symmetric_config(cfg)
        out = tmp_path / "run"
        assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
        code = main(["solve", "--config", str(cfg), "--out", str(out)])
        assert code == 4
        code = main(["solve", "--config", str(cfg), "--out", str(out),
                     "--force"])
        assert code == 0

    def test_unknown_config_key_is_schema_error(self, tmp_path):
        cfg = tmp_path / "econ.json"
        write_symmetric_config(cfg)
        blob = json.loads(cfg.read_text())
        blob["economy"]["surprise"] = 1
        cfg.write_text(json.dumps(blob))
        code = main(["solve", "--config", str(cfg), "--out",
                     str(tmp_path / "x")])
        assert code == 3

    def test_missing_config_file_is_io_error(self, tmp_path):
        code = main(["solve", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "x")])
        assert code == 4

    def test_nonconvergence_exit_code(self, tmp_path):
        from skillscape import random_economy
        cfg = tmp_path / "econ.json"
        config, cities = random_economy(3, n_cities=4)
        write_config(cfg, config, cities)
        code = main(["solve", "--config", str(cfg), "--out",
                     str(tmp_path / "x"), "--max-iter", "2"])
        assert code == 5


class TestGenerateEstimate:
    def test_generate_then_estimate(self, tmp_path):
        spec_path = tmp_path / "gen.json"
        write_generator_spec(spec_path, small_spec())
        data = tmp_path / "data"
        assert main(["generate", "--config", str(spec_path), "--out",
                     str(data)]) == 0
        est = tmp_path / "est"
        code = main(["estimate", "--panel", str(data / "panel.csv"),
                     "--migration", str(data / "migration.csv"),
                     "--out", str(est)])
        assert code == 0
        table = pd.read_csv(est / "estimates.csv")
        assert list(table.columns) == ["param", "estimate", "se", "pvalue"]
        lam = float(table.loc[table["param"] == "lambda", "estimate"].iloc[0])
        assert lam == pytest.approx(0.703, abs=0.02)
        assert (est / "amenities.png").exists()

    def test_bad_panel_header_is_schema_error(self, tmp_path):
        panel = tmp_path / "panel.csv"
        panel.write_text("msa,year,wrong\nx,1980,1\n")
        mig = tmp_path / "migration.csv"
        mig.write_text("year,origin,dest,count\n1980,x,x,1\n")
        code = main(["estimate", "--panel", str(panel), "--migration",
                     str(mig), "--out", str(tmp_path / "o")])
        assert code == 3


class TestCounterfactualCommand:
    def test_on_solved_state_is_the_degenerate_noop(self, tmp_path):
        # clearing equalizes college shares in full equilibrium, so the
        # solved-state experiment is the all-zeros benchmark
        cfg = tmp_path / "econ.json"
        write_symmetric_config(cfg, C=3)
        run = tmp_path / "run"
        assert main(["solve", "--config", str(cfg), "--out", str(run),
                     "--mode", "steady-state"]) == 0
        out = tmp_path / "cf"
        code = main(["counterfactual", "--config", str(cfg), "--state",
                     str(run / "state.json"), "--out", str(out)])
        assert code == 0
        frame = pd.read_csv(out / "counterfactual.csv")
        assert list(frame.columns) == ["year", "origin", "delta_initial",
                                       "dphi_total", "dphi_agglomeration",
                                       "dphi_signaling"]
        assert sorted(frame["year"].unique()) == [1980, 1990, 2000]
        np.testing.assert_allclose(frame["dphi_total"], 0.0, atol=1e-9)
        assert (out / "counterfactual.png").exists()

    def test_data_driven_experiment(self, tmp_path):
        spec_path = tmp_path / "gen.json"
        write_generator_spec(spec_path, small_spec(seed=2))
        data = tmp_path / "data"
        assert main(["generate", "--config", str(spec_path), "--out",
                     str(data)]) == 0
        out = tmp_path / "cf"
        code = main(["counterfactual", "--panel", str(data / "panel.csv"),
                     "--migration", str(data / "migration.csv"),
                     "--out", str(out)])
        assert code == 0
        frame = pd.read_csv(out / "counterfactual.csv")
        np.testing.assert_allclose(
            frame["dphi_total"],
            frame["dphi_agglomeration"] + frame["dphi_signaling"], atol=1e-12)
        for _, block in frame.groupby("year"):
            block = block.sort_values("delta_initial")
            # low-fraction origins gain the most
            assert block["dphi_total"].iloc[0] > block["dphi_total"].iloc[-1]
            assert np.ptp(block["dphi_agglomeration"]) <= 1e-9

    def test_panel_without_migration_is_usage_error(self, tmp_path):
        code = main(["counterfactual", "--panel", "p.csv", "--out",
                     str(tmp_path / "o")])
        assert code == 3


class TestVerifyCommand:
    def test_pass_table_and_exit_zero(self, tmp_path, capsys):
        spec_path = tmp_path / "gen.json"
        write_generator_spec(spec_path, small_spec(seed=7))
        code = main(["verify", "--config", str(spec_path), "--seed", "7",
                     "--out", str(tmp_path / "v")])
        out = capsys.readouterr().out
        assert code == 0
        assert "verification passed" in out
        assert out.count("pass") >= 5
        report = pd.read_csv(tmp_path / "v" / "verify_report.csv")
        assert bool(report["ok"].all())

    def test_seeded_reruns_are_byte_identical(self, tmp_path):
        spec_path = tmp_path / "gen.json"
        write_generator_spec(spec_path, small_spec())
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["verify", "--config", str(spec_path), "--seed", "3",
                         "--out", str(out)]) == 0
            outs.append(out)
        files = sorted(p.name for p in outs[0].iterdir() if p.name != "run.log")
        assert files
        for name in files:
            assert (outs[0] / name).read_bytes() == \
                (outs[1] / name).read_bytes(), name
