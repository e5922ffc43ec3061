"""Tests for configuration handling and the command-line interface."""

import json
import math

import numpy as np
import pytest

from rotcap import cli, config, diagio
from rotcap.errors import ConfigError


class TestConfigDefaults:
    def test_defaults_validate(self):
        cfg = config.default_config()
        assert config.validate(cfg) is cfg

    def test_default_config_is_a_copy(self):
        a = config.default_config()
        a["grid"]["nx"] = 8
        b = config.default_config()
        assert b["grid"]["nx"] == 64

    def test_eps_values(self):
        cfg = config.default_config()
        assert config.eps_values(cfg) == [0.2, 0.1, 0.05]
        cfg["physics"]["eps"] = 0.3
        assert config.eps_values(cfg) == [0.3]


class TestConfigLayering:
    def test_file_over_defaults(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[scheme]\ndt = 0.002\n\n[physics]\nnu = 0.25\n")
        cfg = config.load_config(path)
        assert cfg["scheme"]["dt"] == 0.002
        assert cfg["physics"]["nu"] == 0.25
        assert cfg["scheme"]["theta"] == 0.55  # untouched default

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            config.load_config(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[scheme\ndt = ")
        with pytest.raises(ConfigError):
            config.load_config(path)

    def test_unknown_key_names_location(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[scheme]\ndtt = 0.002\n")
        with pytest.raises(ConfigError) as exc:
            config.load_config(path)
        assert exc.value.location == "scheme.dtt"

    def test_scalar_where_table_expected(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("scheme = 3\n")
        with pytest.raises(ConfigError):
            config.load_config(path)


class TestOverrides:
    def test_typed_values(self):
        cfg = config.default_config()
        config.apply_overrides(cfg, [
            "scheme.dt=0.005",
            "physics.eps=[0.4, 0.2]",
            "grid.nx=32",
            "physics.rotation=constant",
        ])
        assert cfg["scheme"]["dt"] == 0.005
        assert cfg["physics"]["eps"] == [0.4, 0.2]
        assert cfg["grid"]["nx"] == 32
        assert cfg["physics"]["rotation"] == "constant"

    def test_quoted_string(self):
        cfg = config.default_config()
        config.apply_overrides(cfg, ['experiment.datum="rest"'])
        assert cfg["experiment"]["datum"] == "rest"

    def test_malformed_override(self):
        with pytest.raises(ConfigError):
            config.apply_overrides(config.default_config(), ["scheme.dt"])
        with pytest.raises(ConfigError):
            config.apply_overrides(config.default_config(), ["=3"])

    def test_unknown_override_key(self):
        with pytest.raises(ConfigError) as exc:
            config.apply_overrides(config.default_config(), ["physics.epss=0.1"])
        assert exc.value.location == "physics.epss"


class TestValidationMatrix:
    def check_rejected(self, mutate, location):
        cfg = config.default_config()
        mutate(cfg)
        with pytest.raises(ConfigError) as exc:
            config.validate(cfg)
        assert exc.value.location == location

    def test_eps_ordering(self):
        self.check_rejected(lambda c: c["physics"].__setitem__("eps", [0.1, 0.2]),
                            "physics.eps")
        self.check_rejected(lambda c: c["physics"].__setitem__("eps", [0.1, 0.1]),
                            "physics.eps")

    def test_eps_range(self):
        self.check_rejected(lambda c: c["physics"].__setitem__("eps", [1.5]),
                            "physics.eps")
        self.check_rejected(lambda c: c["physics"].__setitem__("eps", 0.0),
                            "physics.eps")
        self.check_rejected(lambda c: c["physics"].__setitem__("eps", []),
                            "physics.eps")
        cfg = config.default_config()
        cfg["physics"]["eps"] = 1.0
        config.validate(cfg)

    def test_gamma_interval(self):
        self.check_rejected(lambda c: c["physics"].__setitem__("gamma", 1.0),
                            "physics.gamma")
        self.check_rejected(lambda c: c["physics"].__setitem__("gamma", 2.5),
                            "physics.gamma")
        cfg = config.default_config()
        cfg["physics"]["gamma"] = 2.0
        config.validate(cfg)

    def test_choice_fields(self):
        self.check_rejected(lambda c: c["physics"].__setitem__("rotation", "wobbly"),
                            "physics.rotation")
        self.check_rejected(lambda c: c["qg"].__setitem__("axis", "tilted"),
                            "qg.axis")
        self.check_rejected(lambda c: c["scheme"].__setitem__("integrator", "euler"),
                            "scheme.integrator")

    def test_constant_rotation_must_not_vanish(self):
        def mutate(c):
            c["physics"]["rotation"] = "constant"
            c["physics"]["rotation_value"] = 0
        self.check_rejected(mutate, "physics.rotation_value")

    def test_grid_numbers(self):
        self.check_rejected(lambda c: c["grid"].__setitem__("nx", 0), "grid.nx")
        self.check_rejected(lambda c: c["grid"].__setitem__("ny", 2.5), "grid.ny")
        self.check_rejected(lambda c: c["grid"].__setitem__("dealias", 0.0),
                            "grid.dealias")
        self.check_rejected(lambda c: c["grid"].__setitem__("dealias", 1.5),
                            "grid.dealias")

    def test_scheme_numbers(self):
        self.check_rejected(lambda c: c["scheme"].__setitem__("dt", 0.0), "scheme.dt")
        self.check_rejected(lambda c: c["scheme"].__setitem__("theta", 1.5),
                            "scheme.theta")
        self.check_rejected(lambda c: c["scheme"].__setitem__("dt", True), "scheme.dt")

    def test_experiment_fields(self):
        self.check_rejected(lambda c: c["experiment"].__setitem__("mode", [1]),
                            "experiment.mode")
        self.check_rejected(lambda c: c["experiment"].__setitem__("mode", [1, "a"]),
                            "experiment.mode")
        self.check_rejected(lambda c: c["experiment"].__setitem__("sample_every", 0),
                            "experiment.sample_every")
        self.check_rejected(lambda c: c["experiment"].__setitem__("output_dir", 3),
                            "experiment.output_dir")

    def test_seed(self):
        self.check_rejected(lambda c: c.__setitem__("seed", -1), "seed")


def write_toml(path, text):
    path.write_text(text)
    return str(path)


QG_SINGLE_MODE = """
[grid]
nx = 32
ny = 32
nz = 1

[physics]
eps = 0.1
nu = 0.1
rotation = "constant"
rotation_value = 1.0

[scheme]
dt = 0.01
t_final = 0.2

[experiment]
datum = "single_mode"
mode = [1, 0]
amplitude = 0.01
"""


class TestCli:
    def test_missing_config_exits_three(self, tmp_path, capsys):
        code = cli.main(["simulate-qg", "--config", str(tmp_path / "none.toml")])
        assert code == 3
        assert "configuration error" in capsys.readouterr().err

    def test_bad_override_exits_three(self, tmp_path, capsys):
        path = write_toml(tmp_path / "run.toml", QG_SINGLE_MODE)
        code = cli.main(["simulate-qg", "--config", path, "--set", "physics.nuu=1"])
        assert code == 3
        assert "physics.nuu" in capsys.readouterr().err

    def test_simulate_qg_single_mode(self, tmp_path, capsys):
        path = write_toml(tmp_path / "run.toml", QG_SINGLE_MODE)
        out = tmp_path / "qg"
        code = cli.main(["simulate-qg", "--config", path, "--axis", "constant",
                         "--out", str(out)])
        captured = capsys.readouterr()
        assert code == 0
        assert "closed-form mode decay mismatch" in captured.out
        series = diagio.read_series(out / "series.csv")
        assert series["t"].size == 21
        assert np.all(np.diff(series["energy"]) < 0.0)
        fields, meta = diagio.read_snapshot(out / "final_r.snap")
        assert fields["r"].shape == (32, 32)
        assert meta["axis"] == "constant"

    def test_lp_analyze(self, tmp_path, capsys):
        out = tmp_path / "lp"
        code = cli.main(["lp-analyze", "--out", str(out)])
        captured = capsys.readouterr()
        assert code == 0
        assert "worst defect" in captured.out
        assert (out / "lp_report.csv").exists()

    def test_verify_commutator(self, tmp_path, capsys):
        out = tmp_path / "comm"
        code = cli.main(["verify-commutator", "--out", str(out), "--seed", "1234"])
        captured = capsys.readouterr()
        assert code == 0
        assert "slope" in captured.out
        rates = (out / "commutator_rates.csv").read_text()
        assert "lipschitz" in rates and "zygmund" in rates

    def test_reconstruct_datum(self, tmp_path, capsys):
        path = write_toml(tmp_path / "run.toml", """
[grid]
nx = 32
ny = 32
nz = 8
""")
        out = tmp_path / "datum"
        code = cli.main(["reconstruct-datum", "--config", path, "--out", str(out)])
        captured = capsys.readouterr()
        assert code == 0
        report = json.loads(captured.out)
        assert report["axis"] == "variable"
        assert report["l2"] > 0.0
        assert (out / "datum.snap").exists()


class TestDiagnose:
    def make_run(self, tmp_path):
        run = tmp_path / "run"
        member = run / "member_eps0.1"
        member.mkdir(parents=True)
        t = np.linspace(0.0, 1.0, 11)
        cols = ("t", "e_total", "diss_work", "bd_value", "bd_rate")
        for i, ti in enumerate(t):
            diagio.append_series(member / "series.csv", cols, {
                "t": ti,
                "e_total": 1.0 - 0.25 * ti,
                "diss_work": 0.25,
                "bd_value": 2.0 * (1.0 + ti),
                "bd_rate": 0.0,
            })
        man = diagio.RunManifest(config={}, code_version="0.1.0", seed=1)
        man.add_output(run, "member_eps0.1/series.csv")
        man.write(run / "manifest.json")
        return run

    def test_clean_run_passes(self, tmp_path, capsys):
        run = self.make_run(tmp_path)
        code = cli.main(["diagnose", "--run-dir", str(run)])
        captured = capsys.readouterr()
        assert code == 0
        assert "ledger ok" in captured.out

    def test_corrupted_output_fails(self, tmp_path, capsys):
        run = self.make_run(tmp_path)
        target = run / "member_eps0.1" / "series.csv"
        target.write_bytes(target.read_bytes().replace(b"0.25", b"0.26", 1))
        code = cli.main(["diagnose", "--run-dir", str(run)])
        captured = capsys.readouterr()
        assert code == 2
        assert "hash mismatch" in captured.out

    def test_missing_manifest_fails(self, tmp_path, capsys):
        code = cli.main(["diagnose", "--run-dir", str(tmp_path)])
        assert code == 2
        assert "no manifest" in capsys.readouterr().out
