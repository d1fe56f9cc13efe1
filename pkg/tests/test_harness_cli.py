import csv
import json
import math

import numpy as np
import pytest

from levyquant import cli
from levyquant.harness import (SEED_ENV, ConfigError, ExperimentConfig, build_schedule, default_seed,
                               resolve_seed, run_codec_check, run_comparison, run_convergence)
from levyquant.sampling import load_stream

GAUSS = {"kind": "gaussian", "sigma": 1.0}
CAUCHY = {"kind": "stable", "alpha": 1.0}
POISSON = {"kind": "poisson", "rate": 1.0, "amplitude": {"kind": "uniform", "low": 0.0, "high": 1.0}}


def config(**kw) -> ExperimentConfig:
    base = {"models": [GAUSS], "schedule": {"pairs": [[1, 64], [4, 128]]}, "sample_count": 20_000,
            "seed": 7, "shard_size": 6_000}
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_roundtrip(self, tmp_path):
        cfg = config(name="x")
        p = tmp_path / "c.json"
        p.write_text(json.dumps(cfg.to_dict()))
        loaded = ExperimentConfig.load(p)
        assert loaded == cfg and loaded.config_hash() == cfg.config_hash()

    def test_single_model_key(self):
        cfg = ExperimentConfig.from_dict({"model": GAUSS, "schedule": {"pairs": [[1, 8]]},
                                          "sample_count": 10})
        assert cfg.models == (GAUSS,)

    @pytest.mark.parametrize("bad", [{"sample_count": 0}, {"undersampling": "ignore"},
                                     {"correction": "jackknife"}, {"bogus": 1}, {"models": []}])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            config(**bad)

    def test_hash_changes(self):
        assert config().config_hash() != config(seed=8).config_hash()


class TestSchedule:
    def test_pairs(self):
        assert build_schedule(config()).pairs == ((1, 64.0), (4, 128.0))

    def test_auto(self):
        cfg = config(models=[CAUCHY], schedule={"generator": "auto", "n": [1, 2, 4]})
        assert build_schedule(cfg).ms == [1, 4, 16]

    def test_auto_joint_max(self):
        cfg = config(models=[POISSON, CAUCHY], schedule={"generator": "auto", "n": [1, 4, 16]})
        assert build_schedule(cfg).ms == [1, 8, 64]

    def test_power2(self):
        cfg = config(models=[POISSON], schedule={"generator": "power2", "n": [2, 4]})
        assert build_schedule(cfg).ms == [4, 16]

    def test_inadmissible(self):
        cfg = config(models=[CAUCHY], schedule={"pairs": [[1024, 8]]})
        with pytest.raises(ConfigError):
            build_schedule(cfg)
        assert build_schedule(config(models=[CAUCHY], schedule={"pairs": [[1024, 8]]},
                                     allow_inadmissible=True)).ms == [8]

    def test_unknown(self):
        with pytest.raises(ConfigError):
            build_schedule(config(schedule={"generator": "fibonacci"}))


class TestSeed:
    def test_precedence(self):
        cfg = config(seed=None)
        assert resolve_seed(3, cfg, {SEED_ENV: "9"}) == 3
        assert resolve_seed(None, config(seed=5), {SEED_ENV: "9"}) == 5
        assert resolve_seed(None, cfg, {SEED_ENV: "9"}) == 9
        assert resolve_seed(None, cfg, {}) == 0

    def test_env(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV, "42")
        assert default_seed() == 42


class TestConvergence:
    def test_gaussian_point(self, tmp_path):
        cfg = config(schedule={"pairs": [[1, 1024]]}, sample_count=1_000_000, shard_size=1 << 18,
                     assertions=[{"kind": "residual_abs_max", "value": 0.02}])
        res = run_convergence(cfg, output_dir=tmp_path)
        assert res.passed and abs(res.items[0].residual) < 0.02

    def test_rows_traceable(self, tmp_path):
        run_convergence(config(), output_dir=tmp_path)
        rows = read_rows(tmp_path / "run_converge.csv")
        assert len(rows) == 2
        for r in rows:
            assert {"model_hash", "m", "n", "seed", "sample_count"} <= set(r)
            assert r["seed"] == "7" and r["sample_count"] == "20000"
        manifest = json.loads((tmp_path / "run_converge_manifest.json").read_text())
        assert manifest["config_hash"] == config().config_hash()
        assert [p["n"] for p in manifest["points"]] == [1, 4]
        assert (tmp_path / "run_converge.csv").read_bytes().count(b"\r\n") == 3
        long = read_rows(tmp_path / "run_converge_long.csv")
        assert {"quantity", "value", "model_hash"} <= set(long[0])

    def test_deterministic(self, tmp_path):
        run_convergence(config(), output_dir=tmp_path / "a")
        run_convergence(config(), output_dir=tmp_path / "b")
        run_convergence(config(), workers=3, output_dir=tmp_path / "c")
        a = (tmp_path / "a" / "run_converge.csv").read_bytes()
        assert a == (tmp_path / "b" / "run_converge.csv").read_bytes()
        assert a == (tmp_path / "c" / "run_converge.csv").read_bytes()
        assert (tmp_path / "a" / "run_converge_long.csv").read_bytes() == \
            (tmp_path / "c" / "run_converge_long.csv").read_bytes()

    def test_seed_changes_output(self, tmp_path):
        a = run_convergence(config(), output_dir=tmp_path / "a")
        b = run_convergence(config(), seed=8, output_dir=tmp_path / "b")
        assert a.rows[0]["H_emp"] != b.rows[0]["H_emp"]

    def test_degenerate(self, tmp_path):
        res = run_convergence(config(models=[{"kind": "degenerate"}], schedule={"pairs": [[1, 4], [8, 64]]}),
                              output_dir=tmp_path)
        assert all(r["H_emp"] == 0.0 and r["residual"] == 0.0 and r["zeta"] == 0.0 for r in res.rows)

    def test_undersampling_policy(self, tmp_path):
        kw = dict(models=[CAUCHY], schedule={"pairs": [[1, 65536]]}, sample_count=500)
        res = run_convergence(config(**kw), output_dir=tmp_path)
        assert res.manifest["points"][0]["warnings"]
        with pytest.raises(RuntimeError):
            run_convergence(config(undersampling="error", **kw), output_dir=tmp_path)

    def test_failed_assertion(self, tmp_path):
        cfg = config(assertions=[{"kind": "residual_abs_max", "value": 1e-9},
                                 {"kind": "residual_abs_max", "value": 1e-9, "required": False}])
        res = run_convergence(cfg, output_dir=tmp_path)
        assert not res.passed and not res.manifest["passed"]

    def test_optional_failure_still_passes(self, tmp_path):
        cfg = config(assertions=[{"kind": "residual_abs_max", "value": 1e-9, "required": False}])
        assert run_convergence(cfg, output_dir=tmp_path).passed

    def test_unknown_assertion(self, tmp_path):
        with pytest.raises(ConfigError):
            run_convergence(config(assertions=[{"kind": "vibes"}]), output_dir=tmp_path)


class TestComparison:
    def test_identical(self, tmp_path):
        cfg = config(models=[CAUCHY, CAUCHY], schedule={"pairs": [[1, 8], [2, 16]]},
                     assertions=[{"kind": "ratios_equal", "value": 1.0}])
        res = run_comparison(cfg, output_dir=tmp_path)
        assert res.passed and all(r["ratio"] == 1.0 for r in res.rows)

    def test_needs_two(self, tmp_path):
        with pytest.raises(ConfigError):
            run_comparison(config(), output_dir=tmp_path)

    def test_deterministic_across_workers(self, tmp_path):
        cfg = config(models=[POISSON, CAUCHY], schedule={"generator": "power2", "n": [2, 4]},
                     estimator="plain")
        run_comparison(cfg, output_dir=tmp_path / "a")
        run_comparison(cfg, workers=2, output_dir=tmp_path / "b")
        assert (tmp_path / "a" / "run_compare.csv").read_bytes() == \
            (tmp_path / "b" / "run_compare.csv").read_bytes()


class TestCodecCheck:
    def test_gaussian(self, tmp_path):
        cfg = config(schedule={"pairs": [[1, 64]]}, sample_count=100_000, write_containers=True,
                     assertions=[{"kind": "rate_within"}, {"kind": "roundtrip"}])
        res = run_codec_check(cfg, output_dir=tmp_path)
        assert res.passed
        assert (tmp_path / "run_n1_m64.lvq").exists()

    def test_deterministic_model(self, tmp_path):
        cfg = config(models=[{"kind": "degenerate"}], schedule={"pairs": [[1, 16]]}, sample_count=50_000)
        res = run_codec_check(cfg, output_dir=tmp_path)
        assert res.rows[0]["rate_nats"] < 1e-2 and res.rows[0]["roundtrip"]


def write_config(tmp_path, **kw):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(config(**kw).to_dict()))
    return str(p)


class TestCLI:
    def test_converge_pass(self, tmp_path, capsys):
        path = write_config(tmp_path, assertions=[{"kind": "residual_abs_max", "value": 0.5}])
        assert cli.main(["converge", path, "--out", str(tmp_path / "o")]) == 0
        assert "PASS residual_abs_max" in capsys.readouterr().out

    def test_converge_fail(self, tmp_path, capsys):
        path = write_config(tmp_path, assertions=[{"kind": "residual_abs_max", "value": 1e-9}])
        assert cli.main(["converge", path, "--out", str(tmp_path / "o")]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_bad_config(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"models": [CAUCHY], "schedule": {"pairs": [[1024, 2]]}, "sample_count": 5}))
        assert cli.main(["converge", str(p), "--out", str(tmp_path)]) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert cli.main(["codec", str(tmp_path / "none.json")]) == 2

    def test_seed_flag_and_env(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, seed=None)
        monkeypatch.setenv(SEED_ENV, "31")
        cli.main(["converge", path, "--out", str(tmp_path / "env")])
        cli.main(["converge", path, "--seed", "31", "--out", str(tmp_path / "flag")])
        env = (tmp_path / "env" / "run_converge.csv").read_bytes()
        assert env == (tmp_path / "flag" / "run_converge.csv").read_bytes()
        assert read_rows(tmp_path / "env" / "run_converge.csv")[0]["seed"] == "31"

    def test_compare_and_codec(self, tmp_path):
        cmp_path = write_config(tmp_path, models=[GAUSS, GAUSS],
                                assertions=[{"kind": "ratios_equal"}])
        assert cli.main(["compare", cmp_path, "--workers", "2", "--out", str(tmp_path / "c")]) == 0
        codec_path = write_config(tmp_path, assertions=[{"kind": "roundtrip"}])
        assert cli.main(["codec", codec_path, "--out", str(tmp_path / "k")]) == 0

    def test_density_gaussian(self, tmp_path, capsys):
        out = tmp_path / "d.csv"
        assert cli.main(["density", "--model", json.dumps(GAUSS), "--window", "-20", "20",
                         "--points", "4097", "--out", str(out)]) == 0
        rows = read_rows(out)
        peak = max(float(r["p"]) for r in rows)
        assert peak == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-6)

    def test_density_poisson(self, tmp_path):
        out = tmp_path / "p.csv"
        model = tmp_path / "m.json"
        model.write_text(json.dumps(POISSON))
        assert cli.main(["density", "--model", str(model), "--window", "0", "10",
                         "--points", "10001", "--n", "4", "--out", str(out)]) == 0
        x = np.array([float(r["x"]) for r in read_rows(out)])
        assert x.min() == pytest.approx(0.0)

    def test_density_rejects_atomic(self, tmp_path):
        model = {"kind": "poisson", "rate": 1.0, "amplitude": {"kind": "point", "value": 1.0}}
        assert cli.main(["density", "--model", json.dumps(model), "--out", str(tmp_path / "x.csv")]) == 2

    def test_sample(self, tmp_path, monkeypatch):
        monkeypatch.setenv(SEED_ENV, "5")
        out = tmp_path / "s.bin"
        assert cli.main(["sample", "--model", json.dumps(CAUCHY), "--n", "4", "--count", "1000",
                         "--out", str(out)]) == 0
        loaded = load_stream(out)
        values = loaded[0] if isinstance(loaded, tuple) else loaded
        assert len(values) == 1000

    def test_console_script_help(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--help"])
        assert exc.value.code == 0
        assert "converge" in capsys.readouterr().out
