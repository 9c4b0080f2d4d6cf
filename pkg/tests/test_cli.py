"""Tests for config parsing, CLI exit codes, and report determinism."""

import json
from importlib import resources

import pytest

from skewfiber.cli import ConfigError, main, parse_config

BUNDLED = resources.files("skewfiber") / "data" / "cantor_demo.json"
BUNDLED_COUPLED = resources.files("skewfiber") / "data" / "coupled_demo.json"


def small_config(**overrides):
    cfg = {
        "system": {
            "matrix": [[1, 1], [1, 1]],
            "theta": 0.5,
            "weights": {"kind": "bernoulli", "p": [0.5, 0.5]},
            "fiber_maps": [
                {"slope": 1 / 3, "offset": 0.0},
                {"slope": 1 / 3, "offset": 2 / 3},
            ],
            "offset_depth": 1,
        },
        "depth": 3,
        "grid": 256,
        "tol": 1e-5,
        "seed": 1,
        "stability": {
            "kind": "fiber_shift",
            "fiber_direction": [0.0, -1.0],
            "deltas": [0.1, 0.01],
            "delta_max": 0.2,
            "grid": 2048,
        },
        "correlations": {"nmax": 6, "gordin_nmax": 4},
        "clt": {"length": 200, "trials": 150, "truncation": 10},
    }
    cfg.update(overrides)
    return cfg


@pytest.fixture
def config_path(tmp_path):
    def write(cfg):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
        return str(path)

    return write


class TestParseConfig:
    def test_bundled_demos_are_valid(self):
        for bundle in (BUNDLED, BUNDLED_COUPLED):
            config = parse_config(str(bundle))
            assert config.system.n_symbols == 2
            assert config.digest

    def test_weights_must_sum_to_one(self, config_path):
        cfg = small_config()
        cfg["system"]["weights"]["p"] = [0.6, 0.6]
        with pytest.raises(ConfigError, match="sum to 1"):
            parse_config(config_path(cfg))

    def test_unknown_key_named(self, config_path):
        cfg = small_config()
        cfg["alpha"] = 0.5
        with pytest.raises(ConfigError, match="alpha"):
            parse_config(config_path(cfg))

    def test_unknown_nested_key_has_pointer(self, config_path):
        cfg = small_config()
        cfg["system"]["spam"] = 1
        with pytest.raises(ConfigError, match="/system/spam"):
            parse_config(config_path(cfg))

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="does not exist"):
            parse_config("/nonexistent/config.json")

    def test_expanding_map_rejected_at_parse(self, config_path):
        cfg = small_config()
        cfg["system"]["fiber_maps"][0]["slope"] = 1.2
        with pytest.raises(ConfigError, match="slope"):
            parse_config(config_path(cfg))

    def test_bad_observable_word(self, config_path):
        cfg = small_config()
        cfg["correlations"]["psi"] = {"type": "base_only", "depth": 1, "values": {"x": 1.0}}
        with pytest.raises(ConfigError, match="word"):
            parse_config(config_path(cfg))

    def test_seed_override(self, config_path, tmp_path):
        path = config_path(small_config())
        config = parse_config(path)
        assert config.seed == 1


class TestExitCodes:
    def test_verify_passes(self, config_path, tmp_path):
        code = main(["verify", "--config", config_path(small_config()), "--out", str(tmp_path / "v")])
        assert code == 0

    def test_config_error_is_usage_error(self, config_path, tmp_path):
        cfg = small_config()
        cfg["system"]["weights"]["p"] = [0.6, 0.6]
        code = main(["verify", "--config", config_path(cfg), "--out", str(tmp_path / "v")])
        assert code == 2

    def test_stability_zero_delta_rejected(self, config_path, tmp_path):
        cfg = small_config()
        cfg["stability"]["deltas"] = [0.0]
        code = main(["stability", "--config", config_path(cfg), "--out", str(tmp_path / "s")])
        assert code == 2

    def test_clt_insufficient_trials_rejected(self, config_path, tmp_path):
        cfg = small_config()
        cfg["clt"]["trials"] = 10
        code = main(["clt", "--config", config_path(cfg), "--out", str(tmp_path / "c")])
        assert code == 2


class TestArtifacts:
    def test_stability_csv_columns(self, config_path, tmp_path):
        out = tmp_path / "s"
        code = main(["stability", "--config", config_path(small_config()), "--out", str(out)])
        assert code == 0
        header = (out / "stability.csv").read_text().splitlines()[0]
        assert header == "delta,R_delta,Delta,ratio,err_bound,iterations"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["passed"] is True
        assert "stability.csv" in summary["artifacts"]

    def test_fixed_point_writes_disintegration(self, config_path, tmp_path):
        out = tmp_path / "f"
        code = main(["fixed-point", "--config", config_path(small_config()), "--out", str(out)])
        assert code == 0
        data = json.loads((out / "disintegration.json").read_text())
        assert set(data) == {"depth", "matrix", "words", "atoms", "weights", "errorBound"}

    def test_clt_summary_schema(self, config_path, tmp_path):
        out = tmp_path / "c"
        main(["clt", "--config", config_path(small_config()), "--out", str(out)])
        data = json.loads((out / "clt.json").read_text())
        assert set(data) == {"sigma2", "tailBound", "ks", "pass", "seed"}

    def test_verify_reports_are_byte_identical(self, config_path, tmp_path):
        path = config_path(small_config())
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["verify", "--config", path, "--out", str(out_a)]) == 0
        assert main(["verify", "--config", path, "--out", str(out_b)]) == 0
        for name in ("summary.json", "verify.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_threaded_stability_identical(self, config_path, tmp_path):
        path = config_path(small_config())
        out_a, out_b = tmp_path / "t1", tmp_path / "t2"
        assert main(["stability", "--config", path, "--out", str(out_a), "--threads", "1"]) == 0
        assert main(["stability", "--config", path, "--out", str(out_b), "--threads", "3"]) == 0
        assert (out_a / "stability.csv").read_bytes() == (out_b / "stability.csv").read_bytes()
