import json

import pytest

from riskalloc import io
from riskalloc.cli import ExperimentConfig, main, parse_config
from riskalloc.errors import ConfigError
from riskalloc.hazard import default_hazards
from riskalloc.profile import OccurrenceCounts

SMALL = ["--bins", "20", "--cycles", "8", "--samples-per-cycle", "2000"]


@pytest.fixture
def profile_csv(tmp_path):
    path = tmp_path / "p.csv"
    io.write_profile_csv(path, OccurrenceCounts([5, 3, 2]))
    return path


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config()
        assert cfg == ExperimentConfig()
        assert cfg.bins == 200 and cfg.ub == 1e-4 and cfg.strategy == "maintain"

    def test_flag_overrides_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"cycles": 12, "seed": 4, "drift": {"ramp_start": 1, "ramp_end": 3}}))
        cfg = parse_config(str(path), {"cycles": 5, "seed": None})
        assert cfg.cycles == 5 and cfg.seed == 4
        assert cfg.drift.ramp_end == 3

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"cycels": 3}')
        with pytest.raises(ConfigError, match="cycels"):
            parse_config(str(path))

    @pytest.mark.parametrize("field, value", [("cycles", -1), ("ub", 0.0), ("budget", -3), ("bins", 0),
                                              ("strategy", "lazy"), ("cycles", 2.5)])
    def test_invalid_field_named(self, field, value):
        with pytest.raises(ConfigError) as info:
            parse_config(overrides={field: value})
        assert info.value.field == field


class TestSubcommands:
    def test_risk(self, profile_csv, capsys):
        assert main(["risk", "--profile", str(profile_csv), "--ub", "1e-4"]) == 0
        out = capsys.readouterr().out
        assert "risk_per_demand=" in out and "within_bound=true" in out

    def test_allocate_min_tests(self, profile_csv, tmp_path, capsys):
        out = tmp_path / "a.csv"
        assert main(["allocate", "min-tests", "--profile", str(profile_csv), "--ub", "1e-9", "--out", str(out)]) == 0
        alloc = io.read_allocation_csv(out, default_hazards(), 3)
        assert alloc.total > 0
        assert f"tests_total={alloc.total}" in capsys.readouterr().out

    def test_naive_uses_at_least_as_many(self, profile_csv, tmp_path):
        totals = {}
        for rounding in ("greedy", "naive"):
            out = tmp_path / f"{rounding}.csv"
            main(["allocate", "min-tests", "--profile", str(profile_csv), "--ub", "1e-9",
                  "--rounding", rounding, "--out", str(out)])
            totals[rounding] = io.read_allocation_csv(out, default_hazards(), 3).total
        assert totals["greedy"] <= totals["naive"]

    def test_allocate_min_risk(self, profile_csv, tmp_path):
        out = tmp_path / "a.csv"
        assert main(["allocate", "min-risk", "--profile", str(profile_csv), "--tests", "100", "--out", str(out)]) == 0
        assert io.read_allocation_csv(out, default_hazards(), 3).total == 100

    def test_allocate_delta(self, profile_csv, tmp_path):
        new = tmp_path / "new.csv"
        io.write_profile_csv(new, OccurrenceCounts([1, 3, 6]))
        base = tmp_path / "base.csv"
        main(["allocate", "min-tests", "--profile", str(profile_csv), "--ub", "1e-9", "--out", str(base)])
        for mode, extra in (("delta-min-tests", ["--ub", "1e-9"]), ("delta-min-risk", ["--budget", "50"])):
            out = tmp_path / f"{mode}.csv"
            code = main(["allocate", mode, "--profile", str(new), "--old-profile", str(profile_csv),
                         "--existing", str(base), "--out", str(out), *extra])
            assert code == 0
        assert io.read_allocation_csv(tmp_path / "delta-min-risk.csv", default_hazards(), 3).total == 50

    def test_loop_writes_records(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        assert main(["loop", *SMALL, "--out", str(out)]) == 0
        assert len(io.read_records_csv(out)) == 8
        assert "cycles=8" in capsys.readouterr().out

    def test_loop_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            main(["loop", *SMALL, "--strategy", "combined", "--ub", "1e-6", "--budget", "20",
                  "--seed", "3", "--out", str(path)])
        assert a.read_bytes() == b.read_bytes()

    def test_drift_gen_then_replay(self, tmp_path):
        gen = tmp_path / "gen"
        assert main(["drift-gen", "--out-dir", str(gen), "--bins", "20", "--cycles", "5",
                     "--samples-per-cycle", "100"]) == 0
        assert len(list((gen / "updates").glob("*.csv"))) == 5
        out = tmp_path / "r.csv"
        assert main(["loop", "--bins", "20", "--updates-dir", str(gen / "updates"), "--out", str(out)]) == 0
        assert len(io.read_records_csv(out)) == 5

    def test_cluster(self, tmp_path, capsys):
        cents, prof = tmp_path / "c.csv", tmp_path / "p.csv"
        assert main(["cluster", "--synthetic", "500", "--k", "7", "--centroids", str(cents),
                     "--profile-out", str(prof)]) == 0
        assert io.read_features_csv(cents).shape == (7, 2)
        assert io.read_profile_csv(prof).total == 500


class TestExitCodes:
    def test_negative_cycles(self, capsys):
        assert main(["loop", "--cycles", "-5"]) == 2
        assert "cycles" in capsys.readouterr().err

    def test_missing_profile_file(self, tmp_path, capsys):
        assert main(["risk", "--profile", str(tmp_path / "none.csv")]) == 3
        assert "error[io]" in capsys.readouterr().err

    def test_empty_profile(self, tmp_path):
        path = tmp_path / "p.csv"
        io.write_profile_csv(path, OccurrenceCounts([0, 0]))
        assert main(["risk", "--profile", str(path)]) == 2

    def test_bad_config_file(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text('{"budgett": 1}')
        assert main(["loop", "--config", str(path)]) == 2
        assert "budgett" in capsys.readouterr().err
