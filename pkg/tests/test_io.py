import os

import numpy as np
import pytest

from riskalloc import io
from riskalloc.drift import DriftSchedule
from riskalloc.errors import FileFormatError
from riskalloc.hazard import HazardScenario, TestAllocation
from riskalloc.profile import OccurrenceCounts
from riskalloc.strategies import CycleRecord

HAZARDS = [HazardScenario("blowout", 1.0 / 3.0, 2.5), HazardScenario("ice", 1e-7, 1.0)]


class TestRoundTrips:
    def test_profile(self, tmp_path):
        c = OccurrenceCounts([0, 5, 2**40, 7])
        io.write_profile_csv(tmp_path / "p.csv", c)
        assert io.read_profile_csv(tmp_path / "p.csv") == c

    def test_hazards(self, tmp_path):
        io.write_hazards_json(tmp_path / "h.json", HAZARDS)
        assert io.read_hazards_json(tmp_path / "h.json") == HAZARDS

    def test_allocation(self, tmp_path):
        a = TestAllocation([[1, 0, 3], [4, 5, 0]])
        io.write_allocation_csv(tmp_path / "a.csv", a, HAZARDS)
        assert io.read_allocation_csv(tmp_path / "a.csv", HAZARDS, 3) == a

    def test_drift(self, tmp_path):
        d = DriftSchedule(3, 9, 0.25, "step")
        io.write_drift_json(tmp_path / "d.json", d)
        assert io.read_drift_json(tmp_path / "d.json") == d

    def test_features(self, tmp_path):
        x = np.random.default_rng(0).normal(size=(20, 3))
        io.write_features_csv(tmp_path / "f.csv", x)
        np.testing.assert_array_equal(io.read_features_csv(tmp_path / "f.csv"), x)

    def test_features_without_header(self, tmp_path):
        (tmp_path / "f.csv").write_text("1,2\n3,4\n")
        np.testing.assert_array_equal(io.read_features_csv(tmp_path / "f.csv"), [[1, 2], [3, 4]])

    def test_records_bit_exact(self, tmp_path):
        recs = [CycleRecord(0, 0.1 + 0.2, 1 / 3, 2 / 3, 0, 10), CycleRecord(1, 1e-17, 5e-324, 1.0, 4, 14)]
        io.emit_records(recs, tmp_path / "r.csv")
        assert io.read_records_csv(tmp_path / "r.csv") == recs


class TestMalformed:
    @pytest.mark.parametrize("text", [
        "bin_id,count\n",
        "bin_id,count\n0,1\n2,1\n",
        "bin_id,count\n0,-1\n",
        "bin_id,count\n0,x\n",
        "bin,count\n0,1\n",
    ])
    def test_profile(self, tmp_path, text):
        (tmp_path / "p.csv").write_text(text)
        with pytest.raises(FileFormatError):
            io.read_profile_csv(tmp_path / "p.csv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileFormatError):
            io.read_profile_csv(tmp_path / "absent.csv")

    @pytest.mark.parametrize("text", ["[]", "{}", "[{\"id\": \"a\"}]", "[{\"id\": \"a\", \"lambda\": 2}]", "nope"])
    def test_hazards(self, tmp_path, text):
        (tmp_path / "h.json").write_text(text)
        with pytest.raises(FileFormatError):
            io.read_hazards_json(tmp_path / "h.json")

    @pytest.mark.parametrize("row", ["x,0,1", "blowout,9,1", "blowout,0,-1"])
    def test_allocation(self, tmp_path, row):
        (tmp_path / "a.csv").write_text(f"hazard_id,bin_id,tests\n{row}\n")
        with pytest.raises(FileFormatError):
            io.read_allocation_csv(tmp_path / "a.csv", HAZARDS, 3)

    def test_drift_unknown_key(self, tmp_path):
        (tmp_path / "d.json").write_text('{"ramp_start": 1, "ramp_end": 2, "speed": 3}')
        with pytest.raises(FileFormatError):
            io.read_drift_json(tmp_path / "d.json")


class TestAtomicWrite:
    def test_failed_replace_keeps_old_file(self, tmp_path, monkeypatch):
        target = tmp_path / "out.csv"
        target.write_text("old\n")

        def broken_replace(src, dst):
            raise OSError("disk full")

        monkeypatch.setattr(os, "replace", broken_replace)
        with pytest.raises(FileFormatError):
            io.atomic_write_text(target, "new\n")
        assert target.read_text() == "old\n"
        assert sorted(p.name for p in tmp_path.iterdir()) == ["out.csv"]

    def test_overwrites(self, tmp_path):
        target = tmp_path / "out.csv"
        io.atomic_write_text(target, "a")
        io.atomic_write_text(target, "b")
        assert target.read_text() == "b"
