import json

import numpy as np
import pandas as pd
import pytest

from housemove import storage
from housemove.conditioned import WeightedEnsemble
from housemove.corridor import TimeGrid
from housemove.reweighting import DensityEstimate


def _ensemble():
    grid = TimeGrid(0.0, 1.0, 2)
    values = np.array([[0.0, 0.5, 0.0], [0.0, 0.25, 0.0]])
    return WeightedEnsemble(grid, values, np.array([0.0, np.log(3.0)]), path_ids=np.array([10, 11]))


def test_paths_and_weights_carry_metadata_header(tmp_path):
    ens = _ensemble()
    paths = storage.write_paths(ens, tmp_path, config_hash="abc", seed=7)
    weights = storage.write_weights(ens, tmp_path, config_hash="abc", seed=7)

    assert storage.read_header(paths) == {"config_hash": "abc", "seed": "7"}
    frame = storage.read_csv(paths)
    assert list(frame.columns) == ["path_id", "t", "value", "log_weight"]
    assert len(frame) == 6
    assert frame.loc[frame.path_id == 11, "value"].tolist() == [0.0, 0.25, 0.0]

    w = storage.read_csv(weights)
    assert np.allclose(w["weight"], [0.25, 0.75])
    assert float(storage.read_header(weights)["ess"]) == pytest.approx(1.6)


def test_diagnostics_are_key_value_lines(tmp_path):
    path = storage.write_diagnostics(
        {"paths": 10, "ks": {"0.5": [0.1, 0.2]}, "ess": np.float64(3.5)}, tmp_path / "diagnostics.txt", config_hash="h", seed=1
    )
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash=h seed=1"
    assert "paths: 10" in lines
    assert "ess: 3.5" in lines
    assert json.loads(lines[2].split(": ", 1)[1]) == {"0.5": [0.1, 0.2]}


def test_density_sidecar(tmp_path):
    est = DensityEstimate("h", np.array([0.2, 0.5, 0.8]), np.array([1.0, 2.0, 1.0]), np.zeros(3), 0.9, 0.01, {"paths": 5})
    csv = storage.write_density(est, tmp_path, "h", config_hash="h1", seed=2, meta={"t": 0.5})
    side = json.loads(csv.with_suffix(".json").read_text())
    assert side["mass"] == 0.9 and side["t"] == 0.5 and side["paths"] == 5
    assert storage.read_csv(csv)["value"].tolist() == [1.0, 2.0, 1.0]


def test_table_parts_append_and_first_part_wins(tmp_path):
    rows = [{"name": "C", "t": 0.5, "y": np.nan, "value": 1.0, "std_err": 0.1}]
    first = storage.write_table_part(rows, config_hash="x", root=tmp_path)
    second = storage.write_table_part(
        [dict(rows[0], value=2.0), {"name": "q_up", "t": 0.5, "y": 0.3, "value": 0.7, "std_err": 0.0}],
        config_hash="x",
        root=tmp_path,
    )
    assert first.parent == second.parent == tmp_path / "config=x"
    assert first.stem == "part-000" and second.stem == "part-001"

    df = storage.load_tables("x", root=tmp_path)
    assert len(df) == 2
    assert df.loc[df.name == "C", "value"].item() == 1.0


def test_load_tables_missing_partition_is_empty(tmp_path):
    df = storage.load_tables("nothing", root=tmp_path)
    assert df.empty
    assert list(df.columns) == storage.TABLE_COLUMNS


def test_report_rows(tmp_path):
    path = storage.write_report([{"test": "a", "verdict": "pass"}, {"test": "b", "verdict": "fail"}], tmp_path, config_hash="r", seed=3)
    frame = pd.read_csv(path, comment="#")
    assert frame["verdict"].tolist() == ["pass", "fail"]
