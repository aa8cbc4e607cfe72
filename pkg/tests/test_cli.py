import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from click.testing import CliRunner

from edgetrigger.cli import main
from edgetrigger.report import SUMMARY_COLUMNS, parse_summary_table
from edgetrigger.signal import read_frame_dump

DESK = ["--nodes", "20", "--hours", "2", "--seed", "7"]


@pytest.fixture(scope="module")
def weights(tmp_path_factory):
    path = tmp_path_factory.mktemp("ae") / "ae.bin"
    res = CliRunner().invoke(main, ["train-ae", "--out", str(path)])
    assert res.exit_code == 0, res.output
    return path


@pytest.fixture(scope="module")
def desk_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    res = CliRunner().invoke(main, ["run", *DESK, "--detectors", "tsnfa-mean,sod", "--out", str(out), "--node-grid"])
    assert res.exit_code == 0, res.output
    return out, res.output


def test_desk_run_summary(desk_out):
    out, text = desk_out
    rows = parse_summary_table((out / "summary.txt").read_text())
    assert rows["tsnfa-mean"]["DR_percent"] == "100.00" and rows["tsnfa-mean"]["FP"] == "0"
    assert rows["sod"]["FP"] == "0"
    assert "tsnfa-mean" in text
    for name in ("report.json", "triggers.csv", "chart.svg", "nodes.svg"):
        assert (out / name).is_file()


def test_summary_cells_equal_json_fields(desk_out):
    out, _ = desk_out
    doc = json.loads((out / "report.json").read_text())
    rows = parse_summary_table((out / "summary.txt").read_text())
    for det in doc["detectors"]:
        row = rows[det["detector"]]
        for _, key, fmt in SUMMARY_COLUMNS[1:]:
            if det[key] is None:
                assert row[key] == "-"
            else:
                assert float(row[key]) == det[key]


def test_svg_is_valid_with_one_row_per_detector(desk_out):
    out, _ = desk_out
    root = ET.parse(out / "chart.svg").getroot()
    rows = [g for g in root.iter("{http://www.w3.org/2000/svg}g") if g.get("class") == "row"]
    assert [g.get("data-detector") for g in rows] == ["tsnfa-mean", "sod"]
    ET.parse(out / "nodes.svg")


def test_repeat_run_is_byte_identical(desk_out, tmp_path):
    out, _ = desk_out
    res = CliRunner().invoke(main, ["run", *DESK, "--detectors", "sod,tsnfa-mean", "--out", str(tmp_path)])
    assert res.exit_code == 0
    assert (tmp_path / "report.json").read_bytes() == (out / "report.json").read_bytes()
    assert (tmp_path / "triggers.csv").read_bytes() == (out / "triggers.csv").read_bytes()


def test_report_subcommand_rerenders(desk_out, tmp_path):
    out, _ = desk_out
    res = CliRunner().invoke(main, ["report", str(out / "report.json"), "--out", str(tmp_path)])
    assert res.exit_code == 0
    assert (tmp_path / "summary.txt").read_text() == (out / "summary.txt").read_text()


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--hours", "0"],
        ["run", "--nodes", "0"],
        ["run", "--detectors", "cfar"],
        ["run", "--nodes", "200", "--hours", "24"],
        ["run", "--set", "tsnfa.zeta=0.5"],
        ["run", "--workers", "0"],
    ],
)
def test_config_errors_exit_1(args, tmp_path):
    res = CliRunner().invoke(main, [*args, "--out", str(tmp_path)])
    assert res.exit_code == 1
    assert "config error" in res.output


def test_missing_weights_names_the_remedy(tmp_path):
    res = CliRunner().invoke(main, ["run", "--detectors", "tinyml", "--out", str(tmp_path)])
    assert res.exit_code == 2
    assert "train-ae" in res.output


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("EDGETRIGGER_OUT", str(tmp_path / "envout"))
    res = CliRunner().invoke(main, ["run", "--nodes", "1", "--hours", "0.5", "--detectors", "sod"])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "envout" / "report.json").is_file()


def test_train_ae_is_deterministic(weights, tmp_path):
    again = tmp_path / "again.bin"
    res = CliRunner().invoke(main, ["train-ae", "--out", str(again)])
    assert res.exit_code == 0
    assert "theta_ml" in res.output and "final training loss" in res.output
    assert again.read_bytes() == weights.read_bytes()


def test_train_ae_on_identical_frames(tmp_path):
    from edgetrigger import SimConfig
    from edgetrigger.signal import write_frame_dump

    frame = np.random.default_rng(2).normal(size=128)
    dump = write_frame_dump(tmp_path / "same.bin", np.tile(frame, (256, 1)), SimConfig(), 0)
    res = CliRunner().invoke(main, ["train-ae", "--frames", str(dump), "--set", "tinyml.tol=0",
                                    "--set", "tinyml.learning_rate=0.003", "--out", str(tmp_path / "w.bin")])
    assert res.exit_code == 0, res.output
    ratio = float(res.output.split("final loss / mean frame energy:")[1].split()[0])
    assert ratio < 1e-3


def test_tinyml_fire_rate_on_quiet_p0_run(weights, tmp_path):
    res = CliRunner().invoke(main, ["run", "--nodes", "10", "--hours", "2", "--detectors", "tinyml",
                                    "--weights", str(weights), "--set", "noise.drift_on=false",
                                    "--set", "events.rate_per_node_hour=0", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "report.json").read_text())
    frames = 10 * (5625 - 128)
    assert frames >= 50_000
    rate = doc["detectors"][0]["FP"] / frames
    assert 0.005 <= rate <= 0.015


def test_dump_frames(tmp_path):
    out = tmp_path / "frames.bin"
    res = CliRunner().invoke(main, ["dump-frames", "--nodes", "2", "--hours", "1", "--node", "1",
                                    "--start", "10", "--count", "5", "--out", str(out)])
    assert res.exit_code == 0, res.output
    data, meta = read_frame_dump(out)
    assert data.shape == (5, 128) and meta["node"] == "1"
    bad = CliRunner().invoke(main, ["dump-frames", "--nodes", "2", "--node", "5", "--out", str(out)])
    assert bad.exit_code == 1
