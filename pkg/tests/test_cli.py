import json

from click.testing import CliRunner
import pytest

from oditids import __version__
from oditids.main import main

CONFIG = """\
[topology]
nodes = 2
devices_per_node = 5

[detector]
k = 2
m1 = 100
m2 = 300

[attack]
onset = 100
fraction = 0.5
rate_increase = 1.0
"""


def _error(result) -> dict:
    lines = [line for line in result.output.splitlines() if '"exit_code"' in line]
    assert lines, result.output
    return json.loads(lines[-1])


@pytest.fixture
def runner(tmp_path, monkeypatch) -> CliRunner:
    monkeypatch.chdir(tmp_path)
    return CliRunner()


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(CONFIG, encoding="utf-8")
    return path


def _invoke(runner, *args):
    return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)


@pytest.fixture
def trained(runner, config_file, tmp_path):
    result = _invoke(
        runner, "simulate", "--config", config_file, "--out", tmp_path / "nominal", "--steps", 600, "--no-attack"
    )
    assert result.exit_code == 0, result.output
    assert not (tmp_path / "nominal" / "trace.truth.json").exists()

    result = _invoke(
        runner, "train", tmp_path / "nominal" / "trace.csv", "--config", config_file, "--out", tmp_path / "model"
    )
    assert result.exit_code == 0, result.output
    return tmp_path / "model" / "model.json"


def test_version(runner):
    result = _invoke(runner, "--version")
    assert result.exit_code == 0
    assert __version__ in result.output


def test_simulate_train_detect_mitigate(runner, config_file, trained, tmp_path):
    result = _invoke(
        runner, "simulate", "--config", config_file, "--out", tmp_path / "attacked", "--steps", 300, "--seed", 2
    )
    assert result.exit_code == 0, result.output
    attacked = tmp_path / "attacked" / "trace.csv"
    truth = json.loads((tmp_path / "attacked" / "trace.truth.json").read_text(encoding="utf-8"))
    assert truth["onset"] == 100
    assert len(truth["attacked"]) == 5
    assert (tmp_path / "attacked" / "run_config.toml").exists()

    result = _invoke(
        runner, "detect", trained, attacked, "--config", config_file, "--threshold", 5, "--out", tmp_path / "detect"
    )
    assert result.exit_code == 0, result.output
    alarm = json.loads((tmp_path / "detect" / "alarm.json").read_text(encoding="utf-8"))
    assert alarm["alarmed"]
    assert alarm["h"] == 5.0
    assert alarm["fusion"] == "sum"
    assert len(alarm["statistic"]) == alarm["alarm_time"]
    assert alarm["statistic"][-1] >= 5.0

    result = _invoke(
        runner,
        "mitigate",
        trained,
        attacked,
        tmp_path / "detect" / "alarm.json",
        "--config",
        config_file,
        "--out",
        tmp_path / "mitigate",
    )
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "mitigate" / "mitigation.json").read_text(encoding="utf-8"))
    assert report["alarm"] == alarm["alarm_time"]
    assert 1 <= report["onset"] <= report["alarm"]
    assert len(report["node_scores"]) == 2
    assert len(report["blocked"]) == len(report["flagged_devices"])


def test_quiet_trace_has_nothing_to_mitigate(runner, config_file, trained, tmp_path):
    quiet = tmp_path / "nominal" / "trace.csv"
    result = _invoke(
        runner, "detect", trained, quiet, "--config", config_file, "--threshold", 1e12, "--out", tmp_path / "detect"
    )
    assert result.exit_code == 0, result.output
    alarm = tmp_path / "detect" / "alarm.json"
    assert json.loads(alarm.read_text(encoding="utf-8"))["alarm_time"] is None

    result = runner.invoke(main, ["mitigate", str(trained), str(quiet), str(alarm), "--out", str(tmp_path / "m")])
    assert result.exit_code == 2
    assert _error(result)["type"] == "DataValidationError"


def test_device_count_mismatch(runner, config_file, trained, tmp_path):
    narrow = ["--out", tmp_path / "narrow", "--steps", 50, "--devices", 4, "--no-attack"]
    result = _invoke(runner, "simulate", "--config", config_file, *narrow)
    assert result.exit_code == 0, result.output

    result = runner.invoke(
        main, ["detect", str(trained), str(tmp_path / "narrow" / "trace.csv"), "--out", str(tmp_path / "detect")]
    )
    assert result.exit_code == 2
    error = _error(result)
    assert error["type"] == "DimensionMismatchError"
    assert error["details"] == {"expected": 5, "actual": 4}


def test_bad_trace_header(runner, trained, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,node,device,count\n0,0,a,1\n", encoding="utf-8")
    result = runner.invoke(main, ["detect", str(trained), str(bad), "--out", str(tmp_path / "detect")])
    assert result.exit_code == 2
    assert _error(result)["type"] == "DataValidationError"


def test_edited_schema_version(runner, trained, tmp_path):
    data = json.loads(trained.read_text(encoding="utf-8"))
    data["schema_version"] = 99
    trained.write_text(json.dumps(data), encoding="utf-8")

    result = runner.invoke(
        main, ["detect", str(trained), str(tmp_path / "nominal" / "trace.csv"), "--out", str(tmp_path / "detect")]
    )
    assert result.exit_code == 2
    assert _error(result)["type"] == "SchemaVersionError"


def test_input_cannot_be_overwritten(runner, config_file, tmp_path):
    result = _invoke(runner, "simulate", "--config", config_file, "--out", tmp_path, "--steps", 500, "--no-attack")
    assert result.exit_code == 0, result.output
    target = tmp_path / "out" / "model.json"
    target.parent.mkdir()
    (tmp_path / "trace.csv").rename(target)

    result = runner.invoke(main, ["train", str(target), "--out", str(tmp_path / "out")])
    assert result.exit_code == 2
    assert "also an output" in _error(result)["message"]


def test_invalid_config_exits_with_validation_code(runner, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[detector]\nalpha = 2.0\n", encoding="utf-8")
    result = runner.invoke(main, ["simulate", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2
    assert _error(result)["type"] == "ConfigError"
