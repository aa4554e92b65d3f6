import csv
import io
import json

import pytest

import main as entry
from cli import records, runner
from cli.config import ExperimentConfig, build_parser, parse_config, with_defaults
from cli.records import COLUMNS, WALL_CLOCK_KEY, ResultRecord, render_csv, render_json, write_record
from cli.runner import run, run_and_write
from core.errors import (
    EXIT_ASSERTION_FAILED,
    EXIT_GRAPH_SPEC,
    EXIT_OK,
    EXIT_PARAM_DOMAIN,
    EXIT_THETA_DOMAIN,
    EXIT_USAGE,
    ConfigError,
    DomainError,
    GraphSpecError,
    ThetaDomainError,
)


def _values(record):
    return {e.key: e.value for e in record.entries}


def _stable_rows(record):
    return [row for row in record.rows() if row["key"] != WALL_CLOCK_KEY]


# ── 設定解析 ──

def test_parse_example_command():
    config = parse_config([
        "verify-duality", "--s", "2.5", "--t", "0.7", "--n", "4", "--m", "3",
        "--x", "0.3", "--y", "1.7", "--replicas", "0", "--seed", "7", "--format", "json",
    ])
    assert config.command == "verify-duality"
    assert (config.s, config.t, config.n, config.m) == (2.5, 0.7, 4, 3)
    assert config.params.shape == pytest.approx(3.2)
    assert config.format == "json"
    assert config.kernel.num_vertices == 2


def test_parse_list_and_renamed_flags():
    config = parse_config(["simulate", "--graph", "cycle:3", "--init", "1,2,3", "--N", "5", "--N-max", "9", "--K", "200"])
    assert config.init == (1.0, 2.0, 3.0)
    assert (config.total, config.n_max, config.scale) == (5, 9, 200)


@pytest.mark.parametrize("argv, error, code", [
    (["stationary", "--s", "-1"], DomainError, EXIT_PARAM_DOMAIN),
    (["stationary", "--t", "0"], DomainError, EXIT_PARAM_DOMAIN),
    (["detailed-balance", "--theta", "1.5"], ThetaDomainError, EXIT_THETA_DOMAIN),
    (["simulate", "--graph", "star:3"], GraphSpecError, EXIT_GRAPH_SPEC),
    (["simulate", "--time", "-1"], DomainError, EXIT_PARAM_DOMAIN),
])
def test_domain_errors(argv, error, code):
    with pytest.raises(error) as excinfo:
        parse_config(argv)
    assert excinfo.value.exit_code == code


def test_usage_errors_exit_two():
    with pytest.raises(SystemExit) as excinfo:
        parse_config(["no-such-command"])
    assert excinfo.value.code == EXIT_USAGE
    with pytest.raises(SystemExit):
        build_parser().parse_args(["simulate", "--ti", "1"])


def test_config_dict_round_trip():
    config = ExperimentConfig("gauss-sum", s=2.0, t=3.0, n_max=5, init=(1.0, 2.0), xi=(2, 1))
    assert ExperimentConfig.from_dict(config.to_dict()) == config
    assert json.loads(config.to_json())["init"] == [1.0, 2.0]


def test_config_file_overrides_flags(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"s": 2.0, "t": 3.0, "n_max": 5}), encoding="utf-8")
    config = parse_config(["gauss-sum", "--s", "9", "--config", str(path)])
    assert (config.s, config.t, config.n_max) == (2.0, 3.0, 5)


def test_config_file_round_trip(tmp_path):
    config = ExperimentConfig("discrete-transform", theta=0.3, xi=(1, 2), replicas=0).validate()
    path = tmp_path / "saved.json"
    path.write_text(config.to_json(), encoding="utf-8")
    assert parse_config(["gauss-sum", "--config", str(path)]) == config


def test_config_file_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"s": 1.0, "colour": "blue"}), encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        parse_config(["gauss-sum", "--config", str(path)])
    assert excinfo.value.exit_code == EXIT_USAGE
    with pytest.raises(ConfigError):
        parse_config(["gauss-sum", "--config", str(tmp_path / "missing.json")])


def test_with_defaults_only_fills_missing():
    config = ExperimentConfig("ergodic", x=5.0)
    filled = with_defaults(config, x=3.0, y=0.0)
    assert (filled.x, filled.y) == (5.0, 0.0)
    assert with_defaults(filled, x=1.0) is filled


# ── 紀錄 ──

def test_record_checks():
    record = ResultRecord("demo")
    assert record.add_check("small", 1e-15, 1e-12)
    assert not record.add_check("nan", float("nan"), 1e-12)
    assert record.add_check("ratio", 10.0, 5.0, comparison="ge")
    assert not record.add_check("ratio_low", 2.0, 5.0, comparison="ge")
    record.add_info("note", "hello")
    assert len(record.assertions) == 4
    assert [e.key for e in record.failures] == ["nan", "ratio_low"]
    assert not record.all_passed
    with pytest.raises(ValueError):
        record.add_check("bad", 1.0, 1.0, comparison="eq")


def test_render_formats():
    record = ResultRecord("demo")
    record.add_check("value", 0.5, 1.0)
    record.add_info("list", [1, 2.5])
    rows = list(csv.DictReader(io.StringIO(render_csv(record))))
    assert tuple(rows[0]) == COLUMNS
    assert rows[0]["pass"] == "true"
    assert rows[1]["value"] == "1 2.5"
    assert rows[1]["tolerance"] == ""
    assert rows[-1]["key"] == WALL_CLOCK_KEY
    assert json.loads(render_json(record))[0]["key"] == "value"


def test_write_record_to_stdout(capsys):
    record = ResultRecord("demo")
    record.add_info("answer", 42)
    assert write_record(record, "-", "csv") is None
    out = capsys.readouterr().out
    assert out.splitlines()[0] == ",".join(COLUMNS)
    assert "demo,answer,42,," in out


def test_write_record_default_path(tmp_path, monkeypatch):
    monkeypatch.setattr(records, "OUTPUT_DIR", tmp_path / "out")
    record = ResultRecord("gauss-sum")
    path = write_record(record, None, "json")
    assert path == tmp_path / "out" / "gauss-sum.json"
    assert json.loads(path.read_text(encoding="utf-8"))[-1]["key"] == WALL_CLOCK_KEY


# ── 實驗 ──

def test_stationary_experiment():
    record, status = run(parse_config(["stationary", "--N", "2", "--N-max", "10"]))
    assert status == EXIT_OK
    values = _values(record)
    assert values["probs[0]"] == pytest.approx(0.3, rel=1e-13)
    assert values["probs[1]"] == pytest.approx(0.4, rel=1e-13)
    assert values["partition"] == pytest.approx(10.0, rel=1e-13)
    assert values["config.command"] == "stationary"
    assert record.rows()[-1]["key"] == WALL_CLOCK_KEY


def test_simulate_at_time_zero():
    record, status = run(parse_config(["simulate", "--graph", "path:3", "--init", "1,2,3", "--time", "0"]))
    assert status == EXIT_OK
    values = _values(record)
    assert [values[f"state[{i}]"] for i in range(3)] == [1.0, 2.0, 3.0]
    assert values["jumps"] == 0


def test_simulate_records_path():
    record, status = run(parse_config(["simulate", "--graph", "cycle:4", "--time", "2", "--record-path"]))
    assert status == EXIT_OK
    assert "path[0].time" in _values(record)


def test_rerun_is_reproducible():
    argv = ["simulate-dual", "--n", "3", "--m", "1", "--replicas", "3000", "--seed", "11", "--threads", "2"]
    first, _ = run(parse_config(argv))
    second, _ = run(parse_config(argv[:-1] + ["1"]))
    rows_a = [r for r in _stable_rows(first) if r["key"] != "config.threads"]
    rows_b = [r for r in _stable_rows(second) if r["key"] != "config.threads"]
    assert rows_a == rows_b


@pytest.mark.parametrize("argv", [
    ["gauss-sum"],
    ["su11", "--s", "2", "--t", "3", "--N-max", "8"],
    ["verify-duality", "--replicas", "0"],
    ["verify-self-duality", "--N-max", "4"],
    ["discrete-transform", "--replicas", "0"],
    ["detailed-balance", "--N-max", "8"],
])
def test_deterministic_experiments_pass(argv):
    record, status = run(parse_config(argv))
    assert status == EXIT_OK, [e.key for e in record.failures]
    assert record.assertions


def test_discrete_transform_with_empty_configuration():
    record, status = run(parse_config(["discrete-transform", "--n", "0", "--m", "0", "--replicas", "1000"]))
    assert status == EXIT_OK, [e.key for e in record.failures]
    values = _values(record)
    assert values["gamma_transform.mc_mean"] == values["gamma_transform.exact"] == 1.0
    assert values["gamma_transform.z"] == 0.0


@pytest.mark.slow
@pytest.mark.parametrize("s, t", [("1", "1"), ("2", "3")])
def test_wealth_spread_experiment(s, t):
    argv = ["wealth-spread", "--graph", "path:5", "--init", "5,0,0,0,0", "--time", "2",
            "--s", s, "--t", t, "--replicas", "100000", "--seed", "3"]
    record, status = run(parse_config(argv))
    assert status == EXIT_OK, [e.key for e in record.failures]


def test_failed_assertion_exit_code(monkeypatch):
    def always_fails(config, record, rng):
        record.add_check("impossible", 1.0, 0.0)

    monkeypatch.setitem(runner.EXPERIMENTS, "gauss-sum", always_fails)
    record, status = run(parse_config(["gauss-sum"]))
    assert status == EXIT_ASSERTION_FAILED
    assert [e.key for e in record.failures] == ["impossible"]


# ── 進入點 ──

@pytest.mark.parametrize("argv, code", [
    (["stationary", "--s", "-1"], EXIT_PARAM_DOMAIN),
    (["detailed-balance", "--theta", "0"], EXIT_THETA_DOMAIN),
    (["simulate", "--graph", "path:1"], EXIT_GRAPH_SPEC),
])
def test_main_exit_codes(argv, code):
    assert entry.main(argv) == code


def test_main_writes_stdout(capsys):
    assert entry.main(["gauss-sum", "--N-max", "6", "-o", "-"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[-1]["key"] == WALL_CLOCK_KEY
    assert any(r["key"] == "relative_residual.max" and r["pass"] == "true" for r in rows)


def test_run_and_write_to_file(tmp_path):
    target = tmp_path / "result.json"
    status = run_and_write(parse_config(["gauss-sum", "-o", str(target), "--format", "json"]))
    assert status == EXIT_OK
    assert json.loads(target.read_text(encoding="utf-8"))[0]["experiment"] == "gauss-sum"
