import json
from fractions import Fraction

import pandas as pd
import pytest

from errors import DomainError
from utils import SCHEMA, RunConfig, emit_report, load_config, log_run_history, render_json, save_config


def test_load_config_defaults(tmp_path):
    config = load_config(str(tmp_path / "missing.json"))
    assert config == RunConfig()
    assert config.prec_bits == 128


def test_load_config_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("BETAKIT_PREC_BITS", "256")
    assert load_config(str(tmp_path / "missing.json")).prec_bits == 256
    monkeypatch.setenv("BETAKIT_PREC_BITS", "lots")
    with pytest.raises(DomainError):
        load_config(str(tmp_path / "missing.json"))


def test_load_config_validates(tmp_path, caplog):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"prec_bits": 32}))
    with pytest.raises(DomainError):
        load_config(str(path))

    path.write_text(json.dumps({"depth": 5, "colour": "red"}))
    assert load_config(str(path)).depth == 5
    assert "colour" in caplog.text


def test_save_config_round_trip(tmp_path):
    path = str(tmp_path / "config.json")
    config = RunConfig(depth=7, window="1.6:2", jobs=2)
    save_config(config, path)
    assert load_config(path) == config


def test_updated():
    config = RunConfig().updated(depth=5, window=None)
    assert config.depth == 5
    assert config.window == RunConfig().window
    with pytest.raises(DomainError):
        RunConfig().updated(window="1:2")
    with pytest.raises(DomainError):
        RunConfig().updated(format="yaml")


def test_log_run_history_skips_duplicates(tmp_path):
    path = str(tmp_path / "history.csv")
    params = {"command": "dim", "window": "1.9:2", "depths": [8, 12]}
    results = {"s_star": 0.5, "theory": 0.5}
    assert log_run_history(params, results, path) is True
    assert log_run_history(params, results, path) is False
    assert log_run_history(params, {"s_star": 0.25, "theory": 0.5}, path) is True
    df = pd.read_csv(path)
    assert len(df) == 2
    assert "Timestamp" in df.columns


def test_render_json_is_stable():
    text = render_json({"b": Fraction(1, 3), "a": [1, 2]})
    payload = json.loads(text)
    assert payload == {"schema": SCHEMA, "a": [1, 2], "b": "1/3"}
    assert list(payload) == ["a", "b", "schema"]
    assert text.endswith("\n")
    assert render_json([1, 2]) == "[\n  1,\n  2\n]\n"


def test_emit_report_json_file(tmp_path, capsys):
    path = str(tmp_path / "out.json")
    emit_report({"count": 5}, "json", path)
    assert json.loads(open(path).read()) == {"count": 5, "schema": SCHEMA}
    assert capsys.readouterr().out == ""

    emit_report({"count": 5})
    assert '"count": 5' in capsys.readouterr().out


def test_emit_report_empty_csv_keeps_header():
    text = emit_report({"pieces": []}, "csv", rows=[], columns=["word", "n", "lo", "hi", "length"])
    assert text == "word,n,lo,hi,length\n"


def test_emit_report_xlsx(tmp_path):
    path = str(tmp_path / "out.xlsx")
    emit_report({}, "xlsx", path, rows=[{"depth": 8, "s_star": 0.5}])
    df = pd.read_excel(path, engine="openpyxl")
    assert list(df.columns) == ["depth", "s_star"]
    assert df["depth"].iloc[0] == 8
    with pytest.raises(DomainError):
        emit_report({}, "xlsx")
