"""Command-line runs on small configurations."""

import json

import pytest

from h2sched.cli import COMMANDS, RunConfig, main

SMALL = """
seed = 3
[model]
kind = "{kind}"
segments = 2
[market]
hours = 6
[scenarios]
count = 2
[compare]
benchmark = "mil3"
[bench]
models = ["l2", "mil2"]
scenarios = [1]
repetitions = 1
"""

OUTPUTS = {
    "fit": ["fit.csv", "report.txt"],
    "segment": ["segments.csv", "report.txt"],
    "solve": ["solution.csv", "gaps.csv", "report.txt"],
    "stochastic": ["solution.csv", "gaps.csv", "report.txt"],
    "check": ["solution.csv", "gaps.csv", "report.txt"],
    "expost": ["expost.csv", "solution.csv", "report.txt"],
    "compare": ["gamma.csv", "report.txt"],
    "bench": ["bench.csv", "report.txt"],
}


def _config(tmp_path, kind="l", text=None):
    p = tmp_path / "run.toml"
    p.write_text(SMALL.format(kind=kind) if text is None else text)
    return p


def _run(tmp_path, command, cfg, name="out"):
    out = tmp_path / name
    code = main([command, "--config", str(cfg), "--out", str(out)])
    return code, out


@pytest.mark.parametrize("command", COMMANDS)
def test_every_command_writes_its_files(tmp_path, command):
    code, out = _run(tmp_path, command, _config(tmp_path))
    assert code == 0
    for name in OUTPUTS[command]:
        text = (out / name).read_text()
        assert "config_hash=" in text.splitlines()[0]
        assert f"command={command}" in text.splitlines()[0]
    assert not (out / "error.json").exists()


@pytest.mark.parametrize("command", ["fit", "segment", "solve", "check", "compare", "stochastic"])
def test_reruns_are_byte_identical(tmp_path, command):
    cfg = _config(tmp_path, "soc")
    _, a = _run(tmp_path, command, cfg, "a")
    _, b = _run(tmp_path, command, cfg, "b")
    for name in OUTPUTS[command]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_hash_follows_settings(tmp_path):
    a = RunConfig.load(_config(tmp_path, "l")).digest()
    b = RunConfig.load(_config(tmp_path, "mil")).digest()
    c = RunConfig.load(_config(tmp_path, "l"), {"out": "elsewhere"}).digest()
    assert a != b
    assert a == c


@pytest.mark.parametrize(
    "text",
    [
        "colour = 1\n",
        "[model]\nkind = \"cubic\"\n",
        "[model]\nsegments = 0\n",
        "[model]\nsegments = \"two\"\n",
        "[market]\npath = \"missing.csv\"\n",
        "[solver]\nbackend = \"gurobi\"\n",
        "[compare]\nbenchmark = \"mil\"\n",
        "[plant\n",
    ],
)
def test_config_errors_exit_2(tmp_path, text):
    code, out = _run(tmp_path, "solve", _config(tmp_path, text=text))
    assert code == 2
    rec = json.loads((out / "error.json").read_text())
    assert rec["error"] == "ConfigError"
    assert rec["command"] == "solve"


def test_missing_config_file_exits_2(tmp_path):
    code, out = _run(tmp_path, "fit", tmp_path / "nope.toml")
    assert code == 2
    assert (out / "error.json").exists()


def test_bad_data_exits_1(tmp_path):
    (tmp_path / "market.csv").write_text("hour,price_eur_mwh,wind_cf\n0,10.0,1.5\n")
    code, out = _run(tmp_path, "solve", _config(tmp_path, text="[market]\npath = \"market.csv\"\n"))
    assert code == 1
    rec = json.loads((out / "error.json").read_text())
    assert rec["error"] == "DataError"
    assert "wind_cf" in rec["message"]
    assert rec["config_hash"]


def test_market_file_is_used(tmp_path):
    rows = "\n".join(f"{t},{20.0 + t},{0.5}" for t in range(4))
    (tmp_path / "market.csv").write_text("hour,price_eur_mwh,wind_cf\n" + rows + "\n")
    code, out = _run(tmp_path, "solve", _config(tmp_path, text="[market]\npath = \"market.csv\"\n"))
    assert code == 0
    lines = [ln for ln in (out / "solution.csv").read_text().splitlines() if not ln.startswith("#")]
    assert len(lines) == 1 + 4


def test_command_line_overrides(tmp_path):
    out = tmp_path / "o"
    code = main(["segment", "--segments", "3", "--out", str(out)])
    assert code == 0
    body = (out / "segments.csv").read_text().splitlines()
    assert sum(1 for ln in body if ln and ln[0].isdigit()) == 3
