import json
import subprocess
import sys
import time

import httpx
import pytest

from ditherlab import cli
from ditherlab.config import default_config, dump_config
from ditherlab.errors import DitherlabError
from ditherlab.report import RunReport

_FAST_ARGS = ["--trials", "10"]


def _run(*args):
    return subprocess.run(
        [sys.executable, "-m", "ditherlab.cli", *args],
        capture_output=True,
        text=True,
        timeout=300,
    )


def _fast_ini(tmp_path, **overrides):
    config = default_config().with_overrides(
        trials=10, dither_grid=8, estimator_samples=20_000, seed=3, **overrides
    )
    path = tmp_path / "run.ini"
    path.write_text(dump_config(config))
    return str(path)


def test_region_subcommand_emits_canonical_json(tmp_path):
    result = _run("region", "--config", _fast_ini(tmp_path))
    assert result.returncode == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload["mode"] == "region"
    assert "elapsed" in result.stderr


def test_csv_format_and_out_file(tmp_path):
    out = tmp_path / "report.csv"
    result = _run(
        "quantize-demo", "--config", _fast_ini(tmp_path), "--format", "csv",
        "--out", str(out),
    )
    assert result.returncode == 0, result.stderr
    assert result.stdout == ""
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert lines[0].startswith("mode,")


def test_seed_and_trials_overrides(tmp_path):
    result = _run(
        "sw-sim", "--config", _fast_ini(tmp_path), "--seed", "77", "--trials", "5"
    )
    assert result.returncode == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload["seed"] == 77
    assert payload["coding"]["trials"] == 5


def test_bad_config_file_exits_2(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[source]\nkind = uniform-square\nhalfwidth = 1.0\nwat = 1\n")
    result = _run("region", "--config", str(path))
    assert result.returncode == 2
    assert "configuration error" in result.stderr


def test_missing_config_file_exits_2(tmp_path):
    result = _run("region", "--config", str(tmp_path / "absent.ini"))
    assert result.returncode == 2


def test_failed_checks_exit_1(monkeypatch, capsys):
    def failing(_config):
        return RunReport(
            payload={
                "mode": "region",
                "checks": [{"name": "synthetic", "status": "fail", "detail": "x"}],
            }
        )

    monkeypatch.setitem(cli._RUNNERS, "region", failing)
    code = cli.main(["region", *_FAST_ARGS])
    assert code == 1
    assert "check failed: synthetic" in capsys.readouterr().err


def test_runtime_error_exits_3(monkeypatch):
    def exploding(_config):
        raise DitherlabError("synthetic failure")

    monkeypatch.setitem(cli._RUNNERS, "region", exploding)
    assert cli.main(["region", *_FAST_ARGS]) == 3


def test_unexpected_error_exits_3(monkeypatch):
    def exploding(_config):
        raise RuntimeError("not a package error")

    monkeypatch.setitem(cli._RUNNERS, "region", exploding)
    assert cli.main(["region", *_FAST_ARGS]) == 3


@pytest.fixture(scope="module")
def live_server():
    process = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "uvicorn",
            "ditherlab.service.app:app",
            "--host",
            "127.0.0.1",
            "--port",
            "8731",
            "--log-level",
            "warning",
        ],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    url = "http://127.0.0.1:8731"
    try:
        deadline = time.monotonic() + 30.0
        while True:
            try:
                if httpx.get(url + "/healthz", timeout=1.0).status_code == 200:
                    break
            except httpx.HTTPError:
                pass
            if time.monotonic() > deadline:
                raise RuntimeError("server did not come up")
            time.sleep(0.2)
        yield url
    finally:
        process.terminate()
        process.wait(timeout=10)


def test_cli_against_live_server(live_server, tmp_path, capsys):
    code = cli.main(
        ["--server", live_server, "region", "--config", _fast_ini(tmp_path)]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["mode"] == "region"


def test_cli_rejects_bad_config_before_sending(live_server, tmp_path):
    path = tmp_path / "neg.ini"
    text = dump_config(default_config()).replace(
        "distortion1 = 0.3333333333333333", "distortion1 = -1.0"
    )
    path.write_text(text)
    code = cli.main(["--server", live_server, "region", "--config", str(path)])
    assert code == 2


def test_cli_selftest_against_live_server(live_server, capsys):
    code = cli.main(["--server", live_server, "selftest"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["mode"] == "selftest"
    assert payload["passed"] is True
