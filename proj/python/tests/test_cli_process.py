"""Drives the installed `easteer` binary as a separate process."""

import json
import os
import pathlib
import signal
import subprocess

import pytest

DATA = pathlib.Path(os.environ.get("EASTEER_TEST_DATA", pathlib.Path(__file__).resolve().parents[2] / "tests" / "data"))
CLI = os.environ.get("EASTEER_CLI")

pytestmark = pytest.mark.skipif(not CLI, reason="EASTEER_CLI not set")


def test_replay_server_over_http(tmp_path):
    server = subprocess.Popen(
        [CLI, "fixtures", "serve", "--fixtures", str(DATA / "bench" / "fixtures"), "--port", "0"],
        stdout=subprocess.PIPE, text=True)
    try:
        line = server.stdout.readline()
        assert line.startswith("listening on http://"), line
        url = line.split()[-1]
        cfg = json.loads((DATA / "bench" / "config.json").read_text())
        cfg["adapter"] = {"url": url, "max_in_flight": 4, "timeout_ms": 10000}
        (tmp_path / "config.json").write_text(json.dumps(cfg))
        run = subprocess.run([CLI, "benchmark", "--config", str(tmp_path / "config.json"),
                              "--output-dir", str(tmp_path / "run")], capture_output=True, text=True, timeout=120)
        assert run.returncode == 0, run.stderr
        assert (tmp_path / "run" / "report.json").read_bytes() == (DATA / "bench" / "golden_report.json").read_bytes()
    finally:
        server.send_signal(signal.SIGINT)
        assert server.wait(timeout=20) == 0


def test_unreachable_adapter_is_an_error(tmp_path):
    (tmp_path / "config.json").write_text(json.dumps(
        {"adapter": {"url": "http://127.0.0.1:9", "timeout_ms": 500, "retries": 1}, "method": "default",
         "n_images": 1, "target_concepts": ["Nurse"]}))
    run = subprocess.run([CLI, "benchmark", "--config", str(tmp_path / "config.json"),
                          "--output-dir", str(tmp_path / "run")], capture_output=True, text=True, timeout=60)
    assert run.returncode == 1
    assert "Transport" in run.stderr


def test_report_on_empty_dir(tmp_path):
    run = subprocess.run([CLI, "report", str(tmp_path)], capture_output=True, text=True)
    assert run.returncode == 4
    assert "no records" in run.stderr
