import csv
import hashlib
import io
import json
import os
import subprocess

import pytest

from biharmlab import __version__
from biharmlab.cli import main

SMALL = """
[family]
pairs = 4
continuity_pairs = 4
accretivity_members = 6
lemma_members = 4
sweep_size = 6
descent_iters = 5
"""


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("BIHARMLAB_"):
            monkeypatch.delenv(key)


def run(tmp_path, *argv, config=None):
    out = tmp_path / "out"
    args = list(argv) + ["--out", str(out)]
    if config is not None:
        path = tmp_path / "run.toml"
        path.write_text(config)
        args += ["--config", str(path)]
    return main(args), out


def read_json(path):
    return json.loads(path.read_text())


def test_spectrum_outputs_and_manifest(tmp_path):
    code, out = run(tmp_path, "spectrum", "--dense-oracle")
    assert code == 0
    data = read_json(out / "spectrum.json")
    assert len(data["merged"]) == 70
    assert data["checks"]["spectrum-dense-oracle"]["status"] == "PASS"
    man = read_json(out / "manifest.json")
    assert man["exit_code"] == 0 and man["tool_version"] == __version__
    assert man["run_id"].startswith("spectrum-" + man["config_hash"][:12])
    for art in man["artifacts"]:
        digest = hashlib.sha256((out / art["path"]).read_bytes()).hexdigest()
        assert digest == art["sha256"]
    assert {a["path"] for a in man["artifacts"]} == {"spectrum.json", "spectrum.csv"}


def test_spectrum_json_is_deterministic(tmp_path):
    run(tmp_path / "a", "spectrum")
    run(tmp_path / "b", "spectrum")
    a = (tmp_path / "a" / "out" / "spectrum.json").read_bytes()
    b = (tmp_path / "b" / "out" / "spectrum.json").read_bytes()
    assert a == b


def test_usage_errors_exit_2(tmp_path, monkeypatch):
    assert main(["nonsense"]) == 2
    assert run(tmp_path, "spectrum", config="bogus = 1\n")[0] == 2
    assert run(tmp_path, "spectrum", config="[operator]\nN = 4\n")[0] == 2
    assert run(tmp_path, "evolve", config="[operator]\nlambda = 1.0\n")[0] == 2
    assert run(tmp_path, "verify", "--seed", "-3")[0] == 2
    monkeypatch.setenv("BIHARMLAB_OPERATOR__N", "4")
    assert run(tmp_path, "form-check")[0] == 2


def test_evolve_defaults_to_lambda0(tmp_path):
    code, out = run(tmp_path, "evolve")
    assert code == 0
    data = read_json(out / "evolve.json")
    assert data["lambda_source"] == "lambda0"
    assert data["params"]["lambda"] == data["params"]["lambda0"]
    entry = data["trajectories"][0]
    assert {r["id"]: r["status"] for r in entry["reports"]} == {
        "contraction[implicit-euler]": "PASS", "decay-rate[l=0]": "PASS", "smoothing": "PASS"}
    assert (out / "trajectory_l0.csv").exists()


def test_evolve_zero_data(tmp_path):
    code, out = run(tmp_path, "evolve", config="[evolution]\ninitial = 'zero'\nsectors = [0, 1]\n")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((out / "trajectory_l1.csv").read_text())))
    assert all(float(r["norm"]) == 0.0 for r in rows)


def test_form_check(tmp_path):
    code, out = run(tmp_path, "form-check")
    assert code == 0
    data = read_json(out / "form-check.json")
    assert data["passed"] and data["params"]["lambda"] == data["params"]["lambda0"]


def test_constants_json_and_csv_agree(tmp_path):
    code, out = run(tmp_path, "constants", config=SMALL)
    assert code == 0
    rows = read_json(out / "constants.json")["rows"]
    table = list(csv.DictReader(io.StringIO((out / "constants.csv").read_text())))
    assert [r["name"] for r in rows] == [r["name"] for r in table]
    for js, cs in zip(rows, table):
        if isinstance(js["value"], float):
            assert repr(js["value"]) == cs["value"]
    byname = {r["name"]: r["value"] for r in rows}
    assert byname["k[gamma=2.0,N=9]"] == -12.5
    assert byname["c0_sharp[N=9]"] == 126.5625


def test_plots_only_on_request(tmp_path):
    code, out = run(tmp_path, "spectrum", "--plots")
    assert code == 0 and (out / "spectrum.png").exists()
    assert "spectrum.png" in {a["path"] for a in read_json(out / "manifest.json")["artifacts"]}


def test_console_script():
    res = subprocess.run(["biharmlab", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
