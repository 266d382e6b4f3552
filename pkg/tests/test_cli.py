import json
import subprocess
import sys

import pytest

from acbandit import cli, verify
from acbandit.verify import CheckReport


def write_config(path, **over):
    cfg = {"env": {"kind": "figure2"},
           "policy": {"kind": "acb_incremental", "beta": 0.1, "lam": 0.01, "m": 4},
           "horizon": 60, "replicates": 2, "master_seed": 3}
    cfg.update(over)
    path.write_text(json.dumps(cfg))
    return str(path)


def test_run_writes_identical_csv(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["run", cfg, "-o", str(a)]) == 0
    assert cli.main(["run", cfg, "-o", str(b), "-j", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 1 + 2 * 60


def test_run_to_stdout_and_svg(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    assert cli.main(["run", cfg, "--svg", str(tmp_path / "p.svg")]) == 0
    assert capsys.readouterr().out.startswith("config_id,")
    assert (tmp_path / "p.svg").read_text().lstrip().startswith("<?xml")


def test_sweep_is_reproducible(tmp_path):
    cfg = write_config(tmp_path / "c.json", beta_grid=[0.05, 0.5], m_grid=[1, 4])
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["sweep", cfg, "-o", str(a)]) == 0
    assert cli.main(["sweep", cfg, "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 1 + 4


@pytest.mark.parametrize("argv", [["run", "/nonexistent.json"], ["bogus"], [],
                                  ["envelope", "-T", "10", "--d", "2", "--sigma-noise", "0"]])
def test_config_errors_exit_1(argv):
    assert cli.main(argv) == 1


def test_bad_json_and_bad_values_exit_1(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert cli.main(["run", str(p)]) == 1
    assert cli.main(["run", write_config(p, horizon=-1)]) == 1


def test_runtime_failures_exit_2(tmp_path):
    cfg = write_config(tmp_path / "c.json", horizon=3000,
                       policy={"kind": "acb_incremental", "beta": 0.1, "lam": 0.01, "m": 2,
                               "oracle": "sgd_polyak", "sgd": {"learning_rate": 5.0}})
    assert cli.main(["run", cfg, "-o", str(tmp_path / "r.csv")]) == 2
    ok = write_config(tmp_path / "ok.json")
    assert cli.main(["run", ok, "-o", str(tmp_path / "missing" / "r.csv")]) == 2


def test_verify_failure_exits_3(monkeypatch, capsys):
    bad = CheckReport("fake", 1, {}, {}, False)
    monkeypatch.setattr(verify, "default_suite", lambda quick, seed: iter([bad]))
    assert cli.main(["verify", "--quick"]) == 3
    assert json.loads(capsys.readouterr().out)["passed"] is False


def test_envelope_prints_constants(capsys):
    argv = ["envelope", "-T", "10000", "--d", "50", "-A", "50", "--sigma-noise", "0.1"]
    assert cli.main(argv) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["lam"] == pytest.approx(0.01)
    assert out["ensemble_size"]["lazy"] >= 1 and out["regret_envelope"] > 0


def test_figure2_small(tmp_path, capsys):
    argv = ["figure2", "--replicates", "2", "--horizon", "50", "--m-grid", "1,4",
            "--beta-grid", "0.1", "--lr-grid", "0.5", "--out-dir", str(tmp_path)]
    assert cli.main(argv) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert len(lines) == 4
    assert len((tmp_path / "figure2_sweep.csv").read_text().splitlines()) == 5
    meta = json.loads((tmp_path / "figure2_meta.json").read_text())
    assert meta["horizon"] == 50 and set(meta["config_ids"]) == {"exact_rls", "sgd_polyak"}


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path / "c.json", horizon=5, replicates=1)
    proc = subprocess.run([sys.executable, "-m", "acbandit", "run", cfg], capture_output=True, text=True)
    assert proc.returncode == 0 and len(proc.stdout.splitlines()) == 6
