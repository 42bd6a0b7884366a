import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from twinexplain.cli import main
from twinexplain.data_io.scene import write_scene

FIX = Path(__file__).parent / "fixtures"


@pytest.fixture
def scene_file(tmp_path, synth):
    p = tmp_path / "convoy.json"
    write_scene(synth("convoy-brake", 0), p)
    return p


def test_missing_scene_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["discover", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_agent_without_action_exit_3(scene_file, capsys):
    assert main(["learn-profile", str(scene_file), "--agent", "c1", "--t", "0.35"]) == 3
    assert main(["learn-profile", str(scene_file), "--agent", "zz", "--t", "0"]) == 3


def test_bad_arguments_exit_4(tmp_path, capsys):
    assert main(["synth", "--template", "parade", "--out", str(tmp_path)]) == 4
    assert "convoy-brake" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        main(["discover"])
    assert e.value.code == 4
    bad = tmp_path / "c.json"
    bad.write_text('{"reward": {"beta_dh": "x"}}')
    assert main(["synth", "--template", "merge", "--config", str(bad)]) == 4


def test_learn_profile(scene_file, tmp_path, capsys):
    out = tmp_path / "p.json"
    assert main(["learn-profile", str(scene_file), "--agent", "c1", "--t", "0",
                 "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert set(rec["weights"]) == {"lane", "headway", "faster", "slower", "force", "bias"}
    assert rec["diagnostics"]["candidates"] == 15
    assert rec["top_motive"]


def test_discover_report(scene_file, tmp_path, capsys):
    out = tmp_path / "d"
    assert main(["discover", str(scene_file), "--out", str(out), "--threshold", "0"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["adjacency"] == [["c0", "c1"]]
    assert any("c0" in l["explanation"] and "caused c1" in l["explanation"]
               for l in report["links"])
    edges = (out / "edges.txt").read_text().splitlines()
    assert len(edges) == len(report["links"]) >= 1
    printed = capsys.readouterr().out
    assert "caused c1" in printed


def test_discover_independent_scene_empty(tmp_path, synth, capsys):
    p = tmp_path / "ind.json"
    write_scene(synth("independent", 0), p)
    assert main(["discover", str(p), "--out", str(tmp_path / "o")]) == 0
    assert json.loads((tmp_path / "o" / "report.json").read_text())["links"] == []


def test_discover_deterministic(scene_file, tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["discover", str(scene_file), "--seed", "7", "--out",
                     str(tmp_path / d)]) == 0
    for f in ("report.json", "edges.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_config_overrides_flags(scene_file, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"action": {"threshold": 1000.0}}))
    assert main(["discover", str(scene_file), "--threshold", "0", "--config", str(cfg),
                 "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["threshold"] == 1000.0 and report["links"] == []


def test_synth_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["synth", "--template", "overtake", "--count", "2", "--seed", "3",
                     "--out", str(tmp_path / d)]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["overtake-000.json", "overtake-001.json"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    assert (tmp_path / "a" / names[0]).read_bytes() != (tmp_path / "a" / names[1]).read_bytes()


def test_evaluate_synthetic(tmp_path, synth, capsys):
    d = tmp_path / "scenes"
    d.mkdir()
    for t in ("convoy-brake", "independent"):
        write_scene(synth(t, 0), d / f"{t}.json")
    out = tmp_path / "roc.csv"
    assert main(["evaluate", str(d), "--thresholds", "0,0.5,inf", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4 and lines[1].startswith("0,1,")
    assert "best F1" in capsys.readouterr().out


def test_evaluate_highd_fixture(tmp_path, capsys):
    out = tmp_path / "roc.csv"
    assert main(["evaluate", str(FIX / "highd"), "--config", str(FIX / "highd_window3.json"),
                 "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 12
    assert all(r.split(",")[1:5] and sum(map(int, r.split(",")[1:5])) == 1 for r in rows[1:])


def test_evaluate_empty_dir(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["evaluate", str(tmp_path / "empty")]) != 0
    assert main(["evaluate", str(tmp_path / "missing")]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "twinexplain", "synth", "--template", "merge",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "merge-000.json").exists()
