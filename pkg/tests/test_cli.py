import json
import subprocess
import sys

import pytest
import yaml
from click.testing import CliRunner
from conftest import make_notebook

from j2k.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args, env=None):
    return runner.invoke(main, list(args), env=env, catch_exceptions=False)


def test_translate_linear3(runner, tmp_path, fixtures):
    out = tmp_path / "out"
    res = invoke(runner, "translate", "--notebook", str(fixtures / "linear3.ipynb"), "--out", str(out))
    assert res.exit_code == 0, res.output
    manifests = sorted(p.name for p in (out / "manifests").iterdir() if p.name != "all.yaml")
    assert len(manifests) == 15
    assert len(list(yaml.safe_load_all((out / "manifests" / "all.yaml").read_text()))) == 15
    assert sorted(p.name for p in (out / "build").iterdir()) == ["step-1", "step-2", "step-3"]
    graph = json.loads((out / "graph.json").read_text())
    assert len(graph["steps"]) == 3 and len(graph["edges"]) == 2
    for path in out.rglob("*"):
        if path.is_file():
            assert str(tmp_path) not in path.read_text()


def test_translate_missing_notebook(runner, tmp_path):
    res = invoke(runner, "translate", "--notebook", str(tmp_path / "nope.ipynb"), "--out", str(tmp_path / "o"))
    assert res.exit_code == 2
    assert "nope.ipynb" in res.stderr and res.stderr.startswith("error: ")


def test_translate_warns_on_unresolved_use(runner, tmp_path):
    nb = tmp_path / "nb.ipynb"
    nb.write_bytes(make_notebook("y = mystery + 1", "import leftpad\nz = y"))
    res = invoke(runner, "translate", "--notebook", str(nb), "--out", str(tmp_path / "o"))
    assert res.exit_code == 0
    assert "warning: unresolved use of 'mystery' in step step-1 (cell 0)" in res.stderr.splitlines()
    assert "warning: import 'leftpad' in step step-2 has no package mapping (cell 1)" in res.stderr.splitlines()


def test_translate_input_errors(runner, tmp_path, fixtures):
    bad_marker = tmp_path / "bad.ipynb"
    bad_marker.write_bytes(make_notebook("a = 1", "# j2k: step !!\nb = 2"))
    res = invoke(runner, "translate", "--notebook", str(bad_marker), "--out", str(tmp_path / "o"))
    assert res.exit_code == 2 and res.stderr.rstrip().endswith("(cell 1)")
    spec = tmp_path / "j2k.yml"
    spec.write_text("unknown_key: 1\n")
    res = invoke(runner, "translate", "--notebook", str(fixtures / "linear3.ipynb"), "--env-spec", str(spec),
                 "--out", str(tmp_path / "o"))
    assert res.exit_code == 2 and "unknown_key" in res.stderr
    res = invoke(runner, "translate", "--notebook", str(fixtures / "linear3.ipynb"), "--storage", "cloud",
                 "--out", str(tmp_path / "o"))
    assert res.exit_code == 2 and "efs_handle" in res.stderr


def test_translate_cloud_and_no_hpa(runner, tmp_path, fixtures):
    spec = tmp_path / "j2k.yml"
    spec.write_text("storage: cloud\nstorage_options: {efs_handle: fs-42}\nenv: {MODE: prod}\n")
    out = tmp_path / "o"
    res = invoke(runner, "translate", "--notebook", str(fixtures / "diamond.ipynb"), "--env-spec", str(spec),
                 "--no-hpa", "--out", str(out))
    assert res.exit_code == 0, res.stderr
    docs = list(yaml.safe_load_all((out / "manifests" / "all.yaml").read_text()))
    assert len(docs) == 16
    assert {d["kind"] for d in docs} == {"PersistentVolume", "PersistentVolumeClaim", "Service", "Deployment"}
    pv = docs[0]
    assert pv["spec"]["csi"]["volumeHandle"] == "fs-42"


def test_translate_rewrites_stale_output(runner, tmp_path, fixtures):
    out = tmp_path / "o"
    (out / "build" / "old-step").mkdir(parents=True)
    invoke(runner, "translate", "--notebook", str(fixtures / "linear3.ipynb"), "--out", str(out))
    assert not (out / "build" / "old-step").exists()


def test_out_from_environment_variable(runner, tmp_path, fixtures):
    out = tmp_path / "from-env"
    res = invoke(runner, "translate", "--notebook", str(fixtures / "linear3.ipynb"), env={"J2K_OUT": str(out)})
    assert res.exit_code == 0 and (out / "graph.json").exists()
    flag = tmp_path / "from-flag"
    invoke(runner, "translate", "--notebook", str(fixtures / "linear3.ipynb"), "--out", str(flag),
           env={"J2K_OUT": str(out)})
    assert (flag / "graph.json").exists()


def translated(runner, tmp_path, fixtures):
    out = tmp_path / "out"
    assert invoke(runner, "translate", "--notebook", str(fixtures / "linear3.ipynb"), "--out", str(out)).exit_code == 0
    return out


def test_simulate_linear3(runner, tmp_path, fixtures):
    out = translated(runner, tmp_path, fixtures)
    res = invoke(runner, "simulate", "--out", str(out), "--ticks", "40")
    assert res.exit_code == 0, res.stderr
    assert "steps completed: 3/3" in res.stdout
    summary = json.loads((out / "summary.json").read_text())
    assert summary["steps_completed"] == 3 and summary["steps_total"] == 3
    first = json.loads((out / "events.jsonl").read_text().splitlines()[0])
    assert first["tick"] == 0 and first["seq"] == 0


def test_simulate_zero_ticks(runner, tmp_path, fixtures):
    out = translated(runner, tmp_path, fixtures)
    res = invoke(runner, "simulate", "--out", str(out), "--ticks", "0")
    assert res.exit_code == 3 and "0/3" in res.stdout


def test_simulate_starvation(runner, tmp_path, fixtures):
    out = translated(runner, tmp_path, fixtures)
    script = tmp_path / "faults.yml"
    entries = [{"tick": t, "action": "KillPod", "deployment": f"step-{i}", "count": 3}
               for t in range(40) for i in (1, 2, 3)]
    script.write_text(yaml.safe_dump(entries))
    res = invoke(runner, "simulate", "--out", str(out), "--faults", str(script))
    assert res.exit_code == 3
    assert "incomplete" in res.stderr


def test_simulate_input_errors(runner, tmp_path, fixtures):
    res = invoke(runner, "simulate", "--out", str(tmp_path / "empty"))
    assert res.exit_code == 2 and "translate" in res.stderr
    out = translated(runner, tmp_path, fixtures)
    bad = tmp_path / "f.yml"
    bad.write_text("- {tick: 1, action: Nuke, deployment: step-1}\n")
    assert invoke(runner, "simulate", "--out", str(out), "--faults", str(bad)).exit_code == 2
    assert invoke(runner, "simulate", "--out", str(out), "--faults", str(tmp_path / "missing.yml")).exit_code == 2


def test_graph_json_and_dot(runner, fixtures, tmp_path):
    res = invoke(runner, "graph", "--notebook", str(fixtures / "linear3.ipynb"))
    assert res.exit_code == 0
    data = json.loads(res.stdout)
    assert len(data["steps"]) == 3 and len(data["edges"]) == 2
    dot = invoke(runner, "graph", "--notebook", str(fixtures / "diamond.ipynb"), "--format", "dot")
    assert dot.stdout.startswith("digraph")
    empty = tmp_path / "empty.ipynb"
    empty.write_bytes(make_notebook())
    assert json.loads(invoke(runner, "graph", "--notebook", str(empty)).stdout) == {
        "steps": [], "edges": [], "unresolved": []
    }
    broken = tmp_path / "broken.ipynb"
    broken.write_text("{not json")
    assert invoke(runner, "graph", "--notebook", str(broken)).exit_code == 2


def test_console_entry_point(tmp_path, fixtures):
    proc = subprocess.run(
        [sys.executable, "-m", "j2k.cli", "graph", "--notebook", str(fixtures / "linear3.ipynb")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["edges"][0] == {"from": "step-1", "to": "step-2", "var": "a"}
