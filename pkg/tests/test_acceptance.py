"""Acceptance gate. One test per criterion; the terminal summary prints PASS/FAIL per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import filecmp
import random
import time
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner
from oracles import NotebookGen, notebook_json, oracle_edges
from simtools import Replay, bundle_for, cluster_for

from j2k.cli import main
from j2k.dataflow import build_step_graph
from j2k.manifests import PodPlan, load_yaml, render_deployment
from j2k.notebook import extract_markers, parse_notebook
from j2k.sim import ClusterState, Fault, KillPod, SetCpu, TriggerRollingUpdate, advance, apply_bundle, summary
from j2k.sim.cluster import VolumeSpec, bind_claims
from j2k.sim.quantity import parse_quantity

FIXTURES = Path(__file__).parent / "fixtures"
LINEAR3 = FIXTURES / "linear3.ipynb"


class Budget:
    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f}s, budget {self.seconds}s"


def test_criterion_1_listing_fidelity():
    with Budget(1.0):
        doc = yaml.safe_load(render_deployment(PodPlan("step1", "j2k-step1", tag="latest")))
        spec = doc["spec"]
        container = spec["template"]["spec"]["containers"][0]
        assert spec["replicas"] == 3
        assert spec["strategy"]["type"] == "RollingUpdate"
        assert spec["strategy"]["rollingUpdate"] == {"maxUnavailable": 1, "maxSurge": 1}
        assert spec["selector"]["matchLabels"] == {"app": "step1"}
        assert spec["template"]["metadata"]["labels"] == {"app": "step1"}
        assert container["name"] == "step1-container"
        assert container["image"] == "j2k-step1:latest"
        assert container["resources"]["limits"] == {"cpu": "1", "memory": "1Gi"}
        assert container["resources"]["requests"] == {"cpu": "500m", "memory": "500Mi"}
        assert container["livenessProbe"]["httpGet"] == {"path": "/healthz", "port": 8080}
        assert container["readinessProbe"]["httpGet"] == {"path": "/readiness", "port": 8080}
        assert container["volumeMounts"] == [{"name": "efs-volume", "mountPath": "/mnt/efs"}]
        volume = spec["template"]["spec"]["volumes"][0]
        assert volume["persistentVolumeClaim"]["claimName"] == "step1-efs-pvc"
        assert container["env"][0] == {"name": "KAFKA_BROKER", "value": "my-broker-address"}


def test_criterion_2_dataflow_oracle_equivalence():
    with Budget(5.0):
        gen = NotebookGen(random.Random(20240601))
        checked = 0
        for _ in range(200):
            cells = gen.notebook(max_cells=10)
            graph = build_step_graph(extract_markers(parse_notebook(notebook_json(cells))))
            mine = sorted((e.producer, e.consumer, e.var) for e in graph.edges)
            assert mine == sorted(oracle_edges(cells)), cells
            checked += 1
        assert checked == 200


def test_criterion_3_fault_tolerance(tmp_path):
    with Budget(1.0):
        runner = CliRunner()
        out = tmp_path / "out"
        assert runner.invoke(main, ["translate", "--notebook", str(LINEAR3), "--out", str(out)]).exit_code == 0
        script = tmp_path / "faults.yml"
        script.write_text(yaml.safe_dump(
            [{"tick": 3, "action": "KillPod", "deployment": f"step-{i}", "count": 2} for i in (1, 2, 3)]
        ))
        logs = []
        for _ in range(2):
            res = runner.invoke(main, ["simulate", "--out", str(out), "--ticks", "40", "--seed", "0",
                                       "--faults", str(script)])
            assert res.exit_code == 0, res.output
            logs.append((out / "events.jsonl").read_bytes())
        assert logs[0] == logs[1]
        state = ClusterState(rng_seed=0)
        apply_bundle(state, bundle_for(build_step_graph(parse_notebook(LINEAR3.read_bytes()))))
        advance(state, 40, [Fault(3, KillPod(f"step-{i}", 2)) for i in (1, 2, 3)])
        assert state.events_jsonl().encode() == logs[0]
        for name in state.deployments:
            killed = [e for e in state.events if e.kind == "PodKilled" and e.deployment == name]
            replaced = [e for e in state.events if e.kind == "PodReplaced" and e.deployment == name]
            assert len(killed) == 2
            assert len(replaced) >= 1
        assert summary(state)["steps_completed"] == 3


def test_criterion_4_rolling_update_safety():
    with Budget(1.0):
        state = cluster_for()
        names = sorted(state.deployments)
        start = 12
        faults = [Fault(start, TriggerRollingUpdate(name, "v2")) for name in names]
        advance(state, 40, faults)
        replay = Replay()
        observed = 0
        for tick, view in replay.ticks(state.events):
            if tick < start:
                continue
            for name in names:
                dep = state.deployments[name]
                assert len(view.pods[name]) <= dep.desired_replicas + 1 == 4, (tick, name)
                assert dep.desired_replicas - len(view.ready[name]) <= 1, (tick, name)
                observed += 1
        completed = {e.deployment for e in state.events if e.kind == "RollingUpdateCompleted"}
        assert completed == set(names)
        assert observed > 0
        # also check every intermediate event, not just tick boundaries
        replay = Replay()
        for event in state.events:
            replay.apply(event)
            if event.tick >= start and event.deployment in names:
                assert len(replay.pods[event.deployment]) <= 4


def test_criterion_5_hpa_bounds():
    with Budget(1.0):
        state = cluster_for()
        faults = [Fault(1, SetCpu(name, 100)) for name in sorted(state.deployments)]
        faults += [Fault(60, SetCpu(name, 10)) for name in sorted(state.deployments)]
        history = {name: [3] for name in state.deployments}
        for _ in range(140):
            advance(state, 1, faults)
            for name, dep in state.deployments.items():
                assert 3 <= dep.desired_replicas <= 10
                history[name].append(dep.desired_replicas)
        evaluations = [e for e in state.events if e.kind == "HpaEvaluated"]
        assert evaluations
        for e in evaluations:
            assert abs(e.detail["after"] - e.detail["before"]) <= 1
            assert 3 <= e.detail["after"] <= 10
        for name, values in history.items():
            steps = [b - a for a, b in zip(values, values[1:])]
            assert all(abs(s) <= 1 for s in steps)
            assert max(values) == 10 and values[-1] == 3


def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_6_determinism(tmp_path):
    with Budget(2.0):
        runner = CliRunner()
        trees = []
        for name in ("a", "b"):
            out = tmp_path / name
            res = runner.invoke(main, ["translate", "--notebook", str(LINEAR3), "--out", str(out)])
            assert res.exit_code == 0
            trees.append(_tree(out))
        assert trees[0] == trees[1] and trees[0]
        script = tmp_path / "faults.yml"
        script.write_text(yaml.safe_dump([
            {"tick": 2, "action": "KillPod", "deployment": "step-1", "count": 2},
            {"tick": 4, "action": "FailLiveness", "deployment": "step-2", "pod_ordinal": 1, "duration_ticks": 4},
            {"tick": 6, "action": "SetCpu", "deployment": "step-3", "percent": 90},
            {"tick": 15, "action": "TriggerRollingUpdate", "deployment": "step-1", "new_tag": "v2"},
        ]))
        for name in ("a", "b"):
            res = runner.invoke(main, ["simulate", "--out", str(tmp_path / name), "--seed", "7",
                                       "--faults", str(script)])
            assert res.exit_code == 0, res.output
        assert filecmp.cmp(tmp_path / "a" / "events.jsonl", tmp_path / "b" / "events.jsonl", shallow=False)
        assert (tmp_path / "a" / "events.jsonl").read_bytes() == (tmp_path / "b" / "events.jsonl").read_bytes()


def test_criterion_7_bundle_closure():
    with Budget(2.0):
        gen = NotebookGen(random.Random(77))
        graphs = 0
        while graphs < 50:
            cells = gen.notebook(max_cells=8)
            if not cells:
                continue
            graph = build_step_graph(extract_markers(parse_notebook(notebook_json(cells))))
            storage = "local" if graphs % 2 == 0 else "cloud"
            docs = [load_yaml(d.yaml_text) for d in bundle_for(graph, storage=storage).documents]
            by_kind: dict[str, list[dict]] = {}
            for doc in docs:
                by_kind.setdefault(doc["kind"], []).append(doc)
            pvc_names = {d["metadata"]["name"] for d in by_kind["PersistentVolumeClaim"]}
            for dep in by_kind["Deployment"]:
                for volume in dep["spec"]["template"]["spec"]["volumes"]:
                    assert volume["persistentVolumeClaim"]["claimName"] in pvc_names
            pvs = [
                VolumeSpec(d["metadata"]["name"], parse_quantity(d["spec"]["capacity"]["storage"]),
                           tuple(d["spec"]["accessModes"]), d["spec"]["storageClassName"])
                for d in by_kind["PersistentVolume"]
            ]
            claims = [
                VolumeSpec(d["metadata"]["name"], parse_quantity(d["spec"]["resources"]["requests"]["storage"]),
                           tuple(d["spec"]["accessModes"]), d["spec"]["storageClassName"])
                for d in by_kind["PersistentVolumeClaim"]
            ]
            bound = bind_claims(pvs, claims)
            assert set(bound) == pvc_names and len(set(bound.values())) == len(pvs)
            for svc in by_kind["Service"]:
                selector = svc["spec"]["selector"].items()
                matches = [
                    d for d in by_kind["Deployment"]
                    if selector <= d["spec"]["template"]["metadata"]["labels"].items()
                ]
                assert len(matches) == 1
            graphs += 1


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
