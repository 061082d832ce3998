import itertools
import json
import random

import pytest
from conftest import make_notebook
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import NotebookGen, notebook_json, oracle_edges

from j2k.dataflow import Edge, StepGraph, build_step_graph, topological_order
from j2k.dataflow.graph import Step
from j2k.errors import CycleDetected
from j2k.notebook import extract_markers, parse_notebook


def graph_of(*sources):
    return build_step_graph(extract_markers(parse_notebook(make_notebook(*sources))))


def edges(graph):
    return [(e.producer, e.consumer, e.var) for e in graph.edges]


def test_linear3(fixtures):
    graph = build_step_graph(parse_notebook((fixtures / "linear3.ipynb").read_bytes()))
    cells = [(None, "a = 1"), (None, "b = a + 1"), (None, "print(b)")]
    assert [s.id for s in graph.steps] == ["step-1", "step-2", "step-3"]
    assert edges(graph) == oracle_edges(cells) == [("step-1", "step-2", "a"), ("step-2", "step-3", "b")]
    assert [s.exports for s in graph.steps] == [["a"], ["b"], []]
    assert topological_order(graph) == ["step-1", "step-2", "step-3"]


def test_last_writer_wins():
    graph = graph_of("x = 1", "x = 2", "y = x")
    assert edges(graph) == oracle_edges([(None, "x = 1"), (None, "x = 2"), (None, "y = x")])
    assert edges(graph) == [("step-2", "step-3", "x")]
    assert graph.steps[0].exports == []


def test_empty_notebook():
    graph = graph_of()
    assert graph.steps == [] and graph.edges == []
    assert json.loads(graph.to_json()) == {"steps": [], "edges": [], "unresolved": []}


def test_unresolved_uses_recorded():
    graph = graph_of("y = x + 1", "z = y + w")
    assert [(u.step, u.var, u.cell) for u in graph.unresolved] == [("step-1", "x", 0), ("step-2", "w", 1)]


def test_marker_grouping_absorbs_following_cells():
    graph = graph_of("setup = 1", "# j2k: step Load\nraw = setup", "clean = raw", "# j2k: step train\nm = clean")
    assert [(s.id, s.cell_indices) for s in graph.steps] == [("step-1", [0]), ("load", [1, 2]), ("train", [3])]
    assert edges(graph) == [("step-1", "load", "setup"), ("load", "train", "clean")]
    assert graph.step("load").script == "raw = setup\nclean = raw\n"


def test_auto_name_collision_with_marker():
    graph = graph_of("# j2k: step step-2\na = 1", "b = a")
    assert [s.id for s in graph.steps] == ["step-2"]
    graph = graph_of("a = 1", "# j2k: step step-1\nb = a")
    assert len({s.id for s in graph.steps}) == 2


def test_inherited_imports():
    graph = graph_of("import pandas as pd", "df = pd.DataFrame()")
    assert graph.steps[1].inherited_imports == ["pandas"]
    assert graph.steps[0].imports == ["pandas"]


def test_diamond_order_matches_brute_force(fixtures):
    graph = build_step_graph(extract_markers(parse_notebook((fixtures / "diamond.ipynb").read_bytes())))
    assert sorted(edges(graph)) == sorted(
        [("load", "evens", "raw"), ("load", "odds", "raw"), ("evens", "report", "evens"), ("odds", "report", "odds")]
    )
    ids = [s.id for s in graph.steps]
    min_cell = {s.id: min(s.cell_indices) for s in graph.steps}
    valid = [
        order
        for order in itertools.permutations(ids)
        if all(order.index(p) < order.index(c) for p, c, _ in edges(graph))
    ]
    assert len(valid) == 2
    chosen = topological_order(graph)
    assert list(chosen) in [list(v) for v in valid]
    assert chosen.index("evens") < chosen.index("odds")
    assert min_cell["evens"] < min_cell["odds"]


def test_independent_steps_tiebreak():
    assert topological_order(graph_of("a = 1", "b = 2")) == ["step-1", "step-2"]


def test_cycle_detected_defensively():
    graph = StepGraph(steps=[Step("p", [0]), Step("q", [1])], edges=[Edge("p", "q", "x"), Edge("q", "p", "y")])
    with pytest.raises(CycleDetected):
        topological_order(graph)


def test_dot_output():
    dot = graph_of("a = 1", "b = a").to_dot()
    assert dot.startswith("digraph") and '"step-1" -> "step-2" [label="a"];' in dot


def test_oracle_equivalence_many_seeds():
    for seed in range(3):
        gen = NotebookGen(random.Random(1000 + seed))
        for _ in range(100):
            cells = gen.notebook()
            graph = build_step_graph(extract_markers(parse_notebook(notebook_json(cells))))
            assert sorted(edges(graph)) == sorted(oracle_edges(cells))


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_graph_invariants(seed):
    cells = NotebookGen(random.Random(seed)).notebook()
    raw = notebook_json(cells)
    graph = build_step_graph(extract_markers(parse_notebook(raw)))
    min_cell = {s.id: min(s.cell_indices) for s in graph.steps}
    by_id = {s.id: s for s in graph.steps}
    # partition of cells, contiguous and ascending
    covered = [i for s in graph.steps for i in s.cell_indices]
    assert covered == list(range(len(cells)))
    for s in graph.steps:
        assert s.cell_indices == list(range(s.cell_indices[0], s.cell_indices[-1] + 1))
        assert set(s.exports) <= set(s.defs)
    # forward edges, consistent endpoints, no duplicates
    triples = edges(graph)
    assert len(triples) == len(set(triples))
    for p, c, v in triples:
        assert min_cell[p] < min_cell[c]
        assert v in by_id[p].exports and v in by_id[c].uses
    order = topological_order(graph)
    assert sorted(order) == sorted(by_id)
    # determinism
    again = build_step_graph(extract_markers(parse_notebook(raw)))
    assert again.to_json() == graph.to_json()
