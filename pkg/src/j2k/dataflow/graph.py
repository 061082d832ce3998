"""Grouping cells into steps and wiring them into a dependency DAG."""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

from j2k.dataflow.defuse import DEFAULT_BUILTINS, DefUseSet, extract_def_use
from j2k.errors import CycleDetected
from j2k.notebook import Cell, Notebook


@dataclass
class Step:
    id: str
    cell_indices: list[int]
    defs: list[str] = field(default_factory=list)
    uses: list[str] = field(default_factory=list)
    imports: list[str] = field(default_factory=list)
    exports: list[str] = field(default_factory=list)
    script: str = ""
    # (producer step, variable) for each inbound edge
    inputs: list[tuple[str, str]] = field(default_factory=list)
    consumers: list[str] = field(default_factory=list)
    # modules bound to variables this step receives from upstream imports
    inherited_imports: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class Edge:
    producer: str
    consumer: str
    var: str


@dataclass(frozen=True)
class Unresolved:
    step: str
    var: str
    cell: int


@dataclass
class StepGraph:
    steps: list[Step] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    unresolved: list[Unresolved] = field(default_factory=list)
    # (cell index, number of lines analysed conservatively)
    lossy: list[tuple[int, int]] = field(default_factory=list)

    def step(self, step_id: str) -> Step:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise KeyError(step_id)

    def to_dict(self) -> dict:
        return {
            "steps": [
                {"id": s.id, "cells": s.cell_indices, "defs": s.defs, "uses": s.uses, "exports": s.exports}
                for s in self.steps
            ],
            "edges": [{"from": e.producer, "to": e.consumer, "var": e.var} for e in self.edges],
            "unresolved": [{"step": u.step, "var": u.var, "cell": u.cell} for u in self.unresolved],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_dot(self) -> str:
        lines = ["digraph steps {", "  rankdir=LR;"]
        for s in self.steps:
            cells = ",".join(str(i) for i in s.cell_indices)
            lines.append(f'  "{s.id}" [shape=box, label="{s.id}\\ncells {cells}"];')
        for e in self.edges:
            lines.append(f'  "{e.producer}" -> "{e.consumer}" [label="{e.var}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _unique(items) -> list:
    return list(dict.fromkeys(items))


def _group_cells(cells: tuple[Cell, ...]) -> list[tuple[str | None, list[Cell]]]:
    groups: list[tuple[str | None, list[Cell]]] = []
    for cell in cells:
        if cell.marker:
            groups.append((cell.marker, [cell]))
        elif groups and groups[-1][0] is not None:
            groups[-1][1].append(cell)
        else:
            groups.append((None, [cell]))
    return groups


def _name_groups(groups: list[tuple[str | None, list[Cell]]]) -> list[str]:
    taken = {name for name, _ in groups if name}
    names = []
    for k, (name, _) in enumerate(groups, start=1):
        if name:
            names.append(name)
            continue
        base = candidate = f"step-{k}"
        n = 2
        while candidate in taken:
            candidate = f"{base}-{n}"
            n += 1
        taken.add(candidate)
        names.append(candidate)
    return names


def _script(cells: list[Cell]) -> str:
    return "".join(c.source if c.source.endswith("\n") or not c.source else c.source + "\n" for c in cells)


def build_step_graph(notebook: Notebook, builtins: frozenset[str] | set[str] = DEFAULT_BUILTINS) -> StepGraph:
    """Group cells into steps and connect them by last-writer-wins dataflow.

    A use only produces an edge when it is read before being defined
    inside its own step; everything else is satisfied locally.
    """
    graph = StepGraph()
    groups = _group_cells(notebook.cells)
    names = _name_groups(groups)

    analyses: dict[int, DefUseSet] = {}
    for cell in notebook.cells:
        analyses[cell.index] = du = extract_def_use(cell.source, builtins)
        if du.lossy_lines:
            graph.lossy.append((cell.index, du.lossy_lines))

    exposed: dict[str, list[tuple[str, int]]] = {}
    aliases: dict[str, dict[str, str]] = {}
    for name, (_, cells) in zip(names, groups):
        defs: list[str] = []
        uses: list[str] = []
        imports: list[str] = []
        step_aliases: dict[str, str] = {}
        step_exposed: list[tuple[str, int]] = []
        defined: set[str] = set()
        seen: set[str] = set()
        for cell in cells:
            du = analyses[cell.index]
            for v in du.exposed:
                if v not in defined and v not in seen:
                    seen.add(v)
                    step_exposed.append((v, cell.index))
            defined.update(du.definite)
            defs.extend(du.defs)
            uses.extend(du.uses)
            imports.extend(du.imports)
            step_aliases.update(du.aliases)
        graph.steps.append(
            Step(
                id=name,
                cell_indices=[c.index for c in cells],
                defs=_unique(defs),
                uses=_unique(uses),
                imports=_unique(imports),
                script=_script(cells),
            )
        )
        exposed[name] = step_exposed
        aliases[name] = step_aliases

    last_writer: dict[str, str] = {}
    for step in graph.steps:
        for var, cell in exposed[step.id]:
            producer = last_writer.get(var)
            if producer is None:
                graph.unresolved.append(Unresolved(step.id, var, cell))
                continue
            graph.edges.append(Edge(producer, step.id, var))
            step.inputs.append((producer, var))
            module = aliases[producer].get(var)
            if module is not None:
                top = module.split(".")[0]
                if top not in step.inherited_imports:
                    step.inherited_imports.append(top)
        for var in step.defs:
            last_writer[var] = step.id

    for step in graph.steps:
        out_vars = {e.var for e in graph.edges if e.producer == step.id}
        step.exports = [v for v in step.defs if v in out_vars]
        step.consumers = _unique(e.consumer for e in graph.edges if e.producer == step.id)
    return graph


def topological_order(graph: StepGraph) -> list[str]:
    """Kahn's algorithm; ties go to the step with the smallest first cell index."""
    key = {s.id: (min(s.cell_indices) if s.cell_indices else -1, i) for i, s in enumerate(graph.steps)}
    indegree = {s.id: 0 for s in graph.steps}
    succ: dict[str, set[str]] = {s.id: set() for s in graph.steps}
    for e in graph.edges:
        if e.consumer not in succ[e.producer]:
            succ[e.producer].add(e.consumer)
            indegree[e.consumer] += 1
    ready = [(key[sid], sid) for sid, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        _, sid = heapq.heappop(ready)
        order.append(sid)
        for nxt in succ[sid]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, (key[nxt], nxt))
    if len(order) != len(graph.steps):
        raise CycleDetected("step graph contains a cycle")
    return order
