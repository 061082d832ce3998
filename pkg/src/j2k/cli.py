"""Command line: ``j2k translate``, ``j2k simulate``, ``j2k graph``."""

from __future__ import annotations

import json
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from j2k.capture import emit_build_contexts, write_build_contexts
from j2k.dataflow import DEFAULT_BUILTINS, StepGraph, build_step_graph
from j2k.environment import EnvironmentSpec, load_environment
from j2k.errors import InputError, J2KError, SimulationError
from j2k.manifests import ManifestBundle, StorageConfig, bundle, plan_pods
from j2k.notebook import extract_markers, parse_notebook
from j2k.sim import ClusterState, advance, apply_bundle, load_fault_script, summary

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_INCOMPLETE = 3


@dataclass
class RunConfig:
    notebook_path: Path | None = None
    env_spec_path: Path | None = None
    out_dir: Path = Path("out")
    storage_mode: str | None = None
    namespace: str = "default"
    hpa_enabled: bool = True
    seed: int = 0
    ticks: int = 40
    fault_script_path: Path | None = None


def diagnose(level: str, message: str, cell: int | None = None) -> None:
    suffix = f" (cell {cell})" if cell is not None else ""
    click.echo(f"{level}: {message}{suffix}", err=True)


def load_graph(notebook_path: Path, environment: EnvironmentSpec) -> StepGraph:
    try:
        raw = Path(notebook_path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read notebook {notebook_path}: {exc.strerror}") from None
    notebook = extract_markers(parse_notebook(raw))
    return build_step_graph(notebook, DEFAULT_BUILTINS | set(environment.builtin_extra))


def translate(config: RunConfig) -> StepGraph:
    environment = load_environment(config.env_spec_path)
    graph = load_graph(config.notebook_path, environment)
    manifests, contexts = emit_build_contexts(graph, environment)
    storage = StorageConfig.from_environment(environment, config.storage_mode)
    docs = bundle(graph, plan_pods(graph, environment), storage, environment, hpa=config.hpa_enabled)

    for unresolved in graph.unresolved:
        diagnose("warning", f"unresolved use of '{unresolved.var}' in step {unresolved.step}", unresolved.cell)
    for step, manifest in zip(graph.steps, manifests):
        for module in manifest.unmapped_imports:
            diagnose("warning", f"import '{module}' in step {step.id} has no package mapping", step.cell_indices[0])
    for cell, count in graph.lossy:
        diagnose("warning", f"{count} line(s) analysed conservatively", cell)

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for sub in ("build", "manifests"):
        shutil.rmtree(out / sub, ignore_errors=True)
    write_build_contexts(contexts, out / "build")
    docs.write(out / "manifests")
    (out / "graph.json").write_text(graph.to_json(), encoding="utf-8")
    return graph


def simulate(config: RunConfig) -> dict:
    out = Path(config.out_dir)
    path = out / "manifests" / "all.yaml"
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read manifests {path}: {exc.strerror}; run 'j2k translate' first") from None
    try:
        docs = ManifestBundle.from_yaml(text)
    except Exception as exc:
        raise InputError(f"manifests {path} are not a valid bundle: {exc}") from None
    faults = load_fault_script(config.fault_script_path) if config.fault_script_path else []

    state = ClusterState(namespace=config.namespace, rng_seed=config.seed)
    apply_bundle(state, docs)
    advance(state, config.ticks, faults)
    result = summary(state)
    (out / "events.jsonl").write_text(state.events_jsonl(), encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result


def _run(action, *args) -> int:
    try:
        action(*args)
    except InputError as exc:
        diagnose("error", str(exc), exc.cell)
        return EXIT_INPUT
    except SimulationError as exc:
        diagnose("error", f"{type(exc).__name__}: {exc}")
        return EXIT_INPUT
    except J2KError as exc:
        diagnose("error", f"internal: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL
    return EXIT_OK


notebook_option = click.option(
    "--notebook", "notebook_path", required=True, type=click.Path(path_type=Path), help="Input .ipynb file."
)
env_option = click.option(
    "--env-spec", "env_spec_path", type=click.Path(path_type=Path), default=None, help="Environment spec (YAML)."
)
out_option = click.option(
    "--out", "out_dir", envvar="J2K_OUT", type=click.Path(path_type=Path), default=Path("out"),
    show_default=True, help="Output directory (env: J2K_OUT).",
)


@click.group()
def main() -> None:
    """Turn a notebook into containerised pipeline steps and simulate them."""


@main.command("translate")
@notebook_option
@env_option
@out_option
@click.option("--storage", "storage_mode", type=click.Choice(["local", "cloud"]), default=None,
              help="Storage flavour (default: from env spec, else local).")
@click.option("--namespace", default="default", show_default=True)
@click.option("--hpa/--no-hpa", "hpa_enabled", default=True, show_default=True)
def translate_cmd(**kwargs) -> None:
    """Write build contexts, manifests and graph.json."""
    config = RunConfig(**kwargs)
    sys.exit(_run(translate, config))


@main.command("simulate")
@out_option
@click.option("--namespace", default="default", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--ticks", default=40, show_default=True, type=click.IntRange(min=0))
@click.option("--faults", "fault_script_path", type=click.Path(path_type=Path), default=None,
              help="Fault script (YAML list).")
def simulate_cmd(**kwargs) -> None:
    """Run the emitted bundle on the simulated cluster."""
    config = RunConfig(**kwargs)
    result: dict = {}

    def run(cfg):
        result.update(simulate(cfg))

    code = _run(run, config)
    if code != EXIT_OK:
        sys.exit(code)
    click.echo(
        f"steps completed: {result['steps_completed']}/{result['steps_total']}, "
        f"liveness restarts: {result['liveness_restarts']}, "
        f"replacements: {result['pod_replacements']}, "
        f"scale events: {result['scale_events']}"
    )
    if result["incomplete"]:
        diagnose("error", f"workflow incomplete after {config.ticks} ticks: {', '.join(result['incomplete'])}")
        sys.exit(EXIT_INCOMPLETE)
    sys.exit(EXIT_OK)


@main.command("graph")
@notebook_option
@env_option
@click.option("--format", "fmt", type=click.Choice(["json", "dot"]), default="json", show_default=True)
def graph_cmd(notebook_path: Path, env_spec_path: Path | None, fmt: str) -> None:
    """Print the step graph."""
    graph: list[StepGraph] = []

    def run():
        graph.append(load_graph(notebook_path, load_environment(env_spec_path)))

    code = _run(run)
    if code != EXIT_OK:
        sys.exit(code)
    click.echo(graph[0].to_dot() if fmt == "dot" else graph[0].to_json(), nl=False)


if __name__ == "__main__":
    main()
