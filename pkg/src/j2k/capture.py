"""Per-step dependency manifests and container build contexts."""

from __future__ import annotations

import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from j2k.dataflow.graph import Step, StepGraph
from j2k.dataflow.scanner import STRING, scan
from j2k.environment import DEFAULT_INSTALL_COMMAND, EnvironmentSpec
from j2k.errors import DuplicateStepId
from j2k.runner_template import render_runner

log = logging.getLogger(__name__)

UNPINNED = "unpinned"
REQUIRED_FILES = ("Dockerfile", "step.src", "manifest.yml", "runner.src")
_FILE_LITERAL_RE = re.compile(r"^[\w./\\~-]*[\w-]\.[A-Za-z][A-Za-z0-9]{0,7}$")
_STDLIB = frozenset(sys.stdlib_module_names)


@dataclass(frozen=True)
class Package:
    name: str
    version: str = UNPINNED

    @property
    def requirement(self) -> str:
        return self.name if self.version == UNPINNED else f"{self.name}=={self.version}"


@dataclass(frozen=True)
class EnvVar:
    name: str
    value: str


@dataclass
class DependencyManifest:
    step_id: str
    packages: list[Package] = field(default_factory=list)
    input_files: list[str] = field(default_factory=list)
    env_vars: list[EnvVar] = field(default_factory=list)
    unmapped_imports: list[str] = field(default_factory=list)
    stdlib_imports: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "step_id": self.step_id,
            "packages": [{"name": p.name, "version": p.version} for p in self.packages],
            "input_files": list(self.input_files),
            "env_vars": [{"name": e.name, "value": e.value} for e in self.env_vars],
            "unmapped_imports": list(self.unmapped_imports),
            "stdlib_imports": list(self.stdlib_imports),
        }

    @classmethod
    def from_dict(cls, data: dict) -> DependencyManifest:
        return cls(
            step_id=data["step_id"],
            packages=[Package(p["name"], p["version"]) for p in data.get("packages", [])],
            input_files=list(data.get("input_files", [])),
            env_vars=[EnvVar(e["name"], e["value"]) for e in data.get("env_vars", [])],
            unmapped_imports=list(data.get("unmapped_imports", [])),
            stdlib_imports=list(data.get("stdlib_imports", [])),
        )

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    @classmethod
    def from_yaml(cls, text: str) -> DependencyManifest:
        return cls.from_dict(yaml.safe_load(text))


@dataclass
class BuildContext:
    step_id: str
    files: dict[str, bytes]


def detect_input_files(script: str) -> list[str]:
    """String literals that look like file paths (end in a dotted extension)."""
    found: list[str] = []
    for line in scan(script):
        for tok in line.tokens:
            if tok.kind == STRING and not tok.exprs and _FILE_LITERAL_RE.match(tok.text) and tok.text not in found:
                found.append(tok.text)
    return found


def capture_dependencies(step: Step, environment: EnvironmentSpec) -> DependencyManifest:
    """Map a step's imports to packages through the environment's mapping and pins.

    Modules the step receives from upstream imports count as its own.
    Standard-library modules need no package.
    """
    packages: dict[str, Package] = {}
    unmapped: list[str] = []
    stdlib: list[str] = []
    for module in dict.fromkeys([*step.imports, *step.inherited_imports]):
        if module in environment.package_map:
            name = environment.package_map[module]
            packages[name] = Package(name, environment.pins.get(name, UNPINNED))
        elif module in _STDLIB:
            stdlib.append(module)
        else:
            unmapped.append(module)
            log.debug("unmapped import %r in step %s", module, step.id)
    return DependencyManifest(
        step_id=step.id,
        packages=[packages[name] for name in sorted(packages)],
        input_files=detect_input_files(step.script),
        env_vars=[EnvVar(k, v) for k, v in environment.env.items()],
        unmapped_imports=unmapped,
        stdlib_imports=stdlib,
    )


def topic_name(producer: str, consumer: str) -> str:
    return f"{producer}-to-{consumer}"


def render_dockerfile(manifest: DependencyManifest, environment: EnvironmentSpec) -> str:
    requirements = " ".join(p.requirement for p in manifest.packages)
    command = environment.install_command
    if "{requirements}" in command:
        if requirements:
            command = command.replace("{requirements}", requirements)
        elif command == DEFAULT_INSTALL_COMMAND:
            command = "true"
        else:
            command = command.replace("{requirements}", "").strip()
    return (
        f"FROM {environment.base_image}\n"
        "COPY manifest.yml step.src runner.src /app/\n"
        "WORKDIR /app\n"
        f"RUN {command}\n"
        "EXPOSE 8080\n"
        f'CMD ["{environment.runtime}", "runner.src"]\n'
    )


def emit_build_context(
    step: Step, manifest: DependencyManifest, environment: EnvironmentSpec | None = None
) -> BuildContext:
    if manifest.step_id != step.id:
        raise ValueError(f"manifest for {manifest.step_id!r} does not belong to step {step.id!r}")
    environment = environment or EnvironmentSpec()
    topics = [topic_name(step.id, consumer) for consumer in step.consumers]
    files = {
        "Dockerfile": render_dockerfile(manifest, environment).encode(),
        "step.src": step.script.encode(),
        "manifest.yml": manifest.to_yaml().encode(),
        "runner.src": render_runner(step.id, step.inputs, step.exports, topics).encode(),
    }
    return BuildContext(step_id=step.id, files=files)


def emit_build_contexts(
    graph: StepGraph, environment: EnvironmentSpec
) -> tuple[list[DependencyManifest], list[BuildContext]]:
    seen: set[str] = set()
    manifests: list[DependencyManifest] = []
    contexts: list[BuildContext] = []
    for step in graph.steps:
        if step.id in seen:
            raise DuplicateStepId(f"two steps share the id {step.id!r}", cell=step.cell_indices[0])
        seen.add(step.id)
        manifest = capture_dependencies(step, environment)
        manifests.append(manifest)
        contexts.append(emit_build_context(step, manifest, environment))
    return manifests, contexts


def write_build_contexts(contexts: list[BuildContext], build_dir: Path) -> None:
    for ctx in contexts:
        target = build_dir / ctx.step_id
        target.mkdir(parents=True, exist_ok=True)
        for name in sorted(ctx.files):
            (target / name).write_bytes(ctx.files[name])
