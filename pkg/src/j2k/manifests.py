"""Pod planning and Kubernetes manifest rendering."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from j2k.capture import EnvVar, topic_name
from j2k.dataflow.graph import StepGraph
from j2k.environment import DEFAULT_BROKER, EnvironmentSpec
from j2k.errors import InvalidBounds, InvalidName, MissingField

DNS_LABEL_RE = re.compile(r"^[a-z0-9]([-a-z0-9]*[a-z0-9])?$")
TOPIC_RE = re.compile(r"^[a-z0-9-]+-to-[a-z0-9-]+$")

# libyaml when available; manifests are parsed back by the simulator
_Loader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)

HPA_DEFAULTS = {"min_replicas": 3, "max_replicas": 10, "cpu_target_percent": 50}

# Placeholders: {pod_name} {image_name} {tag} {broker} {env_content}
DEPLOYMENT_TEMPLATE = """\
apiVersion: apps/v1
kind: Deployment
metadata:
  name: {pod_name}-deployment
spec:
  replicas: 3
  strategy:
    type: RollingUpdate
    rollingUpdate:
      maxUnavailable: 1
      maxSurge: 1
  selector:
    matchLabels:
      app: {pod_name}
  template:
    metadata:
      labels:
        app: {pod_name}
    spec:
      containers:
      - name: {pod_name}-container
        image: {image_name}:{tag}
        env:
        - name: KAFKA_BROKER
          value: {broker}
        {env_content}
        resources:
          limits:
            cpu: "1"
            memory: "1Gi"
          requests:
            cpu: "500m"
            memory: "500Mi"
        livenessProbe:
          httpGet:
            path: /healthz
            port: 8080
        readinessProbe:
          httpGet:
            path: /readiness
            port: 8080
        volumeMounts:
        - name: efs-volume
          mountPath: /mnt/efs
      volumes:
      - name: efs-volume
        persistentVolumeClaim:
          claimName: {pod_name}-efs-pvc
"""

SERVICE_TEMPLATE = """\
apiVersion: v1
kind: Service
metadata:
  name: {pod_name}-svc
spec:
  type: ClusterIP
  selector:
    app: {pod_name}
  ports:
  - port: 80
    targetPort: 8080
"""

LOCAL_PV_TEMPLATE = """\
apiVersion: v1
kind: PersistentVolume
metadata:
  name: {pod_name}-efs-pv
spec:
  capacity:
    storage: {capacity}
  volumeMode: Filesystem
  accessModes:
  - ReadWriteOnce
  persistentVolumeReclaimPolicy: Retain
  storageClassName: {storage_class}
  local:
    path: {local_path}
  nodeAffinity:
    required:
      nodeSelectorTerms:
      - matchExpressions:
        - key: kubernetes.io/hostname
          operator: In
          values:
          - {node_name}
"""

CLOUD_PV_TEMPLATE = """\
apiVersion: v1
kind: PersistentVolume
metadata:
  name: {pod_name}-efs-pv
spec:
  capacity:
    storage: {capacity}
  volumeMode: Filesystem
  accessModes:
  - ReadWriteMany
  persistentVolumeReclaimPolicy: Retain
  storageClassName: {storage_class}
  csi:
    driver: efs.csi.aws.com
    volumeHandle: {efs_handle}
"""

PVC_TEMPLATE = """\
apiVersion: v1
kind: PersistentVolumeClaim
metadata:
  name: {pod_name}-efs-pvc
spec:
  accessModes:
  - {access_mode}
  storageClassName: {storage_class}
  resources:
    requests:
      storage: {capacity}
"""

HPA_TEMPLATE = """\
apiVersion: autoscaling/v2
kind: HorizontalPodAutoscaler
metadata:
  name: {pod_name}-hpa
spec:
  scaleTargetRef:
    apiVersion: apps/v1
    kind: Deployment
    name: {pod_name}-deployment
  minReplicas: {min_replicas}
  maxReplicas: {max_replicas}
  metrics:
  - type: Resource
    resource:
      name: cpu
      target:
        type: Utilization
        averageUtilization: {cpu_target_percent}
"""

STORAGE_CLASSES = {"local": "j2k-local", "cloud": "efs-sc"}
ACCESS_MODES = {"local": "ReadWriteOnce", "cloud": "ReadWriteMany"}


@dataclass
class PodPlan:
    pod_name: str
    image_name: str
    tag: str = "latest"
    role: str = "isolated"
    produce_topics: list[str] = field(default_factory=list)
    consume_topics: list[str] = field(default_factory=list)
    env: list[EnvVar] = field(default_factory=list)
    broker: str = DEFAULT_BROKER


@dataclass
class StorageConfig:
    mode: str = "local"
    node_name: str = ""
    capacity: str = "5Gi"
    local_path: str = ""
    efs_handle: str = ""

    def validate(self) -> None:
        if self.mode not in ("local", "cloud"):
            raise MissingField(f"storage mode must be 'local' or 'cloud', got {self.mode!r}")
        if not self.capacity:
            raise MissingField("storage capacity is required")
        if self.mode == "local":
            if not self.node_name:
                raise MissingField("local storage requires node_name")
            if not self.local_path:
                raise MissingField("local storage requires local_path")
        elif not self.efs_handle:
            raise MissingField("cloud storage requires efs_handle")

    @classmethod
    def from_environment(cls, environment: EnvironmentSpec, mode: str | None = None) -> StorageConfig:
        opts = environment.storage_options
        mode = mode or environment.storage
        if mode == "local":
            return cls(
                mode="local",
                node_name=opts.get("node_name", "worker-1"),
                capacity=opts.get("capacity", "5Gi"),
                local_path=opts.get("local_path", "/data/j2k"),
            )
        return cls(mode=mode, capacity=opts.get("capacity", "5Gi"), efs_handle=opts.get("efs_handle", ""))


@dataclass(frozen=True)
class ManifestDocument:
    kind: str
    name: str
    yaml_text: str


@dataclass
class ManifestBundle:
    documents: list[ManifestDocument] = field(default_factory=list)

    def to_yaml(self) -> str:
        return "---\n".join(doc.yaml_text for doc in self.documents)

    @classmethod
    def from_yaml(cls, text: str) -> ManifestBundle:
        documents = []
        for chunk in re.split(r"(?m)^---[ \t]*\n", text):
            if not chunk.strip():
                continue
            data = load_yaml(chunk)
            if not isinstance(data, dict) or "kind" not in data:
                raise ValueError("manifest document without a kind")
            documents.append(ManifestDocument(data["kind"], data.get("metadata", {}).get("name", ""), chunk))
        return cls(documents)

    def file_names(self) -> list[str]:
        width = max(2, len(str(len(self.documents) - 1)))
        return [f"{i:0{width}d}-{doc.kind.lower()}-{doc.name}.yaml" for i, doc in enumerate(self.documents)]

    def write(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        for name, doc in zip(self.file_names(), self.documents):
            (directory / name).write_text(doc.yaml_text, encoding="utf-8")
        (directory / "all.yaml").write_text(self.to_yaml(), encoding="utf-8")


def load_yaml(text: str):
    return yaml.load(text, Loader=_Loader)


def validate_name(name: str) -> str:
    if len(name) > 63 or not DNS_LABEL_RE.match(name):
        raise InvalidName(f"{name!r} is not a valid DNS label (lowercase alphanumerics and '-', at most 63 chars)")
    return name


def _validate_pod(pod_name: str, *suffixes: str) -> None:
    validate_name(pod_name)
    for suffix in suffixes:
        validate_name(pod_name + suffix)


def _fill(template: str, **values) -> str:
    for key, value in values.items():
        template = template.replace("{" + key + "}", str(value))
    return template


def _quote(value: str) -> str:
    return json.dumps(value)


def _scalar(value: str) -> str:
    return value if re.fullmatch(r"[A-Za-z0-9_./-]+", value) else _quote(value)


def _role(produce: list[str], consume: list[str]) -> str:
    if produce and consume:
        return "both"
    if produce:
        return "producer"
    if consume:
        return "consumer"
    return "isolated"


def plan_pods(graph: StepGraph, environment: EnvironmentSpec | None = None) -> list[PodPlan]:
    """One plan per step; one topic per connected (producer, consumer) pair."""
    environment = environment or EnvironmentSpec()
    plans = []
    for step in graph.steps:
        produce = [topic_name(step.id, consumer) for consumer in step.consumers]
        producers = list(dict.fromkeys(producer for producer, _ in step.inputs))
        consume = [topic_name(producer, step.id) for producer in producers]
        env = [
            EnvVar("J2K_STEP_ID", step.id),
            EnvVar("J2K_PRODUCE_TOPICS", ",".join(produce)),
            EnvVar("J2K_CONSUME_TOPICS", ",".join(consume)),
            EnvVar("J2K_INPUTS", ",".join(f"{p}/{v}" for p, v in step.inputs)),
            EnvVar("J2K_EXPORTS", ",".join(step.exports)),
        ]
        env.extend(EnvVar(k, v) for k, v in environment.env.items())
        plans.append(
            PodPlan(
                pod_name=step.id,
                image_name=f"j2k-{step.id}",
                tag=environment.tag,
                role=_role(produce, consume),
                produce_topics=produce,
                consume_topics=consume,
                env=env,
                broker=environment.broker,
            )
        )
    return plans


def render_deployment(plan: PodPlan) -> str:
    _validate_pod(plan.pod_name, "-deployment", "-container", "-efs-pvc")
    indent = " " * 8
    env_lines = []
    for var in plan.env:
        env_lines.append(f"- name: {var.name}")
        env_lines.append(f"  value: {_quote(var.value)}")
    text = _fill(
        DEPLOYMENT_TEMPLATE,
        pod_name=plan.pod_name,
        image_name=plan.image_name,
        tag=plan.tag,
        broker=_quote(plan.broker),
    )
    if env_lines:
        return text.replace("{env_content}", ("\n" + indent).join(env_lines), 1)
    return text.replace(indent + "{env_content}\n", "", 1)


def render_service(plan: PodPlan) -> str:
    _validate_pod(plan.pod_name, "-svc")
    return _fill(SERVICE_TEMPLATE, pod_name=plan.pod_name)


def render_storage(plan: PodPlan, storage: StorageConfig) -> list[str]:
    """PersistentVolume and matching claim for one pod, in that order."""
    storage.validate()
    _validate_pod(plan.pod_name, "-efs-pv", "-efs-pvc")
    common = {
        "pod_name": plan.pod_name,
        "capacity": _scalar(storage.capacity),
        "storage_class": STORAGE_CLASSES[storage.mode],
        "access_mode": ACCESS_MODES[storage.mode],
    }
    if storage.mode == "local":
        pv = _fill(
            LOCAL_PV_TEMPLATE,
            local_path=_scalar(storage.local_path),
            node_name=_scalar(storage.node_name),
            **common,
        )
    else:
        pv = _fill(CLOUD_PV_TEMPLATE, efs_handle=_scalar(storage.efs_handle), **common)
    return [pv, _fill(PVC_TEMPLATE, **common)]


def render_hpa(plan: PodPlan, min_replicas: int = 3, max_replicas: int = 10, cpu_target_percent: int = 50) -> str:
    if not 1 <= min_replicas <= max_replicas:
        raise InvalidBounds(f"autoscaler needs 1 <= min ({min_replicas}) <= max ({max_replicas})")
    if not 1 <= cpu_target_percent <= 100:
        raise InvalidBounds(f"cpu target {cpu_target_percent}% is outside 1..100")
    _validate_pod(plan.pod_name, "-hpa", "-deployment")
    return _fill(
        HPA_TEMPLATE,
        pod_name=plan.pod_name,
        min_replicas=min_replicas,
        max_replicas=max_replicas,
        cpu_target_percent=cpu_target_percent,
    )


def bundle(
    graph: StepGraph,
    plans: list[PodPlan],
    storage: StorageConfig,
    environment: EnvironmentSpec | None = None,
    hpa: bool = True,
) -> ManifestBundle:
    """Render every document for every pod, grouped PVs, PVCs, Services, Deployments, HPAs."""
    environment = environment or EnvironmentSpec()
    step_ids = {s.id for s in graph.steps}
    missing = step_ids - {p.pod_name for p in plans}
    if missing:
        raise ValueError(f"no pod plan for steps: {', '.join(sorted(missing))}")
    ordered = sorted(plans, key=lambda p: p.pod_name)
    hpa_args = {**HPA_DEFAULTS, **environment.hpa}

    pvs, pvcs, services, deployments, hpas = [], [], [], [], []
    for plan in ordered:
        pv, pvc = render_storage(plan, storage)
        pvs.append(ManifestDocument("PersistentVolume", f"{plan.pod_name}-efs-pv", pv))
        pvcs.append(ManifestDocument("PersistentVolumeClaim", f"{plan.pod_name}-efs-pvc", pvc))
        services.append(ManifestDocument("Service", f"{plan.pod_name}-svc", render_service(plan)))
        deployments.append(ManifestDocument("Deployment", f"{plan.pod_name}-deployment", render_deployment(plan)))
        if hpa:
            hpas.append(ManifestDocument("HorizontalPodAutoscaler", f"{plan.pod_name}-hpa", render_hpa(plan, **hpa_args)))
    return ManifestBundle(pvs + pvcs + services + deployments + hpas)
