"""Deterministic tick-based simulation of the generated deployment.

Each call to :func:`advance` runs whole ticks. Within a tick the phases
run in a fixed order: faults, replica reconciliation, pod start-up,
probes, rolling updates, autoscaling, workflow progress. Every state
change is appended to ``ClusterState.events`` with a (tick, seq) key.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field

from j2k.errors import DuplicateName, MalformedDocument, NoBackend, ServiceNotFound, SimulationError, UnboundClaim, UnknownIp
from j2k.manifests import ManifestBundle, load_yaml
from j2k.sim.faults import FailLiveness, Fault, KillPod, SetCpu, TriggerRollingUpdate
from j2k.sim.quantity import parse_quantity

LIVENESS_THRESHOLD = 3
EXECUTION_TICKS = 2
HPA_PERIOD = 5
MOUNT = "/mnt/efs"
PROBE_PATHS = ("/healthz", "/readiness")

RUNNING = "Running"
PENDING = "Pending"
FAILED = "Failed"

NOT_STARTED = "NotStarted"
WAITING = "WaitingInputs"
EXECUTING = "Executing"
DONE = "Done"


@dataclass
class SimEvent:
    tick: int
    seq: int
    kind: str
    deployment: str | None = None
    pod: str | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict = {"tick": self.tick, "seq": self.seq, "kind": self.kind}
        if self.deployment is not None:
            out["deployment"] = self.deployment
        if self.pod is not None:
            out["pod"] = self.pod
        out["detail"] = dict(sorted(self.detail.items()))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class DeploymentState:
    name: str
    desired_replicas: int
    template_hash: str
    max_surge: int
    max_unavailable: int
    updating: bool = False
    image: str = ""
    labels: dict[str, str] = field(default_factory=dict)
    claim: str = ""
    step_id: str | None = None
    inputs: list[tuple[str, str]] = field(default_factory=list)
    exports: list[str] = field(default_factory=list)
    produce_topics: list[str] = field(default_factory=list)
    has_liveness: bool = True
    has_readiness: bool = True
    cpu_percent: int = 0


@dataclass
class PodRuntime:
    uid: str
    owner_deployment: str
    template_hash: str
    seq: int
    pending_since: int
    phase: str = PENDING
    ready: bool = False
    live: bool = True
    consecutive_liveness_failures: int = 0
    cpu_utilization_percent: int = 0
    step_progress: str = NOT_STARTED
    remaining_ticks: int = 0
    liveness_fail_until: int = -1


@dataclass
class HpaState:
    name: str
    target: str
    min_replicas: int
    max_replicas: int
    cpu_target_percent: int
    last_scale_tick: int = 0


@dataclass
class ServiceState:
    name: str
    selector: dict[str, str]
    cluster_ip: str


@dataclass
class VolumeSpec:
    name: str
    capacity: int
    access_modes: tuple[str, ...]
    storage_class: str
    node_name: str | None = None


@dataclass
class ClusterState:
    namespace: str = "default"
    rng_seed: int = 0
    clock: int = 0
    deployments: dict[str, DeploymentState] = field(default_factory=dict)
    pods: dict[str, PodRuntime] = field(default_factory=dict)
    services: dict[str, ServiceState] = field(default_factory=dict)
    volumes: dict[str, VolumeSpec] = field(default_factory=dict)
    claims: dict[str, VolumeSpec] = field(default_factory=dict)
    bindings: dict[str, str] = field(default_factory=dict)
    hpas: dict[str, HpaState] = field(default_factory=dict)
    bus: dict[str, list[dict]] = field(default_factory=dict)
    volume: dict[str, bytes] = field(default_factory=dict)
    completed: dict[str, int] = field(default_factory=dict)
    events: list[SimEvent] = field(default_factory=list)
    _pod_counter: int = 0
    _rng: random.Random = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._rng = random.Random(self.rng_seed)

    def emit(self, kind: str, deployment: str | None = None, pod: str | None = None, **detail) -> None:
        self.events.append(SimEvent(self.clock, len(self.events), kind, deployment, pod, detail))

    def pods_of(self, deployment: str) -> list[PodRuntime]:
        return sorted((p for p in self.pods.values() if p.owner_deployment == deployment), key=lambda p: p.seq)

    def events_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def steps(self) -> list[str]:
        return sorted(d.step_id for d in self.deployments.values() if d.step_id)


# ------------------------------------------------------------------ service discovery


def fnv1a_32(data: bytes) -> int:
    h = 0x811C9DC5
    for byte in data:
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def cluster_ip_for(namespace: str, service_name: str, taken: set[str] = frozenset()) -> str:
    """``10.96.X.Y`` from the 32-bit FNV-1a hash of ``namespace/service``.

    On a collision with ``taken`` the next free address is used.
    """
    value = fnv1a_32(f"{namespace}/{service_name}".encode()) % 65536
    for _ in range(65536):
        if value == 0:
            value = 1
        ip = f"10.96.{value >> 8}.{value & 0xFF}"
        if ip not in taken:
            return ip
        value = (value + 1) % 65536
    raise SimulationError("cluster IP range exhausted")


def get_cluster_ip(state: ClusterState, service_name: str, namespace: str | None = None) -> str:
    namespace = state.namespace if namespace is None else namespace
    service = state.services.get(service_name)
    if service is None or namespace != state.namespace:
        raise ServiceNotFound(f"service {service_name!r} not found in namespace {namespace!r}")
    return service.cluster_ip


def call_service(state: ClusterState, ip: str, path: str) -> tuple[int, str]:
    """HTTP-style GET against the pods behind the service owning ``ip``."""
    service = next((s for s in state.services.values() if s.cluster_ip == ip), None)
    if service is None:
        raise UnknownIp(f"no service has cluster IP {ip}")
    if path not in PROBE_PATHS:
        return 404, "not found"
    backends = [
        p
        for d in state.deployments.values()
        if d.labels and all(d.labels.get(k) == v for k, v in service.selector.items())
        for p in state.pods_of(d.name)
        if p.phase != FAILED
    ]
    if not backends:
        raise NoBackend(f"service {service.name!r} has no pods")
    if any(p.ready for p in backends):
        return 200, "ok"
    return 503, "unavailable"


# ------------------------------------------------------------------ applying manifests


def _template_hash(container: dict) -> str:
    spec = {"image": container.get("image"), "env": container.get("env") or []}
    return hashlib.sha256(json.dumps(spec, sort_keys=True).encode()).hexdigest()[:10]


def _int_or_percent(value, replicas: int, round_up: bool) -> int:
    if isinstance(value, str) and value.endswith("%"):
        pct = int(value[:-1])
        whole, rest = divmod(replicas * pct, 100)
        return whole + (1 if round_up and rest else 0)
    return int(value)


def _env_map(container: dict) -> dict[str, str]:
    return {e["name"]: str(e.get("value", "")) for e in container.get("env") or []}


def _split_csv(value: str) -> list[str]:
    return [v for v in value.split(",") if v] if value else []


def _parse_deployment(doc: dict) -> DeploymentState:
    spec = doc["spec"]
    replicas = int(spec.get("replicas", 1))
    rolling = (spec.get("strategy") or {}).get("rollingUpdate") or {}
    pod_spec = spec["template"]["spec"]
    container = pod_spec["containers"][0]
    env = _env_map(container)
    claims = [
        v["persistentVolumeClaim"]["claimName"] for v in pod_spec.get("volumes") or [] if "persistentVolumeClaim" in v
    ]
    inputs = []
    for item in _split_csv(env.get("J2K_INPUTS", "")):
        producer, _, var = item.partition("/")
        inputs.append((producer, var))
    return DeploymentState(
        name=doc["metadata"]["name"],
        desired_replicas=replicas,
        template_hash=_template_hash(container),
        max_surge=_int_or_percent(rolling.get("maxSurge", "25%"), replicas, round_up=True),
        max_unavailable=_int_or_percent(rolling.get("maxUnavailable", "25%"), replicas, round_up=False),
        image=container.get("image", ""),
        labels=dict(spec["template"]["metadata"].get("labels") or {}),
        claim=claims[0] if claims else "",
        step_id=env.get("J2K_STEP_ID") or None,
        inputs=inputs,
        exports=_split_csv(env.get("J2K_EXPORTS", "")),
        produce_topics=_split_csv(env.get("J2K_PRODUCE_TOPICS", "")),
        has_liveness="livenessProbe" in container,
        has_readiness="readinessProbe" in container,
    )


def _parse_volume(doc: dict) -> VolumeSpec:
    spec = doc["spec"]
    node = None
    terms = (((spec.get("nodeAffinity") or {}).get("required") or {}).get("nodeSelectorTerms")) or []
    for term in terms:
        for expr in term.get("matchExpressions") or []:
            if expr.get("key") == "kubernetes.io/hostname" and expr.get("values"):
                node = expr["values"][0]
    return VolumeSpec(
        name=doc["metadata"]["name"],
        capacity=parse_quantity(spec["capacity"]["storage"]),
        access_modes=tuple(spec.get("accessModes") or ()),
        storage_class=spec.get("storageClassName") or "",
        node_name=node,
    )


def _parse_claim(doc: dict) -> VolumeSpec:
    spec = doc["spec"]
    return VolumeSpec(
        name=doc["metadata"]["name"],
        capacity=parse_quantity(spec["resources"]["requests"]["storage"]),
        access_modes=tuple(spec.get("accessModes") or ()),
        storage_class=spec.get("storageClassName") or "",
    )


def _parse_hpa(doc: dict) -> HpaState:
    spec = doc["spec"]
    target = 50
    for metric in spec.get("metrics") or []:
        resource = metric.get("resource") or {}
        if resource.get("name") == "cpu":
            target = int(resource["target"]["averageUtilization"])
    hpa = HpaState(
        name=doc["metadata"]["name"],
        target=spec["scaleTargetRef"]["name"],
        min_replicas=int(spec.get("minReplicas", 1)),
        max_replicas=int(spec["maxReplicas"]),
        cpu_target_percent=target,
    )
    if not 1 <= hpa.min_replicas <= hpa.max_replicas or hpa.cpu_target_percent < 1:
        raise ValueError("autoscaler bounds out of range")
    return hpa


def bind_claims(volumes: list[VolumeSpec], claims: list[VolumeSpec], taken: set[str] = frozenset()) -> dict[str, str]:
    """Bind each claim to the smallest compatible free volume (ties by name)."""
    free = [v for v in volumes if v.name not in taken]
    bindings: dict[str, str] = {}
    for claim in claims:
        candidates = [
            v
            for v in free
            if v.storage_class == claim.storage_class
            and set(claim.access_modes) <= set(v.access_modes)
            and v.capacity >= claim.capacity
        ]
        if not candidates:
            raise UnboundClaim(f"no persistent volume satisfies claim {claim.name!r}")
        chosen = min(candidates, key=lambda v: (v.capacity, v.name))
        free.remove(chosen)
        bindings[claim.name] = chosen.name
    return bindings


def apply_bundle(state: ClusterState, bundle: ManifestBundle) -> ClusterState:
    """Register every object in ``bundle``; pods appear on the next reconcile."""
    parsed = []
    for d in bundle.documents:
        doc = load_yaml(d.yaml_text)
        if not isinstance(doc, dict) or not isinstance(doc.get("metadata"), dict) or "name" not in doc["metadata"]:
            raise MalformedDocument(f"{d.kind} document has no metadata.name")
        parsed.append((d.kind, doc))
    names: set[tuple[str, str]] = set()
    existing = {
        **{("Deployment", n): None for n in state.deployments},
        **{("Service", n): None for n in state.services},
        **{("PersistentVolume", n): None for n in state.volumes},
        **{("PersistentVolumeClaim", n): None for n in state.claims},
        **{("HorizontalPodAutoscaler", n): None for n in state.hpas},
    }
    for kind, doc in parsed:
        key = (kind, doc["metadata"]["name"])
        if key in names or key in existing:
            raise DuplicateName(f"{kind} {key[1]!r} already exists")
        names.add(key)

    parsers = {
        "PersistentVolume": _parse_volume,
        "PersistentVolumeClaim": _parse_claim,
        "Deployment": _parse_deployment,
        "HorizontalPodAutoscaler": _parse_hpa,
    }
    objects: dict[str, list] = {kind: [] for kind in parsers}
    for kind, doc in parsed:
        if kind in parsers:
            try:
                objects[kind].append(parsers[kind](doc))
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise MalformedDocument(f"{kind} {doc['metadata']['name']!r} is missing or has an invalid field: {exc}") from None
    volumes, claims, deployments, hpas = (objects[k] for k in parsers)
    all_volumes = list(state.volumes.values()) + volumes
    bindings = bind_claims(all_volumes, claims, taken=set(state.bindings.values()))

    known_claims = set(state.claims) | {c.name for c in claims}
    for dep in deployments:
        if dep.claim and dep.claim not in known_claims:
            raise UnboundClaim(f"deployment {dep.name!r} references unknown claim {dep.claim!r}")
    known_deployments = set(state.deployments) | {d.name for d in deployments}
    for hpa in hpas:
        if hpa.target not in known_deployments:
            raise SimulationError(f"autoscaler {hpa.name!r} targets an unknown deployment")

    for v in volumes:
        state.volumes[v.name] = v
    for c in claims:
        state.claims[c.name] = c
        state.bindings[c.name] = bindings[c.name]
        state.emit("ClaimBound", claim=c.name, volume=bindings[c.name])
    used_ips = {s.cluster_ip for s in state.services.values()}
    for kind, doc in parsed:
        name = doc["metadata"]["name"]
        if kind == "Service":
            ip = cluster_ip_for(state.namespace, name, used_ips)
            used_ips.add(ip)
            state.services[name] = ServiceState(name, dict((doc.get("spec") or {}).get("selector") or {}), ip)
            state.emit("ServiceRegistered", service=name, cluster_ip=ip)
    for dep in deployments:
        state.deployments[dep.name] = dep
        state.emit("DeploymentRegistered", dep.name, replicas=dep.desired_replicas, step=dep.step_id or "")
    for hpa in hpas:
        hpa.last_scale_tick = state.clock
        state.hpas[hpa.name] = hpa
        dep = state.deployments[hpa.target]
        clamped = min(max(dep.desired_replicas, hpa.min_replicas), hpa.max_replicas)
        if clamped != dep.desired_replicas:
            state.emit("HpaScale", dep.name, before=dep.desired_replicas, after=clamped)
            dep.desired_replicas = clamped
    return state


# ------------------------------------------------------------------ pod lifecycle helpers


def _set_ready(state: ClusterState, pod: PodRuntime, ready: bool) -> None:
    if pod.ready != ready:
        pod.ready = ready
        state.emit("ReadinessChanged", pod.owner_deployment, pod.uid, ready=ready)


def _abort(state: ClusterState, pod: PodRuntime, reason: str) -> None:
    if pod.step_progress == EXECUTING:
        dep = state.deployments[pod.owner_deployment]
        state.emit("StepAborted", dep.name, pod.uid, step=dep.step_id, reason=reason)
    pod.step_progress = NOT_STARTED
    pod.remaining_ticks = 0


def _create_pod(state: ClusterState, dep: DeploymentState, reason: str) -> PodRuntime:
    state._pod_counter += 1
    n = state._pod_counter
    base = dep.step_id or dep.name
    pod = PodRuntime(
        uid=f"{base}-pod-{n:05d}",
        owner_deployment=dep.name,
        template_hash=dep.template_hash,
        seq=n,
        pending_since=state.clock,
        cpu_utilization_percent=dep.cpu_percent,
    )
    state.pods[pod.uid] = pod
    kind = "PodReplaced" if reason == "replacement" else "PodCreated"
    state.emit(kind, dep.name, pod.uid, reason=reason, template=dep.template_hash)
    return pod


def _delete_pod(state: ClusterState, pod: PodRuntime, reason: str) -> None:
    _abort(state, pod, f"deleted ({reason})")
    _set_ready(state, pod, False)
    del state.pods[pod.uid]
    state.emit("PodDeleted", pod.owner_deployment, pod.uid, reason=reason)


def _deletion_order(pods: list[PodRuntime]) -> list[PodRuntime]:
    """Cheapest pods to lose first: idle, not yet running, not ready, newest."""
    return sorted(pods, key=lambda p: (p.step_progress == EXECUTING, p.phase == RUNNING, p.ready, -p.seq))


# ------------------------------------------------------------------ tick phases


def _resolve_deployment(state: ClusterState, name: str) -> DeploymentState | None:
    return state.deployments.get(name) or state.deployments.get(f"{name}-deployment")


def _inject(state: ClusterState, fault: Fault) -> None:
    action = fault.action
    dep = _resolve_deployment(state, action.deployment)
    if dep is None:
        state.emit("FaultIgnored", action=type(action).__name__, target=action.deployment, reason="unknown deployment")
        return
    alive = [p for p in state.pods_of(dep.name) if p.phase != FAILED]
    if isinstance(action, KillPod):
        victims = state._rng.sample(alive, min(action.count, len(alive)))
        state.emit("FaultInjected", dep.name, action="KillPod", count=action.count, killed=len(victims))
        for pod in sorted(victims, key=lambda p: p.seq):
            _abort(state, pod, "killed")
            pod.phase = FAILED
            pod.live = False
            _set_ready(state, pod, False)
            state.emit("PodKilled", dep.name, pod.uid)
    elif isinstance(action, FailLiveness):
        if action.pod_ordinal >= len(alive):
            state.emit("FaultIgnored", dep.name, action="FailLiveness", reason="no pod at ordinal")
            return
        pod = alive[action.pod_ordinal]
        pod.liveness_fail_until = state.clock + action.duration_ticks
        state.emit("FaultInjected", dep.name, pod.uid, action="FailLiveness", duration_ticks=action.duration_ticks)
    elif isinstance(action, SetCpu):
        dep.cpu_percent = action.percent
        for pod in alive:
            pod.cpu_utilization_percent = action.percent
        state.emit("FaultInjected", dep.name, action="SetCpu", percent=action.percent)
    elif isinstance(action, TriggerRollingUpdate):
        repo = dep.image.rsplit(":", 1)[0] if ":" in dep.image.rsplit("/", 1)[-1] else dep.image
        image = f"{repo}:{action.new_tag}"
        new_hash = hashlib.sha256(f"{dep.template_hash}|{image}".encode()).hexdigest()[:10]
        if image == dep.image:
            state.emit("FaultIgnored", dep.name, action="TriggerRollingUpdate", reason="image unchanged")
            return
        dep.image = image
        dep.template_hash = new_hash
        dep.updating = True
        state.emit("RollingUpdateStarted", dep.name, image=image, template=new_hash)


def _reconcile(state: ClusterState, dep: DeploymentState) -> None:
    pods = state.pods_of(dep.name)
    failed = [p for p in pods if p.phase == FAILED]
    for pod in failed:
        _delete_pod(state, pod, "failed")
    active = [p for p in pods if p.phase != FAILED]
    deficit = dep.desired_replicas - len(active)
    if deficit > 0:
        replacements = min(len(failed), deficit)
        for i in range(deficit):
            _create_pod(state, dep, "replacement" if i < replacements else "scale-up")
    elif deficit < 0:
        for pod in _deletion_order(active)[:-deficit]:
            _delete_pod(state, pod, "scale-down")


def _start_pods(state: ClusterState) -> None:
    for pod in sorted(state.pods.values(), key=lambda p: p.seq):
        if pod.phase == PENDING and state.clock >= pod.pending_since + 1:
            pod.phase = RUNNING
            state.emit("PodRunning", pod.owner_deployment, pod.uid)


def _inputs_available(state: ClusterState, dep: DeploymentState) -> bool:
    return all(f"{MOUNT}/{producer}/{var}" in state.volume for producer, var in dep.inputs)


def _probe(state: ClusterState) -> None:
    for pod in sorted(state.pods.values(), key=lambda p: p.seq):
        if pod.phase != RUNNING:
            continue
        dep = state.deployments[pod.owner_deployment]
        failing = state.clock < pod.liveness_fail_until
        pod.live = not failing
        if failing and dep.has_liveness:
            pod.consecutive_liveness_failures += 1
            state.emit("LivenessProbeFailed", dep.name, pod.uid, consecutive=pod.consecutive_liveness_failures)
            if pod.consecutive_liveness_failures >= LIVENESS_THRESHOLD:
                _abort(state, pod, "liveness restart")
                pod.phase = PENDING
                pod.pending_since = state.clock
                pod.consecutive_liveness_failures = 0
                _set_ready(state, pod, False)
                state.emit("LivenessRestart", dep.name, pod.uid)
                continue
        else:
            pod.consecutive_liveness_failures = 0
        gated = dep.has_readiness and not _inputs_available(state, dep)
        _set_ready(state, pod, pod.live and not gated)


def _rolling_update(state: ClusterState, dep: DeploymentState) -> None:
    pods = state.pods_of(dep.name)
    failed = [p for p in pods if p.phase == FAILED]
    for pod in failed:
        _delete_pod(state, pod, "failed")
    pods = [p for p in pods if p.phase != FAILED]
    old = [p for p in pods if p.template_hash != dep.template_hash]
    new = [p for p in pods if p.template_hash == dep.template_hash]
    desired = dep.desired_replicas

    room = desired + dep.max_surge - len(old) - len(new)
    create = max(0, min(room, desired - len(new)))
    replacements = min(len(failed), create)
    for i in range(create):
        new.append(_create_pod(state, dep, "replacement" if i < replacements else "rolling-update"))

    # unready old pods cost no availability
    for pod in _deletion_order([p for p in old if not p.ready]):
        _delete_pod(state, pod, "rolling-update")
        old.remove(pod)
    ready = sum(p.ready for p in old + new)
    removable = ready - (desired - dep.max_unavailable)
    for pod in _deletion_order(old):
        if removable <= 0:
            break
        _delete_pod(state, pod, "rolling-update")
        old.remove(pod)
        removable -= 1
    extra = len(new) - desired
    if extra > 0:
        for pod in _deletion_order(new)[:extra]:
            _delete_pod(state, pod, "scale-down")
            new.remove(pod)

    ready = sum(p.ready for p in old + new)
    state.emit(
        "RollingUpdateProgress", dep.name,
        desired=desired, total=len(old) + len(new), ready=ready, updated=len(new), old=len(old),
    )
    if not old and len(new) == desired and all(p.ready for p in new):
        dep.updating = False
        state.emit("RollingUpdateCompleted", dep.name, template=dep.template_hash)


def _autoscale(state: ClusterState, hpa: HpaState) -> None:
    if state.clock - hpa.last_scale_tick < HPA_PERIOD:
        return
    hpa.last_scale_tick = state.clock
    dep = state.deployments[hpa.target]
    running = [p for p in state.pods_of(dep.name) if p.phase == RUNNING]
    before = dep.desired_replicas
    if not running:
        state.emit("HpaEvaluated", dep.name, before=before, after=before, cpu=None, proposal=before)
        return
    cpu_total = sum(p.cpu_utilization_percent for p in running)
    # ceil(desired * mean_cpu / target) in integers
    proposal = -(-before * cpu_total // (len(running) * hpa.cpu_target_percent))
    proposal = min(max(proposal, hpa.min_replicas), hpa.max_replicas)
    after = before + (proposal > before) - (proposal < before)
    state.emit(
        "HpaEvaluated", dep.name,
        before=before, after=after, proposal=proposal, cpu=cpu_total // len(running),
    )
    if after != before:
        dep.desired_replicas = after
        state.emit("HpaScale", dep.name, before=before, after=after)


def _workflow(state: ClusterState, dep: DeploymentState) -> None:
    step = dep.step_id
    if step is None:
        return
    pods = [p for p in state.pods_of(dep.name) if p.phase == RUNNING]
    if step in state.completed:
        for pod in pods:
            pod.step_progress = DONE
        return
    executing = [p for p in pods if p.step_progress == EXECUTING]
    if executing:
        pod = executing[0]
        pod.remaining_ticks -= 1
        if pod.remaining_ticks <= 0:
            _complete(state, dep, pod)
        return
    if not _inputs_available(state, dep):
        for pod in pods:
            pod.step_progress = WAITING
        return
    candidates = [p for p in pods if p.ready]
    if candidates:
        pod = candidates[0]
        pod.step_progress = EXECUTING
        pod.remaining_ticks = EXECUTION_TICKS
        state.emit("StepStarted", dep.name, pod.uid, step=step)


def _complete(state: ClusterState, dep: DeploymentState, pod: PodRuntime) -> None:
    step = dep.step_id
    for var in dep.exports:
        path = f"{MOUNT}/{step}/{var}"
        if path in state.volume:
            continue
        state.volume[path] = json.dumps({"step": step, "var": var, "pod": pod.uid}, sort_keys=True).encode()
        state.emit("VolumeWrite", dep.name, pod.uid, path=path)
    for topic in dep.produce_topics:
        message = {"producer": step, "topic": topic, "exports": list(dep.exports), "tick": state.clock}
        state.bus.setdefault(topic, []).append(message)
        state.emit("MessagePublished", dep.name, pod.uid, topic=topic)
    pod.step_progress = DONE
    pod.remaining_ticks = 0
    state.completed[step] = state.clock
    state.emit("StepCompleted", dep.name, pod.uid, step=step)


def advance(state: ClusterState, ticks: int, faults: list[Fault] | None = None) -> ClusterState:
    """Run ``ticks`` whole ticks; faults fire on the tick they name."""
    if ticks < 0:
        raise ValueError("ticks must be non-negative")
    faults = faults or []
    for _ in range(ticks):
        for fault in faults:
            if fault.tick == state.clock:
                _inject(state, fault)
        for name in sorted(state.deployments):
            dep = state.deployments[name]
            if not dep.updating:
                _reconcile(state, dep)
        _start_pods(state)
        _probe(state)
        for name in sorted(state.deployments):
            if state.deployments[name].updating:
                _rolling_update(state, state.deployments[name])
        for name in sorted(state.hpas):
            _autoscale(state, state.hpas[name])
        for name in sorted(state.deployments):
            _workflow(state, state.deployments[name])
        state.clock += 1
    return state


def summary(state: ClusterState) -> dict:
    steps = state.steps()
    kinds: dict[str, int] = {}
    for event in state.events:
        kinds[event.kind] = kinds.get(event.kind, 0) + 1
    return {
        "ticks": state.clock,
        "steps_total": len(steps),
        "steps_completed": sum(1 for s in steps if s in state.completed),
        "completed": {s: state.completed[s] for s in steps if s in state.completed},
        "incomplete": [s for s in steps if s not in state.completed],
        "liveness_restarts": kinds.get("LivenessRestart", 0),
        "pod_replacements": kinds.get("PodReplaced", 0),
        "pods_killed": kinds.get("PodKilled", 0),
        "scale_events": kinds.get("HpaScale", 0),
    }
