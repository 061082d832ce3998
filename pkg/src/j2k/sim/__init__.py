from j2k.sim.cluster import (
    ClusterState,
    DeploymentState,
    HpaState,
    PodRuntime,
    SimEvent,
    advance,
    apply_bundle,
    call_service,
    cluster_ip_for,
    fnv1a_32,
    get_cluster_ip,
    summary,
)
from j2k.sim.faults import FailLiveness, Fault, KillPod, SetCpu, TriggerRollingUpdate, load_fault_script
from j2k.sim.quantity import parse_quantity

__all__ = [
    "ClusterState",
    "DeploymentState",
    "FailLiveness",
    "Fault",
    "HpaState",
    "KillPod",
    "PodRuntime",
    "SetCpu",
    "SimEvent",
    "TriggerRollingUpdate",
    "advance",
    "apply_bundle",
    "call_service",
    "cluster_ip_for",
    "fnv1a_32",
    "get_cluster_ip",
    "load_fault_script",
    "parse_quantity",
    "summary",
]
