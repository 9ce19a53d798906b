from .core import Clock, ClockMode, Fabric, load_topology, load_topology_file
from .model import (
    Balancer,
    DeviceOwner,
    FloatingIP,
    HealthConfig,
    Host,
    HostRole,
    Network,
    Port,
    ResourceSnapshot,
    Router,
    Subnet,
    Tenant,
    Topology,
)

__all__ = [
    "Balancer",
    "Clock",
    "ClockMode",
    "DeviceOwner",
    "Fabric",
    "FloatingIP",
    "HealthConfig",
    "Host",
    "HostRole",
    "Network",
    "Port",
    "ResourceSnapshot",
    "Router",
    "Subnet",
    "Tenant",
    "Topology",
    "load_topology",
    "load_topology_file",
]
