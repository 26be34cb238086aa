"""swarmlink: secure telemetry for UAV swarms over heterogeneous radios,
with a deterministic simulator and adversary models for evaluating it.

The stack: signed ephemeral-key handshakes establish pairwise session keys;
a rolling broadcast key (rotated on a timeout, distributed wrapped under
session keys) seals telemetry frames with AES-256-GCM; packets disseminate
by flooding mesh or star relay over simulated sub-GHz, WiFi, and cellular
links with duty-cycle limits and health-based failover.
"""

from . import codec, crypto, golden, handshake, links, mesh, metrics, rekey, scenario, sim, wire
from .errors import SwarmLinkError, ValidationError
from .scenario import Scenario, load_scenario, scenario_from_dict
from .sim import Simulation, run_scenario

__version__ = "0.1.0"

__all__ = [
    "Scenario",
    "Simulation",
    "SwarmLinkError",
    "ValidationError",
    "codec",
    "crypto",
    "golden",
    "handshake",
    "links",
    "load_scenario",
    "mesh",
    "metrics",
    "rekey",
    "run_scenario",
    "scenario",
    "scenario_from_dict",
    "sim",
    "wire",
    "__version__",
]
