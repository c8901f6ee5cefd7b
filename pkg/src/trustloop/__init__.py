"""Deterministic federated-learning simulator with agentic trust control.

A synchronous FL environment (synthetic task, configurable benign and
adversarial client behaviors) coordinated by a server-side trust engine:
behavioral signal extraction, entropy-weighted TOPSIS scoring, EMA
smoothing, and a three-state supervisory controller that steers omission
thresholds, smoothing factors, exclusion and reinstatement. Ships with
trust-agnostic and rule-adaptive baseline controllers plus a seeded
experiment harness.
"""

__version__ = "0.1.0"

from trustloop.errors import ConfigError, SignalError, SimulationFault, TrustError

__all__ = [
    "ConfigError",
    "SignalError",
    "SimulationFault",
    "TrustError",
    "__version__",
]
