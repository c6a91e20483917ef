"""Autonomous quantum error correction of a binomial-encoded cavity qubit: device model,
PASS working point, optimal-control pulses, repetitive protocol and rate model."""

__version__ = "0.1.0"
