"""Simulator for wavelength-diverse ring-based coherent linear neurons."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from .circuit import CircuitGraph, Imbalance, SpectralGrid, SweepResult, evaluate, sweep
from .devices import MzmDevice, PhaseShifterDevice, RingDevice, calibrated_ring, ring_transfer
from .encoding import EncodingError, EncodingTable
from .neuron import NeuronConfig, configure, expected_mac, measure, readout, signed_readout

__all__ = [
    "CircuitGraph",
    "EncodingError",
    "EncodingTable",
    "Imbalance",
    "MzmDevice",
    "NeuronConfig",
    "PhaseShifterDevice",
    "RingDevice",
    "SpectralGrid",
    "SweepResult",
    "calibrated_ring",
    "configure",
    "evaluate",
    "expected_mac",
    "measure",
    "readout",
    "ring_transfer",
    "signed_readout",
    "sweep",
]
