"""
Mapping between numeric neurons and device settings.

A neuron computes ``(sum(w * x) + bias) / N``; the 1/N is the balanced
splitter-tree normalisation. Circuit outputs are read out as magnitudes
relative to the all-ones configuration of the same topology, and signed
against that reference's phase.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .circuit import (
    CircuitGraph,
    Imbalance,
    build_coln,
    build_wdipln_naive,
    build_wdipln_nominal,
    evaluate,
)
from .devices import PROBE_WAVELENGTH_NM, calibrated_ring, power
from .encoding import EncodingError, EncodingTable

__all__ = [
    "EncodingError",
    "EncodingTable",
    "NeuronConfig",
    "TOPOLOGIES",
    "configure",
    "default_encoding_table",
    "expected_mac",
    "measure",
    "readout",
    "reference_config",
    "signed_readout",
]

TOPOLOGIES = ("coln", "wdipln", "wdipln-nominal")
DEFAULT_SPACING_LINEWIDTHS = 20.0


@dataclass(frozen=True)
class NeuronConfig:
    weights: tuple[float, ...]
    inputs: tuple[float, ...]
    bias: float | None = None
    probe_wavelength: float = PROBE_WAVELENGTH_NM
    channel_assignments: dict[int, int] | None = field(default=None, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(v) for v in self.weights))
        object.__setattr__(self, "inputs", tuple(float(v) for v in self.inputs))
        if len(self.weights) != len(self.inputs):
            raise ValueError("weights and inputs must have equal length")
        if not self.weights:
            raise ValueError("empty neuron")
        if any(abs(v) > 1 for v in self.weights):
            raise ValueError("weights must lie in [-1, 1]")
        if any(not 0 <= v <= 1 for v in self.inputs):
            raise ValueError("inputs must lie in [0, 1]")
        if self.channel_assignments is not None:
            mapping = {int(k): int(v) for k, v in self.channel_assignments.items()}
            if sorted(mapping) != list(range(len(self.weights))):
                raise ValueError("channel_assignments must cover every vector index")
            object.__setattr__(self, "channel_assignments", mapping)

    @property
    def n(self) -> int:
        return len(self.weights)

    def channel_groups(self) -> list[list[int]]:
        """Vector indices per channel, in channel order."""
        if self.channel_assignments is None:
            return [list(range(self.n))]
        channels = sorted(set(self.channel_assignments.values()))
        groups = [[i for i in range(self.n) if self.channel_assignments[i] == c] for c in channels]
        if len({len(g) for g in groups}) != 1:
            raise ValueError("every channel needs the same number of branches")
        return groups

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NeuronConfig":
        data = json.loads(text)
        if data.get("channel_assignments") is not None:
            data["channel_assignments"] = {int(k): v for k, v in data["channel_assignments"].items()}
        return cls(**data)


def expected_mac(config: NeuronConfig, channel: int | None = None) -> float:
    """Tree-normalised dot product, the analytic target for the circuit."""
    groups = config.channel_groups()
    idx = groups[0 if channel is None else channel]
    w = np.array([config.weights[i] for i in idx])
    x = np.array([config.inputs[i] for i in idx])
    bias = config.bias or 0.0
    return float((w @ x + bias) / len(idx))


def readout(field_value, reference_power: float) -> float:
    if reference_power <= 0:
        raise ValueError("reference power must be positive")
    return math.sqrt(float(power(field_value)) / reference_power)


def signed_readout(field_value, reference_field) -> float:
    """Magnitude relative to ``reference_field``, signed by the relative phase."""
    mag = readout(field_value, float(power(reference_field)))
    projection = (complex(field_value) * complex(reference_field).conjugate()).real
    return -mag if projection < 0 else mag


def default_encoding_table(probe_wavelength: float = PROBE_WAVELENGTH_NM, **ring_kwargs) -> EncodingTable:
    ring = calibrated_ring(probe_wavelength, **ring_kwargs)
    return EncodingTable.calibrate(ring, probe_wavelength)


def default_channel_spacing(probe_wavelength: float = PROBE_WAVELENGTH_NM, **ring_kwargs) -> float:
    ring = calibrated_ring(probe_wavelength, **ring_kwargs)
    return DEFAULT_SPACING_LINEWIDTHS * float(ring.linewidth(probe_wavelength))


def configure(
    config: NeuronConfig,
    topology: str = "wdipln",
    *,
    input_encoding: str = "continuous",
    bias_line: bool | None = None,
    channel_spacing: float | None = None,
    imbalance: Imbalance | None = None,
    ring_kwargs: dict | None = None,
) -> CircuitGraph:
    """
    Build the circuit realising ``config``.

    ``bias_line`` defaults to whether the config carries a bias; it is only
    available on the single-channel ``wdipln`` topology.
    """
    if topology not in TOPOLOGIES:
        raise ValueError(f"unknown topology {topology!r}; choose from {TOPOLOGIES}")
    groups = config.channel_groups()
    m, n = len(groups), len(groups[0])
    w = np.array([[config.weights[i] for i in g] for g in groups])
    x = np.array([[config.inputs[i] for i in g] for g in groups])
    if bias_line is None:
        bias_line = config.bias is not None
    bias = (config.bias or 0.0) if bias_line else None
    if channel_spacing is None:
        channel_spacing = default_channel_spacing(config.probe_wavelength, **(ring_kwargs or {}))

    if topology == "coln":
        if m != 1 or bias is not None:
            raise ValueError("the COLN builder is single-channel without a bias line")
        circuit = build_coln(n, w[0], x[0])
    elif topology == "wdipln":
        circuit = build_wdipln_naive(
            n,
            m,
            w,
            x,
            channel_spacing,
            probe_wavelength=config.probe_wavelength,
            bias=bias,
            input_encoding=input_encoding,
            ring_kwargs=ring_kwargs,
        )
    else:
        if bias is not None:
            raise ValueError("the nominal WDIPLN builder has no bias line")
        circuit = build_wdipln_nominal(
            n,
            m,
            w,
            x,
            channel_spacing,
            probe_wavelength=config.probe_wavelength,
            ring_kwargs=ring_kwargs,
        )
    return circuit.with_imbalance(imbalance) if imbalance is not None else circuit


def reference_config(config: NeuronConfig) -> NeuronConfig:
    """All-ones, all-positive counterpart of ``config`` (bias switched off)."""
    return NeuronConfig(
        weights=(1.0,) * config.n,
        inputs=(1.0,) * config.n,
        bias=0.0 if config.bias is not None else None,
        probe_wavelength=config.probe_wavelength,
        channel_assignments=config.channel_assignments,
    )


def measure(
    config: NeuronConfig,
    topology: str = "wdipln",
    *,
    channel: int = 0,
    **kwargs,
) -> float:
    """Signed circuit readout of ``config`` at its probe (or channel) wavelength."""
    circuit = configure(config, topology, **kwargs)
    reference = configure(reference_config(config), topology, **kwargs)
    lam = circuit.channels[channel] if circuit.channels else config.probe_wavelength
    return signed_readout(evaluate(circuit, lam), evaluate(reference, lam))
