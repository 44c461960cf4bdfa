"""JSON netlists: schema, loading into a CircuitGraph and dumping back."""

from __future__ import annotations

import json
from dataclasses import replace
from importlib import resources
from pathlib import Path

import jsonschema

from .circuit import ADDSUB_PANELS, CircuitGraph, Imbalance, addsub_panel
from .devices import PROBE_WAVELENGTH_NM, MzmDevice, PhaseShifterDevice, RingDevice, calibrated_ring

SCHEMA_VERSION = 1

_NUMBER = {"type": "number"}

RING_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"const": "ring"},
        "resonance_nm": {"type": "number", "exclusiveMinimum": 0},
        "r": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "a0": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "roundtrip_length_um": {"type": "number", "exclusiveMinimum": 0},
        "n_eff0": _NUMBER,
        "n_group": {"type": "number", "exclusiveMinimum": 0},
        "dn_dV": _NUMBER,
        "da_dV": _NUMBER,
        "voltage": _NUMBER,
        "reference_wavelength_nm": {"type": "number", "exclusiveMinimum": 0},
        "v_min": _NUMBER,
        "v_max": _NUMBER,
        "channel": {"type": ["integer", "null"], "minimum": 0},
    },
    "additionalProperties": False,
    # Either a calibrated ring placed by its resonance, or explicit parameters.
    "oneOf": [
        {"required": ["resonance_nm"], "not": {"required": ["n_eff0"]}},
        {"required": ["r", "a0", "roundtrip_length_um", "n_eff0", "n_group"], "not": {"required": ["resonance_nm"]}},
    ],
}

PHASE_SHIFTER_SCHEMA = {
    "type": "object",
    "required": ["kind", "phase_rad"],
    "properties": {
        "kind": {"const": "phase_shifter"},
        "phase_rad": _NUMBER,
        "insertion_loss_db": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

MZM_SCHEMA = {
    "type": "object",
    "required": ["kind", "phase_difference_rad"],
    "properties": {
        "kind": {"const": "mzm"},
        "phase_difference_rad": _NUMBER,
        "extinction_ratio_db": {"type": ["number", "null"], "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

CHAIN_SCHEMA = {
    "type": "object",
    "required": ["devices"],
    "properties": {
        "devices": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {"kind": {"enum": ["ring", "phase_shifter", "mzm"]}},
                "allOf": [
                    {"if": {"properties": {"kind": {"const": k}}}, "then": schema}
                    for k, schema in (("ring", RING_SCHEMA), ("phase_shifter", PHASE_SHIFTER_SCHEMA), ("mzm", MZM_SCHEMA))
                ],
            },
        }
    },
    "additionalProperties": False,
}

NETLIST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "wdipln netlist",
    "type": "object",
    "required": ["schema_version", "branches"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "probe_wavelength_nm": {"type": "number", "exclusiveMinimum": 0},
        "fanout_n": {"type": "integer", "minimum": 1},
        "channels_nm": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "branches": {"type": "array", "minItems": 1, "items": CHAIN_SCHEMA},
        "bias_branch": {"oneOf": [{"type": "null"}, CHAIN_SCHEMA]},
        "bias_delta_length_um": _NUMBER,
        "bias_n_eff": {"type": "number", "exclusiveMinimum": 0},
        "imbalance": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["amplitude", "phase_rad"],
                    "properties": {
                        "amplitude": {"type": "array", "items": {"type": "number", "minimum": 0}},
                        "phase_rad": {"type": "array", "items": _NUMBER},
                        "bias_amplitude": {"type": "number", "minimum": 0},
                        "bias_phase_rad": _NUMBER,
                    },
                    "additionalProperties": False,
                },
            ]
        },
    },
    "additionalProperties": False,
}


class NetlistError(ValueError):
    """A netlist failed to parse or validate."""


def _validator() -> jsonschema.protocols.Validator:
    cls = jsonschema.validators.validator_for(NETLIST_SCHEMA)
    return cls(NETLIST_SCHEMA)


def _location(path) -> str:
    parts = ["$"]
    for p in path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def validate(data) -> None:
    errors = sorted(_validator().iter_errors(data), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        best = jsonschema.exceptions.best_match(errors)
        lines = [f"{_location(best.absolute_path)}: {best.message}"]
        lines += [f"{_location(e.absolute_path)}: {e.message}" for e in errors if e is not best][:5]
        raise NetlistError("invalid netlist\n  " + "\n  ".join(lines))


def _ring(spec: dict) -> RingDevice:
    if "resonance_nm" in spec:
        ring = calibrated_ring(spec["resonance_nm"], channel=spec.get("channel"))
        if "voltage" in spec:
            ring = replace(ring, voltage=spec["voltage"])
        return ring
    return RingDevice(
        r=spec["r"],
        a0=spec["a0"],
        roundtrip_length=spec["roundtrip_length_um"],
        n_eff0=spec["n_eff0"],
        n_group=spec["n_group"],
        dn_dV=spec.get("dn_dV", 0.0),
        da_dV=spec.get("da_dV", 0.0),
        voltage=spec.get("voltage", 0.0),
        reference_wavelength=spec.get("reference_wavelength_nm", PROBE_WAVELENGTH_NM),
        v_min=spec.get("v_min", -2.0),
        v_max=spec.get("v_max", 2.0),
        channel=spec.get("channel"),
    )


def _device(spec: dict):
    kind = spec["kind"]
    if kind == "ring":
        return _ring(spec)
    if kind == "phase_shifter":
        return PhaseShifterDevice(spec["phase_rad"], spec.get("insertion_loss_db", 0.0))
    er = spec.get("extinction_ratio_db")
    return MzmDevice(spec["phase_difference_rad"], float("inf") if er is None else er)


def from_dict(data: dict) -> CircuitGraph:
    validate(data)
    if "fanout_n" in data and data["fanout_n"] != len(data["branches"]):
        raise NetlistError(
            f"invalid netlist\n  $.fanout_n: {data['fanout_n']} does not match {len(data['branches'])} branches"
        )
    try:
        return _build(data)
    except (ValueError, TypeError) as exc:
        raise NetlistError(f"invalid netlist: {exc}") from exc


def _build(data: dict) -> CircuitGraph:
    branches = tuple(tuple(_device(d) for d in b["devices"]) for b in data["branches"])
    bias = data.get("bias_branch")
    bias_branch = None if bias is None else tuple(_device(d) for d in bias["devices"])
    imb = data.get("imbalance")
    imbalance = None
    if imb is not None:
        imbalance = Imbalance(
            tuple(imb["amplitude"]),
            tuple(imb["phase_rad"]),
            imb.get("bias_amplitude", 1.0),
            imb.get("bias_phase_rad", 0.0),
        )
    return CircuitGraph(
        branches,
        bias_branch=bias_branch,
        imbalance=imbalance,
        bias_delta_length=data.get("bias_delta_length_um", 0.0),
        bias_n_eff=data.get("bias_n_eff", 2.4),
        channels=tuple(data.get("channels_nm", ())),
        probe_wavelength=data.get("probe_wavelength_nm", PROBE_WAVELENGTH_NM),
    )


def loads(text: str) -> CircuitGraph:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetlistError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return from_dict(data)


def load(path: str | Path) -> CircuitGraph:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise NetlistError(f"cannot read netlist {path}: {exc}") from exc
    try:
        return loads(text)
    except NetlistError as exc:
        raise NetlistError(f"{path}: {exc}") from exc


def _device_dict(dev) -> dict:
    if isinstance(dev, RingDevice):
        return {
            "kind": "ring",
            "r": dev.r,
            "a0": dev.a0,
            "roundtrip_length_um": dev.roundtrip_length,
            "n_eff0": dev.n_eff0,
            "n_group": dev.n_group,
            "dn_dV": dev.dn_dV,
            "da_dV": dev.da_dV,
            "voltage": dev.voltage,
            "reference_wavelength_nm": dev.reference_wavelength,
            "v_min": dev.v_min,
            "v_max": dev.v_max,
            "channel": dev.channel,
        }
    if isinstance(dev, PhaseShifterDevice):
        return {"kind": "phase_shifter", "phase_rad": dev.phase, "insertion_loss_db": dev.insertion_loss_db}
    er = dev.extinction_ratio_db
    return {"kind": "mzm", "phase_difference_rad": dev.phase_difference, "extinction_ratio_db": None if er == float("inf") else er}


def to_dict(circuit: CircuitGraph, *, name: str | None = None, description: str | None = None) -> dict:
    data: dict = {"schema_version": SCHEMA_VERSION}
    if name:
        data["name"] = name
    if description:
        data["description"] = description
    data["probe_wavelength_nm"] = circuit.probe_wavelength
    if circuit.channels:
        data["channels_nm"] = list(circuit.channels)
    data["fanout_n"] = circuit.n
    data["branches"] = [{"devices": [_device_dict(d) for d in chain]} for chain in circuit.branches]
    data["bias_branch"] = (
        None if circuit.bias_branch is None else {"devices": [_device_dict(d) for d in circuit.bias_branch]}
    )
    data["bias_delta_length_um"] = circuit.bias_delta_length
    data["bias_n_eff"] = circuit.bias_n_eff
    imb = circuit.imbalance
    data["imbalance"] = (
        None
        if imb is None
        else {
            "amplitude": list(imb.amplitude),
            "phase_rad": list(imb.phase),
            "bias_amplitude": imb.bias_amplitude,
            "bias_phase_rad": imb.bias_phase,
        }
    )
    return data


def dumps(circuit: CircuitGraph, **meta) -> str:
    return json.dumps(to_dict(circuit, **meta), indent=2) + "\n"


def bundled_names() -> list[str]:
    root = resources.files("wdipln") / "data" / "netlists"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str) -> Path:
    path = resources.files("wdipln") / "data" / "netlists" / f"{name}.json"
    if not path.is_file():
        raise NetlistError(f"no bundled netlist {name!r}; available: {', '.join(bundled_names())}")
    return Path(str(path))


def reference_circuits() -> dict[str, CircuitGraph]:
    """Circuits that the bundled netlists are generated from."""
    from .neuron import NeuronConfig, configure

    circuits = {}
    for k, label in enumerate(ADDSUB_PANELS):
        circuits[f"addsub_{label}"] = addsub_panel(k // 4 + 1, k % 4 + 1)
    gate = NeuronConfig(weights=(1.0, 1.0), inputs=(1.0, 1.0), bias=0.0)
    circuits["gate_neuron"] = configure(gate, "wdipln", input_encoding="binary")
    return circuits


def write_bundled(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, circuit in reference_circuits().items():
        path = directory / f"{name}.json"
        path.write_text(dumps(circuit, name=name))
        written.append(path)
    return written
