"""
Feed-forward circuit composition and topology builders.

A :class:`CircuitGraph` is a balanced N-way fan-out, N device chains and an
N-way fan-in. Each tree contributes 1/sqrt(N) per branch, so N identical
empty branches have unit transfer. An optional bias branch bypasses the
tree: the input is first split 2 ways between the bias path and the tree,
and the two are recombined by a 2-way combiner.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .devices import (
    PROBE_WAVELENGTH_NM,
    Device,
    MzmDevice,
    PhaseShifterDevice,
    RingDevice,
    calibrated_ring,
)
from .encoding import EncodingTable

DB_FLOOR = -300.0


@dataclass(frozen=True)
class Imbalance:
    """Static per-branch amplitude factors and phase offsets [rad]."""

    amplitude: tuple[float, ...]
    phase: tuple[float, ...]
    bias_amplitude: float = 1.0
    bias_phase: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "amplitude", tuple(float(x) for x in self.amplitude))
        object.__setattr__(self, "phase", tuple(float(x) for x in self.phase))
        if len(self.amplitude) != len(self.phase):
            raise ValueError("imbalance amplitude and phase lengths differ")
        if any(not math.isfinite(x) or x < 0 for x in self.amplitude + (self.bias_amplitude,)):
            raise ValueError("imbalance amplitudes must be finite and non-negative")

    @classmethod
    def identity(cls, n: int) -> "Imbalance":
        return cls((1.0,) * n, (0.0,) * n)

    @classmethod
    def sample(
        cls,
        n: int,
        rng: np.random.Generator,
        amplitude_spread: float,
        phase_spread: float,
    ) -> "Imbalance":
        """
        Uniform draws: amplitude factor in [1 - amplitude_spread, 1] and phase
        in [-phase_spread, phase_spread]. The same generator state scaled by a
        larger spread gives a larger perturbation.
        """
        u_amp = rng.uniform(0.0, 1.0, n + 1)
        u_phase = rng.uniform(-1.0, 1.0, n + 1)
        amp = np.clip(1.0 - amplitude_spread * u_amp, 0.0, None)
        phase = phase_spread * u_phase
        return cls(tuple(amp[:n]), tuple(phase[:n]), float(amp[n]), float(phase[n]))

    def factors(self) -> np.ndarray:
        return np.asarray(self.amplitude) * np.exp(1j * np.asarray(self.phase))

    def bias_factor(self) -> complex:
        return self.bias_amplitude * complex(math.cos(self.bias_phase), math.sin(self.bias_phase))


@dataclass(frozen=True)
class CircuitGraph:
    branches: tuple[tuple[Device, ...], ...]
    bias_branch: tuple[Device, ...] | None = None
    imbalance: Imbalance | None = None
    bias_delta_length: float = 0.0  # um, bias path shorter/longer than the tree
    bias_n_eff: float = 2.4
    channels: tuple[float, ...] = ()
    probe_wavelength: float = PROBE_WAVELENGTH_NM

    def __post_init__(self) -> None:
        branches = tuple(tuple(chain) for chain in self.branches)
        if not branches:
            raise ValueError("circuit needs at least one branch")
        for chain in branches + ((tuple(self.bias_branch),) if self.bias_branch is not None else ()):
            for dev in chain:
                if not isinstance(dev, (RingDevice, PhaseShifterDevice, MzmDevice)):
                    raise TypeError(f"unsupported device {dev!r}")
        object.__setattr__(self, "branches", branches)
        if self.bias_branch is not None:
            object.__setattr__(self, "bias_branch", tuple(self.bias_branch))
        if self.imbalance is not None and len(self.imbalance.amplitude) != len(branches):
            raise ValueError("imbalance must list one entry per branch")
        object.__setattr__(self, "channels", tuple(float(c) for c in self.channels))

    @property
    def n(self) -> int:
        return len(self.branches)

    def devices(self):
        for chain in self.branches:
            yield from chain
        if self.bias_branch is not None:
            yield from self.bias_branch

    def ring_count(self) -> int:
        return sum(isinstance(d, RingDevice) for d in self.devices())

    def with_imbalance(self, imbalance: Imbalance | None) -> "CircuitGraph":
        return replace(self, imbalance=imbalance)

    def isolate_channel(self, channel: int) -> "CircuitGraph":
        """Drop every ring tagged with a different WDM channel."""

        def keep(dev):
            return not (isinstance(dev, RingDevice) and dev.channel is not None and dev.channel != channel)

        branches = tuple(tuple(d for d in chain if keep(d)) for chain in self.branches)
        bias = None if self.bias_branch is None else tuple(d for d in self.bias_branch if keep(d))
        return replace(self, branches=branches, bias_branch=bias)


def _chain_transfer(chain: Sequence[Device], lam: np.ndarray) -> np.ndarray:
    out = np.ones(lam.shape, dtype=complex)
    for dev in chain:
        out = out * dev.transfer(lam)
    return out


def evaluate(circuit: CircuitGraph, wavelength):
    """Complex output field for unit input at ``wavelength`` [nm]."""
    lam = np.asarray(wavelength, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("wavelength must be positive")
    factors = (
        np.ones(circuit.n, dtype=complex) if circuit.imbalance is None else circuit.imbalance.factors()
    )
    tree = np.zeros(lam.shape, dtype=complex)
    for k, chain in enumerate(circuit.branches):
        tree = tree + factors[k] * _chain_transfer(chain, lam)
    tree = tree / circuit.n
    if circuit.bias_branch is None:
        out = tree
    else:
        bias = _chain_transfer(circuit.bias_branch, lam) * np.exp(
            2j * np.pi * circuit.bias_delta_length * 1e3 * circuit.bias_n_eff / lam
        )
        if circuit.imbalance is not None:
            bias = bias * circuit.imbalance.bias_factor()
        out = 0.5 * (bias + tree)
    return complex(out) if lam.ndim == 0 else out


@dataclass(frozen=True)
class SpectralGrid:
    start: float  # nm
    stop: float  # nm
    step: float  # pm

    def __post_init__(self) -> None:
        if not self.start < self.stop:
            raise ValueError("grid start must be below stop")
        if not self.step > 0:
            raise ValueError("grid step must be positive")

    @classmethod
    def around(cls, center: float, half_width_pm: float, step_pm: float = 1.0) -> "SpectralGrid":
        return cls(center - half_width_pm * 1e-3, center + half_width_pm * 1e-3, step_pm)

    @property
    def count(self) -> int:
        return int(math.floor((self.stop - self.start) / (self.step * 1e-3) + 1e-9)) + 1

    def wavelengths(self) -> np.ndarray:
        return self.start + np.arange(self.count) * (self.step * 1e-3)


@dataclass(frozen=True)
class SweepResult:
    wavelength: np.ndarray
    transmission_db: np.ndarray
    phase: np.ndarray
    field: np.ndarray = field(repr=False, compare=False, default=None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["wavelength_nm", "transmission_db", "phase_rad"])
        for lam, db, ph in zip(self.wavelength, self.transmission_db, self.phase):
            writer.writerow([f"{lam:.6f}", f"{db:.9f}", f"{ph:.9f}"])
        return buf.getvalue()

    def value_at(self, wavelength: float) -> float:
        idx = int(np.argmin(np.abs(self.wavelength - wavelength)))
        return float(self.transmission_db[idx])


def to_db(field_values) -> np.ndarray:
    p = np.abs(np.asarray(field_values)) ** 2
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(p)
    return np.maximum(db, DB_FLOOR)


def sweep(circuit: CircuitGraph, grid: SpectralGrid) -> SweepResult:
    lam = grid.wavelengths()
    out = evaluate(circuit, lam)
    return SweepResult(lam, to_db(out), np.unwrap(np.angle(out)), out)


def count_dips(result: SweepResult, prominence_db: float = 1.0) -> int:
    """Number of transmission minima standing out by ``prominence_db``."""
    peaks, _ = find_peaks(-result.transmission_db, prominence=prominence_db)
    return int(len(peaks))


# ---------------------------------------------------------------- builders


def _sign_phase(value: float) -> float:
    return math.pi if value < 0 else 0.0


def _wrap(phase: float) -> float:
    return float(math.remainder(phase, 2 * math.pi))


def _as_matrix(values, m: int, n: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1 and m == 1:
        arr = arr[None, :]
    if arr.shape != (m, n):
        raise ValueError(f"{name} must have shape ({m}, {n}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _check_unit(values: np.ndarray, name: str, signed: bool) -> None:
    mags = np.abs(values) if signed else values
    if np.any(mags < 0) or np.any(mags > 1.0 + 1e-12):
        rng = "[-1, 1]" if signed else "[0, 1]"
        raise ValueError(f"{name} must lie in {rng}")


def build_coln(n: int, weights, inputs, *, extinction_ratio_db: float = math.inf) -> CircuitGraph:
    """MZM-based coherent linear neuron: input MZM, weight MZM, sign shifter."""
    if n < 1:
        raise ValueError("n must be at least 1")
    w = _as_matrix(weights, 1, n, "weights")[0]
    x = _as_matrix(inputs, 1, n, "inputs")[0]
    _check_unit(w, "weights", signed=True)
    _check_unit(x, "inputs", signed=False)
    branches = []
    for wn, xn in zip(w, x):
        branches.append(
            (
                MzmDevice(2 * math.acos(min(1.0, xn)), extinction_ratio_db),
                MzmDevice(2 * math.acos(min(1.0, abs(wn))), extinction_ratio_db),
                PhaseShifterDevice(_sign_phase(wn)),
            )
        )
    return CircuitGraph(tuple(branches))


def _compensating_phase(sign: float, chain: Sequence[Device], wavelengths: Sequence[float]) -> float:
    # Cancel the residual ring phase; several channels share one broadband
    # shifter, so use their circular mean.
    lam = np.asarray(wavelengths, dtype=float)
    residual = _chain_transfer(chain, lam)
    mean = np.angle(np.sum(residual / np.maximum(np.abs(residual), 1e-300)))
    return _wrap(_sign_phase(sign) - float(mean))


def _branch_signs(w: np.ndarray) -> np.ndarray:
    signs = []
    for col in w.T:
        nonzero = col[col != 0]
        if nonzero.size and not (np.all(nonzero > 0) or np.all(nonzero < 0)):
            raise ValueError(
                "weights on one branch must share a sign across channels "
                "(one phase shifter per branch)"
            )
        signs.append(-1.0 if nonzero.size and nonzero[0] < 0 else 1.0)
    return np.asarray(signs)


def _check_collisions(circuit: CircuitGraph) -> None:
    for chain in circuit.branches:
        rings = [d for d in chain if isinstance(d, RingDevice) and d.channel is not None]
        for i, ri in enumerate(rings):
            res_i = ri.resonance_near(circuit.channels[ri.channel])
            for rj in rings[i + 1 :]:
                if rj.channel == ri.channel:
                    continue
                nearest = rj.resonance_near(res_i)
                width = max(float(ri.linewidth(res_i)), float(rj.linewidth(nearest)))
                if abs(nearest - res_i) < width:
                    raise ValueError(
                        f"channel collision: rings for channels {ri.channel} and {rj.channel} "
                        f"resonate within one linewidth near {res_i:.4f} nm"
                    )


def _bias_chain(
    bias: float,
    scale: float,
    probe: float,
    ring_kwargs: dict,
    delta_length: float,
    n_eff: float,
) -> tuple[Device, ...]:
    """Bias ring plus sign shifter; ``bias`` is in units of one full-scale product."""
    ring = calibrated_ring(probe, **ring_kwargs)
    table = EncodingTable.calibrate(ring, probe)
    path_phase = 2 * math.pi * delta_length * 1e3 * n_eff / probe
    if bias == 0:
        # Unused bias line: ring nulled, shifter
        # in quadrature so its leakage adds no first-order error.
        v, residual = table.binary(0)
        return (replace(ring, voltage=v), PhaseShifterDevice(_wrap(math.pi / 2 - residual - path_phase)))
    v, residual = table.encode_one(abs(bias) * scale)
    return (replace(ring, voltage=v), PhaseShifterDevice(_wrap(_sign_phase(bias) - residual - path_phase)))


def build_wdipln_naive(
    n: int,
    m: int,
    weights,
    inputs,
    channel_spacing: float,
    *,
    probe_wavelength: float = PROBE_WAVELENGTH_NM,
    bias: float | None = None,
    input_encoding: str = "continuous",
    ring_kwargs: dict | None = None,
    channel_detuning_linewidths: float = 3.0,
    min_spacing_linewidths: float = 10.0,
    bias_delta_length: float = 0.0,
) -> CircuitGraph:
    """
    Ring-for-MZM replacement: per branch, one input ring and one weight ring
    per channel, followed by a sign phase shifter.

    ``weights`` and ``inputs`` are (m, n) arrays (1-D allowed for m = 1).
    With ``input_encoding="binary"`` inputs must be 0/1 and use the global
    on/off biases. ``bias`` (m = 1 only) adds the bias line of the logic
    gate circuit, in the same units as the sum of products, so the circuit
    computes (sum(w * x) + bias) / n relative to the all-ones reference.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    ring_kwargs = dict(ring_kwargs or {})
    w = _as_matrix(weights, m, n, "weights")
    x = _as_matrix(inputs, m, n, "inputs")
    _check_unit(w, "weights", signed=True)
    _check_unit(x, "inputs", signed=False)
    if bias is not None and m != 1:
        raise ValueError("a bias line is only supported for single-channel circuits")
    channels = [probe_wavelength + j * channel_spacing for j in range(m)]
    proto = calibrated_ring(probe_wavelength, **ring_kwargs)
    if m > 1 and channel_spacing < min_spacing_linewidths * float(proto.linewidth(probe_wavelength)):
        raise ValueError("channel spacing is below the minimum isolation spacing")
    signs = _branch_signs(w)

    detune = None if m == 1 else channel_detuning_linewidths
    tables = [
        EncodingTable.calibrate(
            calibrated_ring(lam, channel=j if m > 1 else None, **ring_kwargs),
            lam,
            max_detuning_linewidths=detune,
        )
        for j, lam in enumerate(channels)
    ]
    x_scale = min(1.0, tables[0].full_scale)
    if input_encoding == "binary":
        if not np.all((x == 0) | (x == 1)):
            raise ValueError("binary encoding needs inputs in {0, 1}")
        x_scale = tables[0].binary_amplitude(1)
    elif input_encoding != "continuous":
        raise ValueError(f"unknown input encoding {input_encoding!r}")

    branches = []
    for k in range(n):
        chain: list[Device] = []
        for j, table in enumerate(tables):
            if input_encoding == "binary":
                vx, _ = table.binary(int(x[j, k]))
            else:
                vx, _ = table.encode_one(x[j, k])
            vw, _ = table.encode_one(abs(w[j, k]))
            chain.append(replace(table.ring, voltage=vx))
            chain.append(replace(table.ring, voltage=vw))
        chain.append(PhaseShifterDevice(_compensating_phase(signs[k], chain, channels)))
        branches.append(tuple(chain))

    bias_branch = None
    if bias is not None:
        # Reference product amplitude of one all-ones branch.
        unit = x_scale * min(1.0, tables[0].full_scale)
        bias_branch = _bias_chain(bias / n, unit, probe_wavelength, ring_kwargs, bias_delta_length, 2.4)
    circuit = CircuitGraph(
        tuple(branches),
        bias_branch=bias_branch,
        bias_delta_length=bias_delta_length,
        channels=tuple(channels),
        probe_wavelength=probe_wavelength,
    )
    if m > 1:
        _check_collisions(circuit)
    return circuit


def large_ring_length(channel_spacing: float, wavelength: float = PROBE_WAVELENGTH_NM, n_group: float = 4.2) -> float:
    """Round-trip length [um] giving FSR = ``channel_spacing`` at ``wavelength``."""
    return wavelength**2 / (n_group * channel_spacing) / 1e3


def build_wdipln_nominal(
    n: int,
    m: int,
    weights,
    inputs,
    channel_spacing: float,
    *,
    probe_wavelength: float = PROBE_WAVELENGTH_NM,
    ring_kwargs: dict | None = None,
    large_ring: RingDevice | None = None,
    channel_detuning_linewidths: float = 3.0,
    min_spacing_linewidths: float = 10.0,
) -> CircuitGraph:
    """
    One large input ring per branch (FSR equal to the channel spacing) and
    one small weight ring per channel.

    ``inputs`` may be a length-n vector or an (m, n) array with identical
    rows, since the large ring imposes one value on every channel.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    ring_kwargs = dict(ring_kwargs or {})
    w = _as_matrix(weights, m, n, "weights")
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 2:
        if x.shape != (m, n) or not np.all(x == x[0]):
            raise ValueError("nominal WDIPLN inputs must be identical across channels")
        x = x[0]
    x = _as_matrix(x, 1, n, "inputs")[0]
    _check_unit(w, "weights", signed=True)
    _check_unit(x, "inputs", signed=False)

    if large_ring is None:
        large_kwargs = dict(ring_kwargs)
        large_kwargs["roundtrip_length"] = large_ring_length(
            channel_spacing, probe_wavelength, large_kwargs.get("n_group", 4.2)
        )
        large_kwargs["on_detuning_nm"] = 0.4 * channel_spacing
        large_ring = calibrated_ring(probe_wavelength, **large_kwargs)
    fsr = float(large_ring.fsr(probe_wavelength))
    if abs(fsr - channel_spacing) > 0.01 * channel_spacing:
        raise ValueError(
            f"large ring FSR {fsr:.4f} nm does not match channel spacing {channel_spacing:.4f} nm"
        )
    # Channels sit on the large ring's comb so every channel sees one input.
    channels = [large_ring.resonance_near(probe_wavelength + j * channel_spacing) for j in range(m)]

    proto = calibrated_ring(probe_wavelength, **ring_kwargs)
    if m > 1 and channel_spacing < min_spacing_linewidths * float(proto.linewidth(probe_wavelength)):
        raise ValueError("channel spacing is below the minimum isolation spacing")
    signs = _branch_signs(w)
    input_table = EncodingTable.calibrate(large_ring, probe_wavelength)
    detune = None if m == 1 else channel_detuning_linewidths
    tables = [
        EncodingTable.calibrate(
            calibrated_ring(lam, channel=j if m > 1 else None, **ring_kwargs),
            lam,
            max_detuning_linewidths=detune,
        )
        for j, lam in enumerate(channels)
    ]
    branches = []
    for k in range(n):
        vx, _ = input_table.encode_one(x[k])
        chain: list[Device] = [replace(large_ring, voltage=vx)]
        for j, table in enumerate(tables):
            vw, _ = table.encode_one(abs(w[j, k]))
            chain.append(replace(table.ring, voltage=vw))
        chain.append(PhaseShifterDevice(_compensating_phase(signs[k], chain, channels)))
        branches.append(tuple(chain))
    circuit = CircuitGraph(tuple(branches), channels=tuple(channels), probe_wavelength=probe_wavelength)
    if m > 1:
        _check_collisions(circuit)
    return circuit


def build_addsub(
    ring_states: Sequence[float],
    phase0: float,
    phase1: float,
    *,
    ring_kwargs: dict | None = None,
    bias_delta_length: float = 0.0,
    imbalance: Imbalance | None = None,
    insertion_loss_db: float = 0.0,
) -> CircuitGraph:
    """
    Three-ring add/subtract circuit: bias line (R0, PS0) in parallel with a
    two-branch tree (R1, PS1) and (R2).

    ``ring_states`` are the resonance wavelengths [nm] of R0, R1, R2.
    """
    if len(ring_states) != 3:
        raise ValueError("ring_states needs three resonance wavelengths")
    ring_kwargs = dict(ring_kwargs or {})
    r0, r1, r2 = (calibrated_ring(float(lam), **ring_kwargs) for lam in ring_states)
    ps = dict(insertion_loss_db=insertion_loss_db)
    return CircuitGraph(
        branches=((r1, PhaseShifterDevice(phase1, **ps)), (r2,)),
        bias_branch=(r0, PhaseShifterDevice(phase0, **ps)),
        imbalance=imbalance,
        bias_delta_length=bias_delta_length,
        probe_wavelength=float(ring_states[1]),
    )


# ------------------------------------------------- add/subtract experiment

ADDSUB_PANELS = ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x", "xi", "xii")
# (PS0, PS1) per column: +R0+R1+R2, -R0+R1+R2, +R0-R1+R2, -R0-R1+R2.
ADDSUB_COLUMNS = ((0.0, 0.0), (math.pi, 0.0), (0.0, math.pi), (math.pi, math.pi))
# Resonance offsets [nm] of R0, R1, R2 per row.
ADDSUB_ROWS = ((0.0, 0.0, 0.0), (-0.3, 0.0, 0.0), (-0.3, 0.0, 0.3))
ADDSUB_HALF_WIDTH_PM = 600.0
# Unequal bias-path loss and a small phase error; floors the null near -33 dB.
ADDSUB_HARDWARE_IMBALANCE = Imbalance((1.0, 1.0), (0.0, 0.0), bias_amplitude=0.97, bias_phase=0.03)


def addsub_panel(
    row: int,
    column: int,
    *,
    probe_wavelength: float = PROBE_WAVELENGTH_NM,
    imbalance: Imbalance | None = None,
) -> CircuitGraph:
    """Panel at 1-based ``row`` (1-3) and ``column`` (1-4) of the add/subtract matrix."""
    if not (1 <= row <= 3 and 1 <= column <= 4):
        raise ValueError("row must be 1-3 and column 1-4")
    states = [probe_wavelength + d for d in ADDSUB_ROWS[row - 1]]
    phase0, phase1 = ADDSUB_COLUMNS[column - 1]
    return build_addsub(states, phase0, phase1, imbalance=imbalance)


def addsub_panel_name(row: int, column: int) -> str:
    return ADDSUB_PANELS[(row - 1) * 4 + (column - 1)]
