"""Numerical inversion of ring transmission: target magnitude -> bias voltage."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .devices import V_OFF, V_ON, RingDevice, allpass_response

ENCODING_TOL = 1e-6
CLAMP_TOL = 1e-3


class EncodingError(ValueError):
    """A requested magnitude is outside what the ring can reach."""


@dataclass(frozen=True)
class EncodingTable:
    """
    Calibrated magnitude-to-voltage map for one ring at one probe wavelength.

    The ring is nulled at ``v_null`` (resonance on the probe) and detuned by
    lowering the bias down to ``v_far``. Over that interval the probe
    magnitude rises monotonically from ``floor`` to ``full_scale``.

    With ``normalized`` False a target ``t`` is realised as physical
    amplitude ``t``; otherwise as ``t * full_scale``. Targets that fall
    outside the reachable band by less than ``CLAMP_TOL`` are clamped.
    """

    ring: RingDevice
    probe_wavelength: float
    v_null: float
    v_far: float
    floor: float
    full_scale: float
    normalized: bool = False
    v_on: float = V_ON
    v_off: float = V_OFF

    @classmethod
    def calibrate(
        cls,
        ring: RingDevice,
        probe_wavelength: float,
        *,
        max_detuning_linewidths: float | None = None,
        normalized: bool | None = None,
        v_null: float = V_OFF,
        v_on: float = V_ON,
    ) -> "EncodingTable":
        return _calibrate_cached(cls, ring, probe_wavelength, max_detuning_linewidths, normalized, v_null, v_on)

    @classmethod
    def _calibrate(
        cls,
        ring: RingDevice,
        probe_wavelength: float,
        max_detuning_linewidths: float | None,
        normalized: bool | None,
        v_null: float,
        v_on: float,
    ) -> "EncodingTable":
        if ring.dn_dV >= 0:
            raise EncodingError("encoding requires a blue-shifting ring (dn_dV < 0)")
        length_nm = ring.roundtrip_length * 1e3
        fsr = float(ring.fsr(probe_wavelength))
        if max_detuning_linewidths is None:
            dtheta = math.pi
        else:
            width = float(replace(ring, voltage=v_null).linewidth(probe_wavelength))
            dtheta = min(math.pi, 2 * math.pi * max_detuning_linewidths * width / fsr)
        dv = dtheta * probe_wavelength / (2 * math.pi * length_nm * ring.dn_dV)
        v_far = max(ring.v_min, v_null + dv)
        table = cls(
            ring=ring,
            probe_wavelength=probe_wavelength,
            v_null=v_null,
            v_far=v_far,
            floor=0.0,
            full_scale=1.0,
            normalized=(max_detuning_linewidths is not None) if normalized is None else normalized,
            v_on=v_on,
            v_off=v_null,
        )
        grid = np.linspace(v_far, v_null, 2001)
        mags = np.abs(table.response(grid))
        if np.any(np.diff(mags) > 1e-12):
            raise EncodingError("ring magnitude is not monotone over the encoding interval")
        return replace(table, floor=float(mags[-1]), full_scale=float(mags[0]))

    def response(self, voltages) -> np.ndarray:
        """Complex ring transmission at the probe for an array of biases."""
        v = np.asarray(voltages, dtype=float)
        ring = self.ring
        a = np.clip(ring.a0 + ring.da_dV * v, 0.0, 1.0)
        lam = self.probe_wavelength
        slope = (ring.n_eff0 - ring.n_group) / ring.reference_wavelength
        n = ring.n_eff0 + slope * (lam - ring.reference_wavelength) + ring.dn_dV * v
        theta = 2 * np.pi * n * ring.roundtrip_length * 1e3 / lam
        return allpass_response(a, ring.r, theta)

    def physical_amplitude(self, targets) -> np.ndarray:
        t = np.asarray(targets, dtype=float)
        if np.any(t < 0):
            raise EncodingError("target magnitudes must be non-negative")
        return t * self.full_scale if self.normalized else t

    def encode(self, targets) -> tuple[np.ndarray, np.ndarray]:
        """
        Bisection on bias for each target magnitude.

        Returns ``(voltages, residual_phases)`` with the same shape as
        ``targets``.
        """
        t = np.atleast_1d(np.asarray(targets, dtype=float))
        key = tuple(t.ravel().tolist())
        v, phase = _encode_cached(self, key)
        shape = np.shape(targets)
        return v.reshape(shape).copy(), phase.reshape(shape).copy()

    def encode_one(self, target: float) -> tuple[float, float]:
        v, phase = self.encode(np.array([target]))
        return float(v[0]), float(phase[0])

    def binary(self, bit: int) -> tuple[float, float]:
        """Global logic levels: 1 -> ``v_on``, 0 -> ``v_off``."""
        voltage = self.v_on if bit else self.v_off
        return voltage, float(np.angle(self.response(voltage)))

    def binary_amplitude(self, bit: int) -> float:
        return float(np.abs(self.response(self.v_on if bit else self.v_off)))

    def to_csv(self, targets=None) -> str:
        if targets is None:
            targets = np.linspace(0.0, 1.0, 101)
        volts, phases = self.encode(np.asarray(targets, dtype=float))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["target", "voltage_v", "residual_phase_rad", "amplitude"])
        amps = np.abs(self.response(volts))
        for row in zip(np.atleast_1d(targets), np.atleast_1d(volts), np.atleast_1d(phases), np.atleast_1d(amps)):
            writer.writerow([f"{x:.9f}" for x in row])
        return buf.getvalue()


@lru_cache(maxsize=512)
def _calibrate_cached(cls, *args) -> EncodingTable:
    # Tables are immutable, so calibrations are shared between circuits.
    return cls._calibrate(*args)


@lru_cache(maxsize=4096)
def _encode_cached(table: EncodingTable, key: tuple) -> tuple[np.ndarray, np.ndarray]:
    amp = table.physical_amplitude(np.array(key))
    lo_amp = table.floor
    hi_amp = table.full_scale
    if np.any(amp > hi_amp + CLAMP_TOL) or np.any(amp < lo_amp - CLAMP_TOL):
        bad = amp[(amp > hi_amp + CLAMP_TOL) | (amp < lo_amp - CLAMP_TOL)]
        raise EncodingError(
            f"magnitude {bad[0]:.6g} outside reachable range [{lo_amp:.6g}, {hi_amp:.6g}]"
        )
    amp = np.clip(amp, lo_amp, hi_amp)
    # |E| decreases with bias on [v_far, v_null].
    lo = np.full(amp.shape, table.v_far)
    hi = np.full(amp.shape, table.v_null)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        above = np.abs(table.response(mid)) > amp
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    v = 0.5 * (lo + hi)
    v = np.where(amp <= lo_amp, table.v_null, v)
    v = np.where(amp >= hi_amp, table.v_far, v)
    return v, np.angle(table.response(v))
