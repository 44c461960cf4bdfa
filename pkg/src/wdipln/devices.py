"""
Photonic device models.

Every element is a frozen dataclass with a ``transfer(wavelength)`` method
returning the complex field transmission coefficient. Field amplitudes are
plain Python/numpy complex values; power is ``abs(E)**2``.

Units: wavelengths in nm, lengths in um, voltages in V, phases in rad.

The all-pass ring follows

    E(lambda; V) = exp(i(pi + theta)) (a - r exp(-i theta)) / (1 - r a exp(i theta))

with theta = 2 pi n(lambda, V) L / lambda and kappa**2 + r**2 = 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq

Wavelength = Union[float, np.ndarray]

# Operating point used throughout the logic-gate experiment.
PROBE_WAVELENGTH_NM = 1526.0
V_ON = 1.2
V_OFF = 1.4
V_CRITICAL = 1.1

CRITICAL_TOL = 1e-9


class OutOfEnvelopeError(ValueError):
    """A device was configured outside its allowed operating range."""


def power(field: ArrayLike) -> np.ndarray | float:
    """Optical power (squared magnitude) of a field amplitude."""
    return np.abs(field) ** 2


def _check_wavelength(wavelength: Wavelength) -> np.ndarray:
    lam = np.asarray(wavelength, dtype=float)
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise ValueError(f"wavelength must be positive, got {wavelength!r}")
    return lam


def _scalarize(value: np.ndarray, like: Wavelength):
    return complex(value) if np.ndim(like) == 0 else value


class CouplingRegime(enum.Enum):
    OVER_COUPLED = "over"
    CRITICALLY_COUPLED = "critical"
    UNDER_COUPLED = "under"


def coupling_regime(a: float, r: float, tol: float = CRITICAL_TOL) -> CouplingRegime:
    if abs(a - r) <= tol:
        return CouplingRegime.CRITICALLY_COUPLED
    return CouplingRegime.OVER_COUPLED if a > r else CouplingRegime.UNDER_COUPLED


def allpass_response(a, r, theta):
    """Ring field transmission as a function of round-trip phase ``theta``."""
    z = np.exp(1j * np.asarray(theta, dtype=float))
    return -z * (a - r / z) / (1.0 - r * a * z)


@dataclass(frozen=True)
class RingDevice:
    """
    All-pass micro-ring resonator with a linearised voltage model.

    Parameters
    ----------
    r : float
        Self-coupling coefficient, 0 <= r < 1. The cross coupling is derived.
    a0 : float
        Round-trip amplitude at zero bias, 0 < a0 <= 1.
    roundtrip_length : float
        Cavity round-trip length [um].
    n_eff0 : float
        Effective index at zero bias and ``reference_wavelength``.
    n_group : float
        Group index; sets the first-order dispersion of n_eff.
    dn_dV : float
        Effective-index change per volt (negative: blue shift with bias).
    da_dV : float
        Round-trip amplitude change per volt.
    voltage : float
        Applied bias [V].
    reference_wavelength : float
        Wavelength at which ``n_eff0`` is specified [nm].
    v_min, v_max : float
        Allowed bias envelope [V].
    channel : int or None
        Optional WDM channel tag used by multi-channel builders.
    """

    r: float
    a0: float
    roundtrip_length: float
    n_eff0: float
    n_group: float
    dn_dV: float = 0.0
    da_dV: float = 0.0
    voltage: float = 0.0
    reference_wavelength: float = PROBE_WAVELENGTH_NM
    v_min: float = -2.0
    v_max: float = 2.0
    channel: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.r < 1.0:
            raise ValueError(f"self-coupling r must lie in [0, 1), got {self.r}")
        if not 0.0 < self.a0 <= 1.0:
            raise ValueError(f"round-trip amplitude a0 must lie in (0, 1], got {self.a0}")
        if self.roundtrip_length <= 0:
            raise ValueError("roundtrip_length must be positive")
        if self.n_group <= 0 or self.n_eff0 <= 0:
            raise ValueError("indices must be positive")
        if self.v_min > self.v_max:
            raise ValueError("v_min exceeds v_max")

    @property
    def kappa(self) -> float:
        return math.sqrt(1.0 - self.r**2)

    @property
    def a(self) -> float:
        """Round-trip amplitude at the current bias, clamped to [0, 1]."""
        return min(1.0, max(0.0, self.a0 + self.da_dV * self.voltage))

    @property
    def regime(self) -> CouplingRegime:
        return coupling_regime(self.a, self.r)

    def n_eff(self, wavelength: Wavelength) -> np.ndarray:
        lam = np.asarray(wavelength, dtype=float)
        slope = (self.n_eff0 - self.n_group) / self.reference_wavelength
        return self.n_eff0 + slope * (lam - self.reference_wavelength) + self.dn_dV * self.voltage

    def roundtrip_phase(self, wavelength: Wavelength) -> np.ndarray:
        lam = _check_wavelength(wavelength)
        return 2.0 * np.pi * self.n_eff(lam) * self.roundtrip_length * 1e3 / lam

    def fsr(self, wavelength: Wavelength) -> np.ndarray:
        """Free spectral range lambda**2 / (n_g L) [nm]."""
        lam = _check_wavelength(wavelength)
        return lam**2 / (self.n_group * self.roundtrip_length * 1e3)

    def linewidth(self, wavelength: Wavelength) -> np.ndarray:
        """Full width at half depth of the resonance [nm]."""
        ra = self.r * self.a
        return self.fsr(wavelength) * (1.0 - ra) / (np.pi * np.sqrt(ra))

    def resonance_near(self, wavelength: float) -> float:
        """Resonant wavelength closest to ``wavelength`` at the current bias [nm]."""
        theta = float(self.roundtrip_phase(wavelength))
        order = round(theta / (2.0 * np.pi))
        half = 0.6 * float(self.fsr(wavelength))
        return brentq(
            lambda lam: float(self.roundtrip_phase(lam)) - 2.0 * np.pi * order,
            wavelength - half,
            wavelength + half,
            xtol=1e-12,
        )

    def transfer(self, wavelength: Wavelength):
        return ring_transfer(self, wavelength)


@dataclass(frozen=True)
class PhaseShifterDevice:
    phase: float = 0.0
    insertion_loss_db: float = 0.0

    def __post_init__(self) -> None:
        if self.insertion_loss_db < 0:
            raise ValueError("insertion loss must be non-negative")

    def transfer(self, wavelength: Wavelength):
        coef = np.exp(1j * self.phase) * 10.0 ** (-self.insertion_loss_db / 20.0)
        if np.ndim(wavelength) == 0:
            return complex(coef)
        return np.full(np.shape(wavelength), coef, dtype=complex)


@dataclass(frozen=True)
class MzmDevice:
    """
    Push-pull Mach-Zehnder modulator.

    A finite extinction ratio is modelled as a split-ratio imbalance delta,
    giving ``cos(dphi/2) + i delta sin(dphi/2)``; ``|E|`` is 1 at dphi = 0
    and ``delta = 10**(-ER/20)`` at dphi = pi.
    """

    phase_difference: float = 0.0
    extinction_ratio_db: float = math.inf

    def __post_init__(self) -> None:
        if not self.extinction_ratio_db >= 0:
            raise ValueError("extinction ratio must be non-negative")

    @property
    def leakage(self) -> float:
        if math.isinf(self.extinction_ratio_db):
            return 0.0
        return 10.0 ** (-self.extinction_ratio_db / 20.0)

    def transfer(self, wavelength: Wavelength):
        half = 0.5 * self.phase_difference
        coef = math.cos(half) + 1j * self.leakage * math.sin(half)
        if np.ndim(wavelength) == 0:
            return complex(coef)
        return np.full(np.shape(wavelength), coef, dtype=complex)


Device = Union[RingDevice, PhaseShifterDevice, MzmDevice]


def ring_transfer(ring: RingDevice, wavelength: Wavelength):
    """Complex through-port transmission of ``ring`` at ``wavelength`` [nm]."""
    theta = ring.roundtrip_phase(wavelength)
    return _scalarize(allpass_response(ring.a, ring.r, theta), wavelength)


def phase_shifter_transfer(ps: PhaseShifterDevice, field):
    return field * ps.transfer(1.0)


def mzm_transfer(mzm: MzmDevice, field):
    return field * mzm.transfer(1.0)


def apply_bias(ring: RingDevice, voltage: float) -> RingDevice:
    if not ring.v_min <= voltage <= ring.v_max:
        raise OutOfEnvelopeError(
            f"bias {voltage} V outside operating range [{ring.v_min}, {ring.v_max}] V"
        )
    return replace(ring, voltage=float(voltage))


def _phase_change(func, x0: float, x1: float, depth: int = 0) -> float:
    # Adaptive unwrap: split any interval whose phase step is not small.
    step = float(np.angle(func(x1) / func(x0)))
    if abs(step) < 0.5 or depth > 60:
        return step
    mid = 0.5 * (x0 + x1)
    return _phase_change(func, x0, mid, depth + 1) + _phase_change(func, mid, x1, depth + 1)


def ring_phase_winding(ring: RingDevice, sweep: ArrayLike) -> int:
    """
    Number of 2 pi phase wraps of the ring response across ``sweep``.

    ``sweep`` is an increasing array of wavelengths spanning one resonance
    with margin on both sides. The winding is counted along increasing
    round-trip phase (decreasing wavelength), so an over-coupled ring gives 1
    and an under-coupled ring 0.
    """
    lam = _check_wavelength(sweep)
    if lam.ndim != 1 or lam.size < 16:
        raise ValueError("sweep needs at least 16 samples")
    if np.any(np.diff(lam) <= 0):
        raise ValueError("sweep must be strictly increasing")

    def response(x):
        value = ring_transfer(ring, x)
        # A field that is exactly zero has no phase; nudge off the null.
        return value if value != 0 else ring_transfer(ring, x + 1e-9)

    total = 0.0
    for lo, hi in zip(lam[-1:0:-1], lam[-2::-1]):
        total += _phase_change(response, float(lo), float(hi))
    return int(round(total / (2.0 * np.pi)))


@dataclass(frozen=True)
class DiodeModel:
    """
    Placeholder forward-bias diode used only for tuning-power estimates.

    Defaults put the electrical power near 12 mW at 1.4 V; no measured I-V
    curve backs this.
    """

    saturation_current: float = 1.48e-14  # A
    ideality: float = 2.0
    thermal_voltage: float = 0.025852  # V at 300 K

    def current(self, voltage: float) -> float:
        return self.saturation_current * math.expm1(voltage / (self.ideality * self.thermal_voltage))

    def power_mw(self, voltage: float) -> float:
        return 1e3 * voltage * self.current(voltage)


def calibrated_ring(
    resonance_wavelength: float = PROBE_WAVELENGTH_NM,
    *,
    r: float = 0.99,
    roundtrip_length: float = 2 * math.pi * 10.0,
    n_eff: float = 2.4,
    n_group: float = 4.2,
    v_on: float = V_ON,
    v_off: float = V_OFF,
    v_critical: float = V_CRITICAL,
    on_detuning_nm: float = 0.8,
    da_dV: float = -1e-5,
    channel: int | None = None,
) -> RingDevice:
    """
    Build a ring whose resonance sits on ``resonance_wavelength`` at ``v_off``.

    Lowering the bias red-shifts the resonance; at ``v_on`` it is detuned by
    ``on_detuning_nm``. The round-trip amplitude crosses ``r`` at
    ``v_critical`` so every bias above it is under-coupled.
    """
    if v_on >= v_off:
        raise ValueError("v_on must be below v_off")
    length_nm = roundtrip_length * 1e3
    dn_dV = -(on_detuning_nm / (v_off - v_on)) * n_group / resonance_wavelength
    order = round(n_eff * length_nm / resonance_wavelength)
    n_at_off = order * resonance_wavelength / length_nm
    a0 = r - da_dV * v_critical
    if not 0 < a0 <= 1:
        raise ValueError(f"calibration gives unphysical a0={a0}")
    return RingDevice(
        r=r,
        a0=a0,
        roundtrip_length=roundtrip_length,
        n_eff0=n_at_off - dn_dV * v_off,
        n_group=n_group,
        dn_dV=dn_dV,
        da_dV=da_dV,
        voltage=v_off,
        reference_wavelength=resonance_wavelength,
        channel=channel,
    )
