"""Pulse shapes, modulation schemes and area rules.

The drive consists of a shared Gaussian envelope split between a pump and a
Stokes field. In the modulated (DE) scheme the pump rides on sin(w_e t) and
the Stokes on cos(w_e t + phi), which zeroes the one-photon pulse areas while
keeping a two-photon coupling. The unmodulated (AE) scheme applies the same
envelope to both fields and relies on single-photon detuning instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.integrate import quad

from .core import Operator3, expm_hermitian
from .errors import UnsupportedSchemeError, ValidationError

#: Pump coupling |+1><0| + h.c. (impulse-normalized, no field factor).
H_PUMP = np.array([[0, 0.5, 0], [0.5, 0, 0], [0, 0, 0]], dtype=complex)
#: Stokes coupling |-1><0| + h.c.
H_STOKES = np.array([[0, 0, 0], [0, 0, 0.5], [0, 0.5, 0]], dtype=complex)
#: Ground-ground target coupling 2i[H_STOKES, H_PUMP] = (i/2)|-1><+1| + h.c.
H_TARGET = np.array([[0, 0, -0.5j], [0, 0, 0], [0.5j, 0, 0]], dtype=complex)

#: Residual-area bound for the truncated envelope, relative to the full area.
RESIDUAL_AREA_TOL = 1e-6


class Scheme(str, Enum):
    DE = "de"
    AE = "ae"
    FOUR_PULSE_TRAIN = "four_pulse_train"


@dataclass(frozen=True)
class PulseSpec:
    """Full description of the drive fields.

    ``area`` is the envelope area S = integral of sqrt(Omega_p^2 + Omega_s^2)
    for the balanced reference configuration; it fixes the shared envelope
    peak (see ``peak_rabi``). ``window`` is the half-support T_c of the
    truncated envelope. ``train_area`` is the per-pulse area of the
    impulsive four-pulse sequence and only applies to that scheme.
    """

    scheme: Scheme = Scheme.DE
    area: float = 10.0 * math.pi
    t_p: float = 1.0
    omega_e: float | None = None
    phi: float = 0.0
    amp_p: float = 1.0
    amp_s: float = 1.0
    window: float | None = None
    train_area: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.window is None:
            object.__setattr__(self, "window", 4.0 * self.t_p)
        if self.t_p <= 0:
            raise ValidationError("pulse duration t_p must be positive")
        if self.area < 0:
            raise ValidationError("envelope area must be non-negative")
        if self.scheme is Scheme.DE:
            if self.omega_e is None or self.omega_e <= 0:
                raise ValidationError("DE scheme requires a positive modulation frequency")
        if self.scheme is Scheme.FOUR_PULSE_TRAIN:
            if self.train_area is None or self.train_area < 0:
                raise ValidationError("four-pulse scheme requires a non-negative train_area")
        # Truncating a Gaussian at T_c leaves a relative residual erfc(T_c/t_p).
        if self.scheme is not Scheme.FOUR_PULSE_TRAIN:
            residual = math.erfc(self.window / self.t_p)
            if residual >= RESIDUAL_AREA_TOL:
                raise ValidationError(
                    f"window {self.window} leaves residual envelope area "
                    f"{residual:.2e} relative, above {RESIDUAL_AREA_TOL}"
                )

    @classmethod
    def from_mixing_angle(cls, alpha: float, **kwargs) -> "PulseSpec":
        """Amplitude factors parameterized as (cos alpha, sin alpha)."""
        return cls(amp_p=math.cos(alpha), amp_s=math.sin(alpha), **kwargs)

    @property
    def peak_rabi(self) -> float:
        """Shared envelope peak Omega_0 implied by the nominal area.

        For the modulated scheme the balanced quadrature components satisfy
        Omega_p^2 + Omega_s^2 = Omega^2, so S = sqrt(pi) Omega_0 t_p. For the
        unmodulated scheme both fields carry the full envelope and the
        root-sum-square integrand gains a sqrt(2).
        """
        if self.scheme is Scheme.AE:
            return self.area / (math.sqrt(2.0 * math.pi) * self.t_p)
        return self.area / (math.sqrt(math.pi) * self.t_p)

    def with_area(self, area: float) -> "PulseSpec":
        return replace(self, area=area)

    def to_json_dict(self) -> dict:
        """Flat JSON form; times are in units of t_p."""
        return {
            "scheme": self.scheme.value,
            "area_pi": self.area / math.pi,
            "omega_e_tp": None if self.omega_e is None
            else self.omega_e * self.t_p / (2.0 * math.pi),
            "phi_rad": self.phi,
            "amp_p": self.amp_p,
            "amp_s": self.amp_s,
            "window_tp": self.window / self.t_p,
            "train_area_pi": None if self.train_area is None
            else self.train_area / math.pi,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PulseSpec":
        omega_e_tp = data.get("omega_e_tp")
        train_area_pi = data.get("train_area_pi")
        return cls(
            scheme=Scheme(data["scheme"]),
            area=float(data["area_pi"]) * math.pi,
            t_p=1.0,
            omega_e=None if omega_e_tp is None else 2.0 * math.pi * float(omega_e_tp),
            phi=float(data.get("phi_rad", 0.0)),
            amp_p=float(data.get("amp_p", 1.0)),
            amp_s=float(data.get("amp_s", 1.0)),
            window=float(data.get("window_tp", 4.0)),
            train_area=None if train_area_pi is None else float(train_area_pi) * math.pi,
        )


def gaussian_envelope(t, omega_0: float, t_p: float):
    """Gaussian envelope Omega_0 exp(-t^2/t_p^2); accepts scalar or array t."""
    if t_p <= 0:
        raise ValidationError("pulse duration t_p must be positive")
    return omega_0 * np.exp(-np.square(t) / t_p**2)


def rabi_pair(t, spec: PulseSpec):
    """Pump and Stokes Rabi frequencies at time t (scalar or array).

    DE: (a_p Omega sin(w_e t), a_s Omega cos(w_e t + phi)).
    AE: both fields carry the plain envelope.
    """
    if spec.scheme is Scheme.FOUR_PULSE_TRAIN:
        raise UnsupportedSchemeError("rabi_pair is undefined for the impulsive four-pulse train")
    envelope = gaussian_envelope(t, spec.peak_rabi, spec.t_p)
    if spec.scheme is Scheme.DE:
        omega_p = spec.amp_p * envelope * np.sin(spec.omega_e * np.asarray(t, dtype=float))
        omega_s = spec.amp_s * envelope * np.cos(spec.omega_e * np.asarray(t, dtype=float) + spec.phi)
    else:
        omega_p = spec.amp_p * envelope
        omega_s = spec.amp_s * envelope
    if np.isscalar(t):
        return float(omega_p), float(omega_s)
    return omega_p, omega_s


def envelope_area(spec: PulseSpec) -> float:
    """Quadrature of sqrt(Omega_p^2 + Omega_s^2) over the truncation window."""
    if spec.scheme is Scheme.FOUR_PULSE_TRAIN:
        raise UnsupportedSchemeError("the impulsive four-pulse train has no envelope")
    if spec.area == 0.0:
        return 0.0

    def integrand(t):
        omega_p, omega_s = rabi_pair(t, spec)
        return math.hypot(omega_p, omega_s)

    val, _ = quad(integrand, -spec.window, spec.window, epsabs=1e-12, epsrel=1e-10, limit=800)
    return val


def effective_area(area: float, omega_e: float, t_p: float) -> float:
    """Quadratic area rule sqrt(2) S^2 / (8 sqrt(pi) w_e t_p)."""
    if omega_e * t_p == 0:
        raise ValidationError("effective area requires a nonzero modulation frequency")
    return math.sqrt(2.0) * area**2 / (8.0 * math.sqrt(math.pi) * omega_e * t_p)


def modulation_for_effective_area(area: float, effective: float, t_p: float) -> float:
    """Invert the quadratic area rule for the modulation frequency."""
    if effective <= 0:
        raise ValidationError("target effective area must be positive")
    return math.sqrt(2.0) * area**2 / (8.0 * math.sqrt(math.pi) * effective * t_p)


def four_pulse_unitary(train_area: float, mode: str = "exact") -> Operator3:
    """Evolution of the impulsive Stokes-pump-Stokes-pump sequence.

    The exact form is exp(-i H_s S) exp(+i H_p S) exp(+i H_s S) exp(-i H_p S)
    with the rightmost factor acting first; the sign pattern encodes the pi
    phase shift carried by one pump and one Stokes pulse. The first-order
    reduction is I - (i/2) H_t S^2.
    """
    if train_area < 0:
        raise ValidationError("pulse area must be non-negative")
    if mode == "exact":
        u = (
            expm_hermitian(H_STOKES, train_area).matrix
            @ expm_hermitian(H_PUMP, -train_area).matrix
            @ expm_hermitian(H_STOKES, -train_area).matrix
            @ expm_hermitian(H_PUMP, train_area).matrix
        )
        return Operator3(u, kind="unitary")
    if mode == "first_order":
        return Operator3(np.eye(3, dtype=complex) - 0.5j * H_TARGET * train_area**2)
    raise ValidationError(f"unknown four-pulse mode {mode!r}")
