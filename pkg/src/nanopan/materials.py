"""Dispersive permittivity models for the cavity regions.

All frequencies are angular (rad/s) and the time dependence is exp(-i w t),
so absorbing media have Im(eps) > 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C0

# Measured-fit range of the silver Drude parameters.
DRUDE_VALID_RANGE = (800e-9, 2000e-9)

# Room-temperature silver damping; not part of the fitted constants, so it is
# exposed as a default rather than baked into SILVER.
GAMMA_ROOM_SILVER = 3.2e13


class DrudeRangeWarning(UserWarning):
    """Wavelength outside the range where the Drude fit is trusted."""


@dataclass(frozen=True)
class DrudeParams:
    """Free-electron permittivity parameters.

    Attributes
    ----------
    eps_inf : float
        Background permittivity.
    omega_p : float
        Plasma frequency [rad/s].
    gamma : float
        Collision (damping) frequency [rad/s].
    """

    eps_inf: float
    omega_p: float
    gamma: float = 0.0

    def __post_init__(self):
        if not (self.omega_p > 0 and math.isfinite(self.omega_p)):
            raise ValueError(f"omega_p must be positive, got {self.omega_p}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if not self.eps_inf >= 1:
            raise ValueError(f"eps_inf must be >= 1, got {self.eps_inf}")

    def with_gamma(self, gamma: float) -> "DrudeParams":
        return DrudeParams(self.eps_inf, self.omega_p, gamma)


@dataclass(frozen=True)
class MaterialModel:
    """A region material: either a constant permittivity or a Drude metal.

    Use :meth:`constant` / :meth:`drude` rather than the raw constructor.
    """

    label: str
    kind: str
    eps: complex = 1.0
    drude_params: DrudeParams | None = None

    def __post_init__(self):
        if self.kind == "constant":
            eps = complex(self.eps)
            if not (math.isfinite(eps.real) and math.isfinite(eps.imag)):
                raise ValueError(f"{self.label}: non-finite permittivity {self.eps}")
            object.__setattr__(self, "eps", eps)
        elif self.kind == "drude":
            if not isinstance(self.drude_params, DrudeParams):
                raise ValueError(f"{self.label}: drude kind needs DrudeParams")
        else:
            raise ValueError(f"unknown material kind {self.kind!r}")

    @classmethod
    def constant(cls, label: str, eps: complex) -> "MaterialModel":
        return cls(label=label, kind="constant", eps=eps)

    @classmethod
    def from_index(cls, label: str, n: float) -> "MaterialModel":
        return cls(label=label, kind="constant", eps=n * n)

    @classmethod
    def drude(cls, label: str, params: DrudeParams) -> "MaterialModel":
        return cls(label=label, kind="drude", drude_params=params)

    @property
    def dispersive(self) -> bool:
        return self.kind == "drude"

    def permittivity(self, omega):
        """Permittivity at angular frequency ``omega`` (may be complex)."""
        if self.kind == "constant":
            return self.eps
        return drude_permittivity(omega, self.drude_params)

    def energy_coefficient(self, omega):
        """Re d(omega*eps)/d omega, the electric energy-density weight."""
        if self.kind == "constant":
            return float(np.real(self.eps))
        return drude_energy_coefficient(omega, self.drude_params)


def _check_omega(omega):
    w = np.asarray(omega)
    if np.any(np.real(w) <= 0):
        raise ValueError("angular frequency must be positive")


def drude_permittivity(omega, p: DrudeParams):
    """Drude permittivity eps_inf - wp^2 / (w^2 + i w gamma).

    ``omega`` may be an array, or complex (used by the eigensolver when it
    evaluates the material at a complex eigenfrequency).
    """
    _check_omega(omega)
    w = np.asarray(omega) if np.ndim(omega) else omega
    return p.eps_inf - p.omega_p**2 / (w * (w + 1j * p.gamma))


def drude_energy_coefficient(omega, p: DrudeParams):
    """Re[d(w eps)/dw] = Re[eps_inf + wp^2 / (w + i gamma)^2]."""
    _check_omega(omega)
    w = np.real(omega)
    return np.real(p.eps_inf + p.omega_p**2 / (w + 1j * p.gamma) ** 2)


def scale_damping(gamma_room: float, conductivity_ratio: float) -> float:
    """Rescale the Drude damping by sigma_room / sigma_cold.

    A cryogenic film conducts better than at room temperature, so the ratio is
    below one and the damping drops in proportion.
    """
    if not conductivity_ratio > 0:
        raise ValueError(f"conductivity_ratio must be positive, got {conductivity_ratio}")
    if gamma_room < 0:
        raise ValueError("gamma_room must be non-negative")
    return gamma_room * conductivity_ratio


def omega_from_wavelength(lambda_vac):
    return 2 * np.pi * C0 / lambda_vac


def wavelength_from_omega(omega):
    return 2 * np.pi * C0 / np.real(omega)


def permittivity_at(lambda_vac: float, m: MaterialModel):
    """Permittivity of ``m`` at vacuum wavelength ``lambda_vac`` [m]."""
    lam = np.asarray(lambda_vac, dtype=float)
    if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise ValueError("wavelength must be positive")
    if m.kind == "constant":
        return m.eps
    lo, hi = DRUDE_VALID_RANGE
    if np.any((lam < lo) | (lam > hi)):
        warnings.warn(
            f"{m.label}: Drude model used outside {lo * 1e9:.0f}-{hi * 1e9:.0f} nm",
            DrudeRangeWarning,
            stacklevel=2,
        )
    w = omega_from_wavelength(lam)
    return drude_permittivity(w if lam.ndim else float(w), m.drude_params)


SILVER = DrudeParams(eps_inf=3.1, omega_p=1.4e16, gamma=GAMMA_ROOM_SILVER)
SIC_INDEX = 2.6


def silver(conductivity_ratio: float = 1.0, gamma_room: float = GAMMA_ROOM_SILVER,
           label: str = "silver") -> MaterialModel:
    """Silver with the damping rescaled for the measurement temperature."""
    g = scale_damping(gamma_room, conductivity_ratio)
    return MaterialModel.drude(label, SILVER.with_gamma(g))


def silicon_carbide(label: str = "sic", n: float = SIC_INDEX) -> MaterialModel:
    return MaterialModel.from_index(label, n)


def vacuum(label: str = "vacuum") -> MaterialModel:
    return MaterialModel.constant(label, 1.0)
