"""Purcell-enhancement arithmetic and the emission bookkeeping around it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectra import Spectrum


@dataclass(frozen=True)
class CavityParams:
    """Cavity figures of merit.

    Attributes
    ----------
    q : float
        Quality factor (>= 1).
    v_mode : float
        Mode volume [m^3].
    lambda_cav : float
        Resonance wavelength [m].
    n_eff : float
        Effective refractive index used to normalize the volume.
    """

    q: float
    v_mode: float
    lambda_cav: float
    n_eff: float

    def __post_init__(self):
        for name in ("v_mode", "lambda_cav", "n_eff"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (self.q >= 1 and math.isfinite(self.q)):
            raise ValueError(f"q must be finite and >= 1, got {self.q}")

    @property
    def cubic_wavelength(self) -> float:
        """(lambda_cav / n_eff)^3 [m^3]."""
        return (self.lambda_cav / self.n_eff) ** 3

    @property
    def normalized_volume(self) -> float:
        return self.v_mode / self.cubic_wavelength

    @classmethod
    def from_normalized(cls, q, v_norm, lambda_cav, n_eff) -> "CavityParams":
        """Build from a volume given in units of (lambda_cav / n_eff)^3."""
        return cls(q, v_norm * (lambda_cav / n_eff) ** 3, lambda_cav, n_eff)


@dataclass(frozen=True)
class EmitterParams:
    """Emitter constants.

    ``eta`` is the measured off-resonance ZPL branching ratio and is kept
    apart from the Debye-Waller factor; the lifetime estimator uses ``eta``.
    """

    lambda_zpl: float
    tau0: float
    debye_waller: float
    eta: float

    def __post_init__(self):
        if not self.lambda_zpl > 0:
            raise ValueError("lambda_zpl must be positive")
        if not self.tau0 > 0:
            raise ValueError("tau0 must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0 < self.debye_waller <= 1:
            raise ValueError(f"debye_waller must lie in (0, 1], got {self.debye_waller}")


def max_purcell(c: CavityParams) -> float:
    """F_max = 3/(4 pi^2) (lambda_cav/n_eff)^3 Q / V_mode."""
    return 3.0 / (4.0 * math.pi**2) * c.cubic_wavelength * c.q / c.v_mode


def zpl_purcell(f_max, xi, q, lambda_zpl, lambda_cav):
    """Detuned ZPL enhancement  xi F_max / (1 + 4 Q^2 (lambda_zpl/lambda_cav - 1)^2).

    Broadcasts over array arguments.
    """
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0) or np.any(xi_arr > 1):
        raise ValueError("xi must lie in [0, 1]")
    delta = np.asarray(lambda_zpl, dtype=float) / np.asarray(lambda_cav, dtype=float) - 1.0
    out = xi_arr * f_max / (1.0 + 4.0 * np.asarray(q, dtype=float) ** 2 * delta**2)
    return float(out) if np.ndim(out) == 0 else out


def purcell_from_intensity(i_on: float, i_off: float) -> float:
    """F = I_on / I_off - 1."""
    if i_off == 0:
        raise ZeroDivisionError("off-resonance intensity is zero")
    if not i_off > 0:
        raise ValueError("i_off must be positive")
    if not i_on >= 0:
        raise ValueError("i_on must be non-negative")
    return i_on / i_off - 1.0


def purcell_from_lifetime(tau0: float, eta: float, tau_on: float, tau_off: float) -> float:
    """F = (tau0 / eta) (1/tau_on - 1/tau_off).

    Negative when tau_on > tau_off; returned as is.
    """
    for name, v in (("tau0", tau0), ("tau_on", tau_on), ("tau_off", tau_off)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    return tau0 / eta * (1.0 / tau_on - 1.0 / tau_off)


def branching_ratio(s: Spectrum, zpl_window) -> float:
    """Trapezoidal fraction of the integrated counts that falls inside ``zpl_window``.

    ``zpl_window`` is ``(lo, hi)`` in the units of ``s.x``. Window edges that
    fall between samples are handled by linear interpolation of the counts.
    """
    lo, hi = map(float, zpl_window)
    x, y = s.x, s.counts
    if not hi > lo:
        raise ValueError("empty ZPL window")
    if lo < x[0] or hi > x[-1]:
        raise ValueError("ZPL window extends beyond the spectrum")
    total = np.trapezoid(y, x)
    if not total > 0:
        raise ValueError("spectrum has zero integrated counts")
    inside = (x > lo) & (x < hi)
    xs = np.concatenate([[lo], x[inside], [hi]])
    ys = np.concatenate([[np.interp(lo, x, y)], y[inside], [np.interp(hi, x, y)]])
    return float(np.trapezoid(ys, xs) / total)


def transform_limit(tau: float) -> float:
    """Lifetime-limited linewidth 1/(2 pi tau) [Hz]."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return 1.0 / (2.0 * math.pi * tau)


@dataclass(frozen=True)
class Diffusion:
    """Excess linewidth over the transform limit; ``clamped`` marks fwhm < gamma_tl."""

    value: float
    clamped: bool

    def __float__(self):
        return self.value


def spectral_diffusion(fwhm: float, gamma_tl: float) -> Diffusion:
    """max(fwhm - gamma_tl, 0) [Hz]."""
    if not fwhm >= 0:
        raise ValueError("fwhm must be non-negative")
    excess = fwhm - gamma_tl
    return Diffusion(max(excess, 0.0), excess < 0)


def purcell_report(
    *,
    cavity: CavityParams | None = None,
    xi: float | None = None,
    lambda_zpl: float | None = None,
    tau0: float | None = None,
    eta: float | None = None,
    tau_on: float | None = None,
    tau_off: float | None = None,
    i_on: float | None = None,
    i_off: float | None = None,
    fwhm: float | None = None,
    tau_linewidth: float | None = None,
) -> dict:
    """Report dict with every quantity the supplied inputs determine (else None)."""
    rep = dict.fromkeys(
        ("F_max", "F_zpl", "F_intensity", "F_lifetime", "eta",
         "gamma_tl_Hz", "spectral_diffusion_Hz"),
    )
    if cavity is not None:
        rep["F_max"] = max_purcell(cavity)
        if xi is not None:
            lz = cavity.lambda_cav if lambda_zpl is None else lambda_zpl
            rep["F_zpl"] = zpl_purcell(rep["F_max"], xi, cavity.q, lz, cavity.lambda_cav)
    if i_on is not None and i_off is not None:
        rep["F_intensity"] = purcell_from_intensity(i_on, i_off)
    if None not in (tau0, eta, tau_on, tau_off):
        rep["F_lifetime"] = purcell_from_lifetime(tau0, eta, tau_on, tau_off)
    if eta is not None:
        rep["eta"] = eta
    tl = tau_linewidth if tau_linewidth is not None else tau_off
    if tl is not None:
        rep["gamma_tl_Hz"] = transform_limit(tl)
        if fwhm is not None:
            rep["spectral_diffusion_Hz"] = spectral_diffusion(fwhm, rep["gamma_tl_Hz"]).value
    return rep
