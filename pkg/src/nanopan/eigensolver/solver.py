"""Resonant modes of the discretized cavity by sparse shift-invert.

For each azimuthal order the curl-curl problem

    curl curl E = (omega / c)^2 eps(omega) E

is linear once eps is frozen. Dispersive metal is handled by an outer
iteration on omega; the inner linear eigenproblem is solved with ARPACK on
(M - sigma)^-1 M, which maps the gradient null space of the curl-curl operator
to zero so it can never be mistaken for a resonance near the shift.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.constants import c as C0

from ..materials import DRUDE_VALID_RANGE, DrudeRangeWarning, wavelength_from_omega
from .domain import DiscretizedDomain
from .operators import Layout, curl_curl, edge_permittivity

log = logging.getLogger(__name__)

FIXED_POINT_TOL = 1e-6
FIXED_POINT_MAX_SWEEPS = 20
MAX_MODES = 10
RESIDUAL_TOL = 1e-8


class EigenSolverError(RuntimeError):
    """Base class for eigensolver failures."""


class NoModeFound(EigenSolverError):
    pass


class ConvergenceError(EigenSolverError):
    pass


@dataclass(eq=False)
class EigenMode:
    """A resonance: complex frequency plus the staggered E-field components.

    ``fields`` holds full component arrays keyed ``Er``, ``Ephi``, ``Ez`` (zero
    on PEC walls). The field is defined up to a complex scale.
    """

    omega: complex
    m: int
    fields: dict = field(repr=False)
    domain: DiscretizedDomain = field(repr=False)
    residual: float = 0.0
    sweeps: int = 0

    def __post_init__(self):
        self.omega = complex(self.omega)
        if not self.omega.real > 0:
            raise ValueError(f"eigenfrequency must have positive real part, got {self.omega}")
        total = 0.0
        for name, arr in self.fields.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in field component {name}")
            total += float(np.sum(np.abs(arr) ** 2))
        if total == 0.0:
            raise ValueError("eigenfield is identically zero")

    @property
    def lambda_res(self) -> float:
        return float(wavelength_from_omega(self.omega))

    @property
    def frequency(self) -> float:
        return self.omega.real / (2 * math.pi)

    def scaled(self, factor: complex) -> "EigenMode":
        return EigenMode(
            self.omega, self.m, {k: v * factor for k, v in self.fields.items()},
            self.domain, self.residual, self.sweeps,
        )


class _LinearProblem:
    """curl-curl operator for one domain with the absorber frozen at omega_ref."""

    def __init__(self, d: DiscretizedDomain, omega_ref: float):
        self.d = d
        self.layout = Layout.for_domain(d)
        self.a = curl_curl(d, self.layout, omega_ref)
        self.n = self.a.shape[0]

    def operator(self, omega_eps):
        b = edge_permittivity(self.d, self.layout, omega_eps)
        return (sp.diags(1.0 / b) @ self.a).tocsc()

    def modes_near(self, omega_eps, omega_shift, k):
        """Eigenpairs of the frozen-eps problem nearest ``omega_shift``."""
        mat = self.operator(omega_eps)
        sigma = complex(omega_shift / C0) ** 2
        shifted = (mat - sigma * sp.identity(self.n, format="csc")).tocsc()
        try:
            lu = sla.splu(shifted)
        except RuntimeError as exc:
            raise EigenSolverError(f"sparse factorization failed: {exc}") from exc

        def matvec(x):
            return lu.solve(mat @ x)

        op = sla.LinearOperator(mat.shape, matvec=matvec, dtype=complex)
        k = min(k, self.n - 2)
        ncv = min(self.n - 1, max(2 * k + 1, 24))
        try:
            nu, vecs = sla.eigs(op, k=k, which="LM", ncv=ncv, tol=1e-12,
                                v0=np.ones(self.n, complex), maxiter=5000)
        except sla.ArpackNoConvergence as exc:
            nu, vecs = exc.eigenvalues, exc.eigenvectors
            if nu.size == 0:
                raise EigenSolverError("ARPACK did not converge") from exc
        keep = np.isfinite(nu) & (np.abs(nu) > 1e-6) & (np.abs(nu - 1) > 1e-12)
        nu, vecs = nu[keep], vecs[:, keep]
        lam = sigma * nu / (nu - 1)
        omegas = C0 * np.sqrt(lam)
        omegas = np.where(omegas.real < 0, -omegas, omegas)
        order = np.argsort(np.abs(omegas - omega_shift))
        out = []
        for i in order:
            x = vecs[:, i]
            lam_i = lam[i]
            res = np.linalg.norm(mat @ x - lam_i * x) / (abs(lam_i) * np.linalg.norm(x))
            out.append((complex(omegas[i]), x, float(res)))
        return out


def solve_modes(
    d: DiscretizedDomain,
    omega_guess: float,
    n_modes: int = 1,
    *,
    tol: float = FIXED_POINT_TOL,
    max_sweeps: int = FIXED_POINT_MAX_SWEEPS,
) -> list[EigenMode]:
    """Resonances of ``d`` nearest ``omega_guess`` [rad/s].

    Each returned mode is self-consistent with the metal permittivity
    evaluated at its own complex frequency, to relative tolerance ``tol``.
    """
    if not 1 <= n_modes <= MAX_MODES:
        raise ValueError(f"n_modes must be in 1..{MAX_MODES}")
    if not omega_guess > 0:
        raise ValueError("omega_guess must be positive")
    omega_guess = float(omega_guess)
    if d.dispersive:
        lo, hi = DRUDE_VALID_RANGE
        if not lo <= wavelength_from_omega(omega_guess) <= hi:
            warnings.warn(
                f"search wavelength {wavelength_from_omega(omega_guess) * 1e9:.0f} nm lies "
                "outside the range of the Drude fit", DrudeRangeWarning, stacklevel=2,
            )
    lp = _LinearProblem(d, omega_guess)
    log.debug("m=%d: %d unknowns", d.m, lp.n)

    candidates = lp.modes_near(omega_guess, omega_guess, n_modes + 2)
    if not candidates:
        raise NoModeFound(f"no resonance near {omega_guess:.4e} rad/s for m={d.m}")

    modes: list[EigenMode] = []
    for omega1, vec, res in candidates[:n_modes]:
        if d.dispersive:
            omega, vec, res, sweeps = _self_consistent(lp, omega_guess, omega1, tol, max_sweeps,
                                                        vec)
        else:
            omega, sweeps = omega1, 0
        if any(abs(omega - mo.omega) < 1e-5 * abs(omega) for mo in modes):
            continue
        if res > RESIDUAL_TOL:
            log.warning("m=%d mode at %.4e rad/s: eigen-residual %.2e", d.m, omega.real, res)
        modes.append(EigenMode(omega, d.m, lp.layout.scatter(vec), d, res, sweeps))
    modes.sort(key=lambda mo: abs(mo.omega - omega_guess))
    return modes


def track_mode(
    d: DiscretizedDomain,
    omega_guess: float,
    *,
    window: float = 0.1,
    n_candidates: int = 6,
    tol: float = FIXED_POINT_TOL,
    max_sweeps: int = FIXED_POINT_MAX_SWEEPS,
) -> EigenMode:
    """Highest-Q resonance within ``window`` (relative wavelength) of the guess.

    Candidates come from one linear solve with the metal frozen at the guess;
    only the selected one is iterated to self-consistency. When no decaying
    candidate lies inside the window, the nearest one is taken.
    """
    if not omega_guess > 0:
        raise ValueError("omega_guess must be positive")
    omega_guess = float(omega_guess)
    lp = _LinearProblem(d, omega_guess)
    candidates = lp.modes_near(omega_guess, omega_guess, n_candidates)
    if not candidates:
        raise NoModeFound(f"no resonance near {omega_guess:.4e} rad/s for m={d.m}")
    near = [c for c in candidates
            if abs(omega_guess / c[0].real - 1) <= window and c[0].imag < 0]
    if near:
        omega1, vec, res = max(near, key=lambda c: c[0].real / (-2 * c[0].imag))
    else:
        omega1, vec, res = candidates[0]
    sweeps = 0
    if d.dispersive:
        omega1, vec, res, sweeps = _self_consistent(lp, omega_guess, omega1, tol, max_sweeps,
                                                         vec)
    return EigenMode(omega1, d.m, lp.layout.scatter(vec), d, res, sweeps)


def _self_consistent(lp: _LinearProblem, x_prev, f_prev, tol, max_sweeps, vec=None):
    """Solve omega = F(omega), F = eigenfrequency of the tracked mode with eps frozen at omega.

    The mode is followed from sweep to sweep by eigenvector overlap, so a
    neighbouring resonance that drifts closer in frequency cannot take over.
    Plain substitution oscillates for plasmonic modes (|F'| is close to one),
    so each substitution step is accelerated by a secant update on F(x) - x.
    """
    x = complex(f_prev)
    x_prev = complex(x_prev)
    for sweep in range(1, max_sweeps + 1):
        found = lp.modes_near(x, x, 4)
        if not found:
            raise ConvergenceError("mode lost during self-consistency sweep")
        f, v, res = found[0] if vec is None else max(found, key=lambda c: _overlap(vec, c[1]))
        vec = v
        if abs(f - x) < tol * abs(x):
            return f, v, res, sweep
        g, g_prev = f - x, f_prev - x_prev
        step = f
        if abs(g - g_prev) > 0:
            secant = x - g * (x - x_prev) / (g - g_prev)
            if abs(secant - x) < 0.1 * abs(x):
                step = secant
        x_prev, f_prev, x = x, f, step
    raise ConvergenceError(
        f"dispersive self-consistency did not converge in {max_sweeps} sweeps "
        f"(last |dw|/w = {abs(f - x_prev) / abs(x_prev):.2e})"
    )


def _overlap(a, b):
    return abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))


def omega_for_wavelength(lambda_vac: float) -> float:
    return 2 * math.pi * C0 / lambda_vac
