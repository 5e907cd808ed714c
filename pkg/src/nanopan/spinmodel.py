"""Rate-equation model of the spin-dependent optical cycle of a V1-type center.

Nine levels: four ground and four excited spin sublevels (pairwise degenerate
but kept distinct) plus one metastable shelf. The generator ``G`` acts on
column population vectors, dp/dt = G p, so ``G[j, i]`` is the rate from level
i to level j and every column sums to zero.

Laser detuning is measured from the A1 (m_s = +-1/2) line; the A2
(m_s = +-3/2) line sits at d_es_2 - d_gs_2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.csgraph import connected_components

from .purcell import spectral_diffusion, transform_limit
from .spectra import Spectrum, fit_lorentzian

LEVELS = ("g+1/2", "g-1/2", "g+3/2", "g-3/2", "e+1/2", "e-1/2", "e+3/2", "e-3/2", "shelf")
GROUND = (0, 1, 2, 3)
EXCITED = (4, 5, 6, 7)
SHELF = 8
# (ground, excited) pairs of the spin-preserving lines.
A1_PAIRS = ((0, 4), (1, 5))
A2_PAIRS = ((2, 6), (3, 7))
MW_PAIRS = ((0, 2), (1, 3))

TAU_ON_RESONANCE = 2.7e-9
TAU_OFF_RESONANCE = 9.72e-9
DEFAULT_MW_RATE = 5e7
KERNEL_HALF_WIDTH = 8.0
# rates below this fraction of the fastest one are dropped (1e-23/s next to 1e7/s)
RATE_FLOOR = 1e-30


class SteadyStateError(RuntimeError):
    """No valid stationary population could be found."""


@dataclass(frozen=True)
class SpinParams:
    """Level splittings [Hz] and transition rates [1/s].

    ``isc_rate``, ``pump_rate_peak`` and ``opt_linewidth`` default to
    0.5 gamma_rad, 0.1 gamma_rad and gamma_rad / (2 pi) when left as None.
    """

    d_gs_2: float = 4.5e6
    d_es_2: float = 1.0025e9
    gamma_rad: float = 1.0 / TAU_ON_RESONANCE
    isc_rate: float | None = None
    shelf_decay: float = 1.0 / 150e-9
    mw_rate: float = DEFAULT_MW_RATE
    opt_linewidth: float | None = None
    diffusion_sigma: float = 0.0
    pump_rate_peak: float | None = None

    def __post_init__(self):
        if self.isc_rate is None:
            object.__setattr__(self, "isc_rate", 0.5 * self.gamma_rad)
        if self.pump_rate_peak is None:
            object.__setattr__(self, "pump_rate_peak", 0.1 * self.gamma_rad)
        if self.opt_linewidth is None:
            object.__setattr__(self, "opt_linewidth", self.gamma_rad / (2 * math.pi))
        for f in fields(self):
            v = getattr(self, f.name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{f.name} must be finite and non-negative, got {v}")
        if not self.d_es_2 > self.d_gs_2:
            raise ValueError("excited-state splitting must exceed the ground-state splitting")
        if not self.opt_linewidth > 0:
            raise ValueError("opt_linewidth must be positive")

    @property
    def line_separation(self) -> float:
        """A2 - A1 detuning [Hz]."""
        return self.d_es_2 - self.d_gs_2

    @property
    def line_detunings(self):
        return 0.0, self.line_separation

    def with_(self, **changes) -> "SpinParams":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class RateSystem:
    labels: tuple
    generator: np.ndarray

    def __post_init__(self):
        g = self.generator
        if g.shape != (len(self.labels),) * 2:
            raise ValueError("generator shape does not match the level labels")
        off = g - np.diag(np.diag(g))
        if np.any(off < 0):
            raise ValueError("negative transition rate")
        scale = max(np.abs(g).max(), 1.0)
        if np.any(np.abs(g.sum(axis=0)) > 1e-12 * scale):
            raise ValueError("generator columns must sum to zero")
        g.setflags(write=False)

    def rate(self, src: str, dst: str) -> float:
        return float(self.generator[self.labels.index(dst), self.labels.index(src)])


def unit_lorentzian(delta, fwhm):
    hw2 = (0.5 * fwhm) ** 2
    return hw2 / (np.asarray(delta, dtype=float) ** 2 + hw2)


def _generators(p: SpinParams, detunings, mw_rate):
    """Stack of generators, shape (N, 9, 9), one per laser detuning."""
    det = np.atleast_1d(np.asarray(detunings, dtype=float))
    n = det.size
    g = np.zeros((n, 9, 9))
    d1, d2 = p.line_detunings
    w1 = p.pump_rate_peak * unit_lorentzian(det - d1, p.opt_linewidth)
    w2 = p.pump_rate_peak * unit_lorentzian(det - d2, p.opt_linewidth)
    for pairs, w in ((A1_PAIRS, w1), (A2_PAIRS, w2)):
        for gi, ei in pairs:
            g[:, ei, gi] += w
            g[:, gi, ei] += w
            g[:, gi, ei] += p.gamma_rad
    for ei in EXCITED:
        g[:, SHELF, ei] += p.isc_rate
    for gi in GROUND:
        g[:, gi, SHELF] += p.shelf_decay / 4
    for a, b in MW_PAIRS:
        g[:, a, b] += mw_rate
        g[:, b, a] += mw_rate
    idx = np.arange(9)
    g[:, idx, idx] = 0.0
    g[g < RATE_FLOOR * g.max(axis=(1, 2), keepdims=True)] = 0.0
    g[:, idx, idx] = -g.sum(axis=1)
    return g


def build_rate_system(p: SpinParams, laser_detuning: float) -> RateSystem:
    """Generator for one laser detuning [Hz] from the A1 line."""
    return RateSystem(LEVELS, _generators(p, [laser_detuning], p.mw_rate)[0])


def _classes(g):
    """Strongly connected classes and a flag per class: True when closed."""
    adj = (g - np.diag(np.diag(g))) > 0
    n_comp, comp = connected_components(adj.T, directed=True, connection="strong")
    leaving = np.zeros(n_comp, bool)
    src, dst = np.nonzero(adj.T)
    leaving[comp[src][comp[src] != comp[dst]]] = True
    return comp, ~leaving


def _gth(gs):
    """Stationary vectors of irreducible generators by GTH elimination.

    Works on a batch (B, n, n) in the dp/dt = G p convention. Only sums and
    products of non-negative rates appear, so every entry keeps full
    relative accuracy across the whole (floored) range of rates.
    """
    a = np.swapaxes(np.array(gs, dtype=float), -1, -2).copy()
    n = a.shape[-1]
    idx = np.arange(n)
    a[:, idx, idx] = 0.0
    for k in range(n - 1, 0, -1):
        s = a[:, k, :k].sum(axis=-1)
        a[:, :k, k] /= s[:, None]
        a[:, :k, :k] += a[:, :k, k][:, :, None] * a[:, k, :k][:, None, :]
    pi = np.zeros(a.shape[:2])
    pi[:, 0] = 1.0
    for k in range(1, n):
        pi[:, k] = np.einsum("bi,bi->b", pi[:, :k], a[:, :k, k])
    return pi / pi.sum(axis=-1, keepdims=True)


def ground_start(labels=LEVELS):
    p0 = np.array([1.0 if lab.startswith("g") else 0.0 for lab in labels])
    return p0 / p0.sum()


def long_time_limit(g, p0):
    """lim_{t->inf} expm(G t) p0 for a possibly reducible chain.

    Transient states are eliminated one at a time, forwarding their mass and
    incoming rates along their jump probabilities; the mass left on each
    closed class then relaxes to that class's stationary distribution.
    """
    return _limits(np.asarray(g, dtype=float)[None], p0)[0]


def _limits(gs, p0):
    """Batched long_time_limit for generators sharing one graph structure."""
    comp, closed = _classes(gs[0])
    rates = np.swapaxes(gs, -1, -2).copy()
    idx = np.arange(gs.shape[-1])
    rates[:, idx, idx] = 0.0
    p = np.tile(np.asarray(p0, dtype=float), (gs.shape[0], 1))
    for k in np.flatnonzero(~closed[comp]):
        jump = rates[:, k] / rates[:, k].sum(axis=-1, keepdims=True)
        into = rates[:, :, k].copy()
        rates += into[:, :, None] * jump[:, None, :]
        rates[:, :, k] = 0.0
        rates[:, k, :] = 0.0
        rates[:, idx, idx] = 0.0
        p += p[:, k, None] * jump
        p[:, k] = 0.0
    out = np.zeros_like(p)
    for c in np.flatnonzero(closed):
        members = np.flatnonzero(comp == c)
        mass = p[:, members].sum(axis=-1, keepdims=True)
        out[:, members] = mass * _gth(gs[:, members][:, :, members])
    return out


def _single_class(g):
    """Members of the only closed class, or None when there are several."""
    comp, closed = _classes(g)
    if np.sum(closed) != 1:
        return None
    return np.flatnonzero(comp == np.flatnonzero(closed)[0])


def _finalize(p):
    if np.any(~np.isfinite(p)) or np.any(p < -1e-12):
        raise SteadyStateError("stationary solution has negative or non-finite populations")
    p = np.clip(p, 0.0, None)
    return p / p.sum(axis=-1, keepdims=True)


def _stationary(gs, members):
    out = np.zeros(gs.shape[:2])
    out[:, members] = _gth(gs[:, members][:, :, members])
    return out


def steady_state(r: RateSystem) -> np.ndarray:
    """Stationary populations (non-negative, summing to 1).

    Unique when the chain has a single closed class (transient levels carry
    no weight); otherwise the limit reached from equal ground populations.
    """
    g = r.generator
    members = _single_class(g)
    if members is not None:
        return _finalize(_stationary(g[None], members)[0])
    return _finalize(long_time_limit(g, ground_start(r.labels)))


def _steady_states(p: SpinParams, detunings, mw_rate):
    gs = _generators(p, detunings, mw_rate)
    if not np.all((gs > 0) == (gs[:1] > 0)):
        return np.array([steady_state(RateSystem(LEVELS, g)) for g in gs])
    members = _single_class(gs[0])
    if members is not None:
        return _finalize(_stationary(gs, members))
    return _finalize(_limits(gs, ground_start()))


def _raw_signal(p, detunings, mw_rate):
    pops = _steady_states(p, detunings, mw_rate)
    return p.gamma_rad * pops[:, list(EXCITED)].sum(axis=1)


def diffusion_kernel(sigma: float, linewidth: float):
    """Trapezoid nodes and normalized weights for a Gaussian of std ``sigma``.

    Spacing min(sigma/2, linewidth/8) over +-8 sigma resolves both the kernel
    and the Lorentzian poles, so the rule converges to ~1e-10.
    """
    if sigma <= 1e-9 * linewidth:
        # relative effect ~ (sigma / linewidth)^2, below double precision
        return np.zeros(1), np.ones(1)
    h = min(0.5 * sigma, linewidth / 8)
    n = math.ceil(KERNEL_HALF_WIDTH * sigma / h)
    u = np.arange(-n, n + 1) * h
    w = np.exp(-0.5 * (u / sigma) ** 2)
    return u, w / w.sum()


def ple_signal(p: SpinParams, detunings, mw_on: bool = True):
    """PSB-proxy signal gamma_rad * sum(p_excited) with Gaussian spectral diffusion."""
    det = np.asarray(detunings, dtype=float)
    mw = p.mw_rate if mw_on else 0.0
    u, w = diffusion_kernel(p.diffusion_sigma, p.opt_linewidth)
    raw = _raw_signal(p, (det[:, None] - u[None, :]).ravel(), mw)
    return raw.reshape(det.size, u.size) @ w


def ple_spectrum(p: SpinParams, detunings, mw_on: bool = True) -> Spectrum:
    """Simulated PLE scan on a frequency-detuning axis [Hz]."""
    det = np.asarray(detunings, dtype=float)
    if det.size > 1 and not np.all(np.diff(det) > 0):
        raise ValueError("detunings must be strictly increasing")
    return Spectrum(det, ple_signal(p, det, mw_on), "frequency_detuning")


def default_detunings(p: SpinParams, n: int = 400, margin: float = 0.5e9):
    """Uniform scan covering both lines with ``margin`` on either side."""
    d1, d2 = p.line_detunings
    return np.linspace(d1 - margin, d2 + margin, n)


def linewidth_report(s: Spectrum, gamma_tl: float | None = None, init=None) -> dict:
    """Two-peak Lorentzian fit plus spectral-diffusion decomposition.

    ``gamma_tl`` [Hz] is the transform-limited linewidth to subtract; the
    diffusion entries are omitted when it is None.
    """
    fit = fit_lorentzian(s, 2, init)
    peaks = []
    for name, pk in zip(("A1", "A2"), fit.peaks):
        rec = {
            "line": name,
            "center_Hz": pk.center, "center_err_Hz": pk.center_err,
            "fwhm_Hz": pk.fwhm, "fwhm_err_Hz": pk.fwhm_err,
            "amplitude": pk.amplitude,
        }
        if gamma_tl is not None:
            sd = spectral_diffusion(pk.fwhm, gamma_tl)
            rec["spectral_diffusion_Hz"] = sd.value
            rec["diffusion_clamped"] = sd.clamped
        peaks.append(rec)
    return {
        "status": fit.status,
        "separation_Hz": fit.peaks[1].center - fit.peaks[0].center,
        "baseline": fit.baseline,
        "gamma_tl_Hz": gamma_tl,
        "degenerate": fit.degenerate,
        "peaks": peaks,
    }


def fitted_fwhm(p: SpinParams, detunings=None, line: int = 0) -> float:
    det = default_detunings(p) if detunings is None else detunings
    fit = fit_lorentzian(ple_spectrum(p, det, True), 2)
    return fit.peaks[line].fwhm


def tune_diffusion(p: SpinParams, target_fwhm: float, detunings=None, line: int = 0) -> SpinParams:
    """Copy of ``p`` whose diffusion_sigma makes the fitted FWHM of ``line`` hit the target."""
    base = fitted_fwhm(p.with_(diffusion_sigma=0.0), detunings, line)
    if base >= target_fwhm:
        raise ValueError(
            f"linewidth without diffusion ({base:.4g} Hz) already exceeds {target_fwhm:.4g} Hz"
        )

    def f(sigma):
        return fitted_fwhm(p.with_(diffusion_sigma=sigma), detunings, line) - target_fwhm

    sigma = brentq(f, 0.0, target_fwhm, xtol=1e-3, rtol=1e-10)
    return p.with_(diffusion_sigma=sigma)


def linewidth_preset(kind: str = "on_resonance", **overrides) -> SpinParams:
    """Parameter sets for the cavity-coupled and uncoupled linewidth studies.

    ``on_resonance``: tau = 2.7 ns; ``off_resonance``: tau = 9.72 ns. The
    diffusion width is left at zero; use :func:`tune_diffusion` to match a
    measured total linewidth.
    """
    taus = {"on_resonance": TAU_ON_RESONANCE, "off_resonance": TAU_OFF_RESONANCE}
    if kind not in taus:
        raise ValueError(f"unknown preset {kind!r}")
    gamma = 1.0 / taus[kind]
    return SpinParams(gamma_rad=gamma, opt_linewidth=transform_limit(taus[kind]), **overrides)
