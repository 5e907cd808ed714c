"""Line-shape and decay fitting on a shared damped least-squares engine.

Lorentzian line shapes are parametrized by FWHM and peak amplitude,

    y(x) = baseline + sum_k amp_k (G_k/2)^2 / ((x - x0_k)^2 + (G_k/2)^2),

and decay traces by  y(t) = baseline + A exp(-t / tau).
"""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

MIN_POINTS = 8
FTOL = 1e-10
MAX_ITER = 200
LAMBDA_FLOOR = 1e-12
LAMBDA_CEIL = 1e16

X_KINDS = ("wavelength", "frequency_detuning")


class FitError(RuntimeError):
    """A fit could not produce a valid result."""


class SingularSystemError(FitError):
    """Normal equations are singular; ``condition`` holds the estimate."""

    def __init__(self, msg, condition):
        super().__init__(f"{msg} (condition estimate {condition:.3e})")
        self.condition = condition


class DegeneratePeaksWarning(UserWarning):
    """Two fitted centers closer than one sample spacing."""


# ----------------------------------------------------------------------
# Data containers


def _check_axis(x, counts, name):
    x = np.asarray(x, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if x.ndim != 1 or x.shape != counts.shape:
        raise ValueError(f"{name} and counts must be 1-D arrays of equal length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(counts))):
        raise ValueError("non-finite samples")
    if x.size > 1 and not np.all(np.diff(x) > 0):
        raise ValueError(f"{name} must be strictly increasing")
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    return x, counts


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Counts on a wavelength [m] or frequency-detuning [Hz] axis."""

    x: np.ndarray
    counts: np.ndarray
    x_kind: str = "wavelength"

    def __post_init__(self):
        if self.x_kind not in X_KINDS:
            raise ValueError(f"x_kind must be one of {X_KINDS}, got {self.x_kind!r}")
        x, c = _check_axis(self.x, self.counts, "x")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "counts", c)

    def __len__(self):
        return self.x.size


@dataclass(frozen=True, eq=False)
class TimeTrace:
    """Photon counts versus delay time [s]."""

    t: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        t, c = _check_axis(self.t, self.counts, "t")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "counts", c)

    def __len__(self):
        return self.t.size


# ----------------------------------------------------------------------
# Least-squares engine


@dataclass(frozen=True, eq=False)
class LeastSquaresResult:
    """Outcome of :func:`least_squares`.

    ``cost`` is half the residual sum of squares. ``covariance`` is the
    linearized covariance s^2 (J^T J)^-1 with s^2 = 2 cost / (m - n); it is
    filled with ``inf`` when J^T J is numerically singular.
    """

    params: np.ndarray
    covariance: np.ndarray
    cost: float
    cost_history: tuple
    status: str
    n_iter: int
    n_fev: int
    condition: float
    residuals: np.ndarray = field(repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.abs(np.diag(self.covariance)))

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residuals))


def finite_difference_jacobian(fun, p, r0=None, step=None):
    """Central-difference Jacobian of the residual vector."""
    p = np.asarray(p, dtype=float)
    h = (np.finfo(float).eps ** (1 / 3)) * np.maximum(np.abs(p), 1.0) if step is None else step
    cols = []
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = h[i]
        cols.append((fun(p + e) - fun(p - e)) / (2 * h[i]))
    return np.column_stack(cols)


def least_squares(
    fun,
    params0,
    *,
    jac=None,
    max_iter: int = MAX_ITER,
    ftol: float = FTOL,
    lam0: float = 1e-3,
) -> LeastSquaresResult:
    """Minimize 0.5 ||fun(p)||^2 by Levenberg-Marquardt.

    Parameters
    ----------
    fun : callable
        Residual vector as a function of the parameter vector.
    params0 : array_like
        Finite starting point.
    jac : callable, optional
        Jacobian of ``fun``; central differences when omitted.
    max_iter : int
        Cap on accepted-or-rejected outer iterations.
    ftol : float
        Stop when an accepted step lowers the cost by less than this
        fraction.

    Returns
    -------
    LeastSquaresResult
        ``status`` is ``"converged"``, ``"max_iter"`` or ``"stalled"``
        (no descent possible at maximal damping).

    Notes
    -----
    Damping is scaled by diag(J^T J) and multiplied by 10 on a rejected
    step, by 0.1 (floored at 1e-12) on an accepted one. Only steps that do
    not raise the cost are accepted, so the cost history is non-increasing.
    """
    p = np.array(params0, dtype=float)
    if p.ndim != 1 or not np.all(np.isfinite(p)):
        raise ValueError("initial parameters must be a finite 1-D vector")
    n_fev = 0

    def resid(q):
        nonlocal n_fev
        n_fev += 1
        return np.asarray(fun(q), dtype=float)

    def jacobian(q, r):
        return np.asarray(jac(q), dtype=float) if jac else finite_difference_jacobian(resid, q, r)

    r = resid(p)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals are not finite at the starting point")
    cost = 0.5 * float(r @ r)
    history = [cost]
    status = "max_iter"
    lam = lam0
    it = 0
    if cost == 0.0:
        status = "converged"
    else:
        j = jacobian(p, r)
        while it < max_iter:
            it += 1
            a = j.T @ j
            g = j.T @ r
            dg = np.diag(a).copy()
            if np.any(dg <= 0) or not np.all(np.isfinite(a)):
                raise SingularSystemError(
                    "a parameter has no influence on the residuals", _condition(a)
                )
            accepted = False
            while lam <= LAMBDA_CEIL:
                try:
                    step = np.linalg.solve(a + lam * np.diag(dg), -g)
                except np.linalg.LinAlgError as exc:
                    raise SingularSystemError("damped normal equations", _condition(a)) from exc
                p_new = p + step
                r_new = resid(p_new)
                cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
                if cost_new <= cost:
                    accepted = True
                    lam = max(lam * 0.1, LAMBDA_FLOOR)
                    break
                lam *= 10.0
            if not accepted:
                status = "converged" if _small_gradient(g, j, r) else "stalled"
                break
            rel = (cost - cost_new) / cost
            p, r, cost = p_new, r_new, cost_new
            history.append(cost)
            if cost == 0.0 or rel < ftol:
                status = "converged"
                break
            j = jacobian(p, r)

    j = jacobian(p, r) if p.size else np.zeros((r.size, 0))
    a = j.T @ j
    cond = _condition(a)
    dof = r.size - p.size
    s2 = 2 * cost / dof if dof > 0 else 0.0
    if np.isfinite(cond) and cond < 1e14:
        cov = s2 * np.linalg.inv(a)
    else:
        cov = np.full((p.size, p.size), np.inf)
    return LeastSquaresResult(p, cov, cost, tuple(history), status, it, n_fev, cond, r)


def _condition(a):
    try:
        return float(np.linalg.cond(a))
    except np.linalg.LinAlgError:
        return math.inf


def _small_gradient(g, j, r):
    scale = np.linalg.norm(j, axis=0) * max(np.linalg.norm(r), 1e-300)
    return bool(np.all(np.abs(g) <= 1e-8 * np.maximum(scale, 1e-300)))


# ----------------------------------------------------------------------
# Lorentzian fits


def lorentzian(x, center, fwhm, amp):
    """Unit-shape Lorentzian scaled to peak value ``amp``."""
    hw2 = (0.5 * fwhm) ** 2
    return amp * hw2 / ((np.asarray(x) - center) ** 2 + hw2)


def lorentzian_model(x, baseline, peaks):
    """``baseline`` plus the sum of ``(center, fwhm, amp)`` peaks."""
    y = np.full(np.shape(x), float(baseline))
    for c, w, a in peaks:
        y = y + lorentzian(x, c, w, a)
    return y


@dataclass(frozen=True)
class Peak:
    center: float
    fwhm: float
    amplitude: float
    center_err: float = math.nan
    fwhm_err: float = math.nan
    amplitude_err: float = math.nan

    @property
    def q(self) -> float:
        return q_from_fit(self.center, self.fwhm)


@dataclass(frozen=True, eq=False)
class LorentzianFit:
    """Fitted peaks (sorted by center) plus baseline and engine diagnostics."""

    peaks: tuple
    baseline: float
    baseline_err: float
    covariance: np.ndarray = field(repr=False)
    residual_norm: float = 0.0
    status: str = "converged"
    n_iter: int = 0
    degenerate: bool = False
    x_kind: str = "wavelength"

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return {
            "model": f"lorentzian{len(self.peaks)}",
            "x_kind": self.x_kind,
            "status": self.status,
            "iterations": self.n_iter,
            "residual_norm": self.residual_norm,
            "degenerate": self.degenerate,
            "baseline": self.baseline,
            "baseline_err": self.baseline_err,
            "peaks": [
                {
                    "center": p.center, "center_err": p.center_err,
                    "fwhm": p.fwhm, "fwhm_err": p.fwhm_err,
                    "amplitude": p.amplitude, "amplitude_err": p.amplitude_err,
                    "Q": p.q if self.x_kind == "wavelength" else None,
                }
                for p in self.peaks
            ],
        }


def _moving_average(y, n=5):
    k = np.ones(n) / n
    pad = n // 2
    return np.convolve(np.pad(y, pad, mode="edge"), k, mode="valid")


def _half_iqr(x, w):
    if x.size < 2 or not w.sum() > 0:
        return 0.0
    cdf = np.cumsum(w) / w.sum()
    q1, q3 = np.interp([0.25, 0.75], cdf, x)
    return 0.5 * float(q3 - q1)


def auto_seed(s: Spectrum, n_peaks: int):
    """Deterministic starting point: (baseline, [(center, fwhm, amp), ...]).

    Centers are the ``n_peaks`` largest local maxima of the 5-sample moving
    average lying more than one FWHM seed apart; the FWHM seed is half the
    inter-quartile range of the baseline-subtracted signal viewed as a
    distribution along x; the baseline seed is the 5th percentile of the
    counts. For two peaks the IQR is taken over the samples nearer to each
    seeded center.
    """
    x, y = s.x, s.counts
    base = float(np.percentile(y, 5))
    sm = _moving_average(y)
    w = np.clip(y - base, 0, None)
    dx = float(np.min(np.diff(x)))
    fwhm = max(_half_iqr(x, w), 2 * dx)
    interior = np.flatnonzero((sm[1:-1] >= sm[:-2]) & (sm[1:-1] > sm[2:])) + 1
    cand = list(interior[np.argsort(-sm[interior], kind="stable")])
    cand += [i for i in (0, y.size - 1) if i not in cand]
    # Noise ripples on one peak's flank are not separate peaks.
    idx = []
    for i in cand:
        if all(abs(x[i] - x[k]) > fwhm for k in idx):
            idx.append(i)
        if len(idx) == n_peaks:
            break
    for i in cand:
        if len(idx) == n_peaks:
            break
        if i not in idx:
            idx.append(i)
    idx.sort()
    # With two peaks each gets the half-IQR of the samples closest to it.
    owner = np.argmin(np.abs(x[:, None] - x[idx][None, :]), axis=1)
    peaks = []
    for k, i in enumerate(idx):
        sel = owner == k
        wk = max(_half_iqr(x[sel], w[sel]), 2 * dx) if n_peaks > 1 else fwhm
        amp = max(float(sm[i] - base), 1e-12 * max(y.max(), 1.0))
        peaks.append((float(x[i]), wk, amp))
    return base, sorted(peaks)


def fit_lorentzian(
    s: Spectrum,
    n_peaks: int = 1,
    init=None,
    *,
    weighting: str = "none",
    max_iter: int = MAX_ITER,
) -> LorentzianFit:
    """Least-squares Lorentzian fit with one or two peaks.

    Parameters
    ----------
    s : Spectrum
        At least 8 samples.
    n_peaks : {1, 2}
    init : tuple, optional
        ``(baseline, [(center, fwhm, amp), ...])`` in the units of ``s.x``;
        auto-seeded when omitted.
    weighting : {"none", "poisson"}
        Poisson weighting divides residuals by sqrt(max(counts, 1)).

    The fit runs in coordinates normalized to the x span and the count range,
    so results are equivariant under affine changes of the x axis.
    """
    if n_peaks not in (1, 2):
        raise ValueError("n_peaks must be 1 or 2")
    if len(s) < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} samples, got {len(s)}")
    if weighting not in ("none", "poisson"):
        raise ValueError(f"unknown weighting {weighting!r}")
    base0, peaks0 = init if init is not None else auto_seed(s, n_peaks)
    if len(peaks0) != n_peaks:
        raise ValueError(f"init supplies {len(peaks0)} peaks, expected {n_peaks}")

    x0, xs = float(s.x[0]), float(s.x[-1] - s.x[0])
    ys = float(np.max(s.counts)) or 1.0
    u = (s.x - x0) / xs
    v = s.counts / ys
    wts = 1.0 / np.sqrt(np.maximum(s.counts, 1.0) / ys) if weighting == "poisson" else 1.0

    p0 = [base0 / ys]
    for c, w, a in peaks0:
        p0 += [(c - x0) / xs, abs(w) / xs, a / ys]

    def model(p):
        return lorentzian_model(u, p[0], p[1:].reshape(-1, 3))

    res = least_squares(lambda p: (model(p) - v) * wts, p0, max_iter=max_iter)
    p = res.params
    if not np.all(np.isfinite(p)):
        raise FitError("fit diverged to non-finite parameters")
    scale = np.array([ys] + [xs, xs, ys] * n_peaks)
    err = res.stderr * scale
    peaks = []
    for k in range(n_peaks):
        c, w, a = p[1 + 3 * k: 4 + 3 * k]
        ec, ew, ea = err[1 + 3 * k: 4 + 3 * k]
        if not a > 0:
            raise FitError(f"peak {k} converged to non-positive amplitude {a * ys:.3e}")
        if w == 0:
            raise FitError(f"peak {k} collapsed to zero width")
        peaks.append(Peak(x0 + c * xs, abs(w) * xs, a * ys, ec, ew, ea))
    peaks.sort(key=lambda pk: pk.center)
    degenerate = False
    if n_peaks == 2:
        spacing = float(np.min(np.diff(s.x)))
        if abs(peaks[1].center - peaks[0].center) < spacing:
            degenerate = True
            warnings.warn("fitted peak centers closer than one sample", DegeneratePeaksWarning,
                          stacklevel=2)
    cov = res.covariance * np.outer(scale, scale)
    return LorentzianFit(
        tuple(peaks), float(p[0] * ys), float(err[0]), cov,
        res.residual_norm * ys, res.status, res.n_iter, degenerate, s.x_kind,
    )


def q_from_fit(center: float, fwhm: float) -> float:
    """Quality factor center / FWHM (same units on both)."""
    if not fwhm > 0:
        raise ValueError("fwhm must be positive")
    return center / fwhm


# ----------------------------------------------------------------------
# Exponential decay


@dataclass(frozen=True)
class DecayFit:
    tau: float
    amplitude: float
    baseline: float
    stderr_tau: float
    status: str = "converged"
    residual_norm: float = 0.0
    n_iter: int = 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return {
            "model": "expdecay",
            "status": self.status,
            "iterations": self.n_iter,
            "residual_norm": self.residual_norm,
            "tau_s": self.tau,
            "tau_err_s": self.stderr_tau,
            "amplitude": self.amplitude,
            "baseline": self.baseline,
        }


def fit_exp_decay(
    tr: TimeTrace, init=None, *, weighting: str = "none", max_iter: int = MAX_ITER
) -> DecayFit:
    """Fit baseline + A exp(-t / tau).

    ``init`` is ``(tau, amplitude, baseline)``. tau is fitted on a log scale
    so it stays positive; a result outside [dt / 10, 100 * span] is rejected
    as hitting the bounds.
    """
    if len(tr) < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} samples, got {len(tr)}")
    t, y = tr.t, tr.counts
    if np.ptp(y) == 0:
        raise FitError("constant trace carries no decay")
    span = float(t[-1] - t[0])
    dt = float(np.min(np.diff(t)))
    ys = float(np.max(y))
    ts = span
    u = (t - t[0]) / ts
    v = y / ys
    if init is None:
        tail = v[-max(len(v) // 10, 2):]
        b0 = float(np.median(tail))
        a0 = float(v[0] - b0)
        above = v - b0 > 0.1 * abs(a0)
        tau0 = 0.3
        if abs(a0) > 0 and above.sum() >= 2:
            slope = np.polyfit(u[above], np.log(np.abs(v[above] - b0)), 1)[0]
            if slope < 0:
                tau0 = -1.0 / slope
    else:
        tau_s, amp, base = init
        tau0 = tau_s / ts
        a0 = amp * math.exp(-t[0] / tau_s) / ys
        b0 = base / ys
    wts = 1.0 / np.sqrt(np.maximum(y, 1.0) / ys) if weighting == "poisson" else 1.0

    def resid(p):
        return (p[1] * np.exp(-u / math.exp(p[0])) + p[2] - v) * wts

    res = least_squares(resid, [math.log(tau0), a0, b0], max_iter=max_iter)
    lt, a, b = res.params
    tau = math.exp(lt) * ts
    if not math.isfinite(tau) or not dt / 10 <= tau <= 100 * span:
        raise FitError(f"decay time {tau:.3e} s hit the fit bounds")
    if abs(a) < 1e-9:
        raise FitError("fitted decay amplitude vanishes")
    amp = a * ys * math.exp(t[0] / tau)
    return DecayFit(
        tau, amp, b * ys, float(tau * res.stderr[0]), res.status,
        res.residual_norm * ys, res.n_iter,
    )


# ----------------------------------------------------------------------
# Two-column CSV with a unit header

_UNITS = {
    "m": 1.0, "um": 1e-6, "nm": 1e-9, "pm": 1e-12,
    "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12,
    "s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12,
}
_QUANTITIES = {"wavelength": "wavelength", "detuning": "frequency_detuning",
               "frequency": "frequency_detuning", "time": "time", "t": "time"}
_DEFAULT_UNIT = {"wavelength": "nm", "frequency_detuning": "hz", "time": "ns"}
_HEAD = {"wavelength": "wavelength", "frequency_detuning": "detuning", "time": "time"}


def parse_header(cell: str):
    """``"wavelength_nm"`` -> (``"wavelength"``, 1e-9)."""
    name, _, unit = cell.strip().lower().rpartition("_")
    if name not in _QUANTITIES or unit not in _UNITS:
        raise ValueError(f"unrecognized column header {cell!r}; expected e.g. wavelength_nm")
    kind = _QUANTITIES[name]
    dim = {"wavelength": "m", "frequency_detuning": "hz", "time": "s"}[kind]
    if not unit.endswith(dim):
        raise ValueError(f"unit {unit!r} does not fit quantity {name!r}")
    return kind, _UNITS[unit]


def read_xy_csv(path_or_text):
    """Load a Spectrum or TimeTrace from a two-column CSV with a unit header."""
    if isinstance(path_or_text, os.PathLike) or (
        isinstance(path_or_text, str) and "\n" not in path_or_text
    ):
        with open(path_or_text, newline="", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = str(path_or_text)
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ValueError("file has no data rows")
    head = rows[0]
    if len(head) != 2 or head[1].strip().lower() != "counts":
        raise ValueError("header must be '<quantity>_<unit>,counts'")
    kind, factor = parse_header(head[0])
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"malformed data row: {exc}") from exc
    x = data[:, 0] * factor
    if kind == "time":
        return TimeTrace(x, data[:, 1])
    return Spectrum(x, data[:, 1], kind)


def write_xy_csv(obj, fh=None, unit=None) -> str:
    """Serialize a Spectrum or TimeTrace; returns the text when ``fh`` is None."""
    kind = "time" if isinstance(obj, TimeTrace) else obj.x_kind
    x = obj.t if kind == "time" else obj.x
    unit = unit or _DEFAULT_UNIT[kind]
    factor = _UNITS[unit]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{_HEAD[kind]}_{unit}", "counts"])
    for a, b in zip(x / factor, obj.counts):
        w.writerow([repr(float(a)), repr(float(b))])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text
