import math

import numpy as np
import pytest

from nanopan.purcell import transform_limit
from nanopan.spectra import fit_lorentzian
from nanopan.spinmodel import (
    EXCITED,
    GROUND,
    LEVELS,
    MW_PAIRS,
    SHELF,
    RateSystem,
    SpinParams,
    build_rate_system,
    default_detunings,
    diffusion_kernel,
    fitted_fwhm,
    linewidth_preset,
    linewidth_report,
    long_time_limit,
    ple_signal,
    ple_spectrum,
    steady_state,
    tune_diffusion,
)

P = SpinParams()
# default scan: 400 points over -0.5 GHz .. A2 + 0.5 GHz
GRID_STEP = (P.line_separation + 1e9) / 399


def test_defaults_resolve():
    assert P.isc_rate == pytest.approx(0.5 * P.gamma_rad)
    assert P.pump_rate_peak == pytest.approx(0.1 * P.gamma_rad)
    assert P.opt_linewidth == pytest.approx(P.gamma_rad / (2 * math.pi))
    assert P.line_separation == pytest.approx(0.998e9)


@pytest.mark.parametrize("kw", [
    dict(isc_rate=-1.0), dict(mw_rate=math.inf), dict(d_gs_2=2e9),
    dict(opt_linewidth=0.0), dict(shelf_decay=math.nan),
])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        SpinParams(**kw)


@pytest.mark.parametrize("det", [-3e8, 0.0, 1e8, 0.998e9, 2e9])
def test_generator_columns_sum_to_zero(det):
    g = build_rate_system(P, det).generator
    assert np.all(np.abs(g.sum(axis=0)) <= 1e-12 * np.abs(g).max())
    off = g - np.diag(np.diag(g))
    assert np.all(off >= 0)


def test_generator_structure():
    r = build_rate_system(P, 0.0)
    w = P.pump_rate_peak
    assert r.rate("g+1/2", "e+1/2") == pytest.approx(w)
    assert r.rate("e+1/2", "g+1/2") == pytest.approx(w + P.gamma_rad)
    assert r.rate("e+1/2", "g-1/2") == 0.0
    assert r.rate("e+3/2", "shelf") == pytest.approx(P.isc_rate)
    for g in ("g+1/2", "g-1/2", "g+3/2", "g-3/2"):
        assert r.rate("shelf", g) == pytest.approx(P.shelf_decay / 4)
    assert r.rate("g+1/2", "g+3/2") == r.rate("g+3/2", "g+1/2") == P.mw_rate
    # A2 pumped at the Lorentzian tail from the A1 origin
    hw = P.opt_linewidth / 2
    assert r.rate("g+3/2", "e+3/2") == pytest.approx(w * hw**2 / (P.line_separation**2 + hw**2))


def test_mw_off_removes_ground_coupling():
    g = build_rate_system(P.with_(mw_rate=0.0), 0.0).generator
    for a in GROUND:
        for b in GROUND:
            if a != b:
                assert g[a, b] == 0.0


def test_rate_system_validation():
    with pytest.raises(ValueError):
        RateSystem(("a", "b"), np.array([[-1.0, 1.0], [1.0, -2.0]]))
    with pytest.raises(ValueError):
        RateSystem(("a", "b"), np.array([[1.0, -1.0], [-1.0, 1.0]]))
    with pytest.raises(ValueError):
        RateSystem(("a",), np.zeros((2, 2)))
    r = build_rate_system(P, 0.0)
    with pytest.raises(ValueError):
        r.generator[0, 0] = 1.0


def test_no_optics_mw_on_uniform_ground():
    p = P.with_(pump_rate_peak=0.0)
    pops = steady_state(build_rate_system(p, 0.0))
    assert pops[list(GROUND)] == pytest.approx([0.25] * 4, abs=1e-12)
    assert pops[list(EXCITED) + [SHELF]] == pytest.approx([0.0] * 5, abs=1e-12)


def test_no_optics_mw_off_keeps_initial_distribution():
    p = P.with_(pump_rate_peak=0.0, mw_rate=0.0)
    g = build_rate_system(p, 0.0).generator
    p0 = np.zeros(9)
    p0[list(GROUND)] = [0.4, 0.3, 0.2, 0.1]
    assert long_time_limit(g, p0)[list(GROUND)] == pytest.approx([0.4, 0.3, 0.2, 0.1], abs=1e-14)
    # excited population returns to where it came from
    p0 = np.zeros(9)
    p0[4], p0[SHELF] = 0.5, 0.5
    lim = long_time_limit(g, p0)
    assert lim.sum() == pytest.approx(1.0)
    assert lim[SHELF] == 0.0 and lim[list(EXCITED)].sum() == 0.0


def test_two_level_closed_form():
    for w, gam in [(1.0, 1.0), (0.1, 3.0), (7.0, 0.5)]:
        g = np.array([[-w, w + gam], [w, -(w + gam)]])
        pops = steady_state(RateSystem(("g", "e"), g))
        assert pops[1] == pytest.approx(w / (2 * w + gam), rel=1e-12)


def test_two_level_inside_full_model():
    # isc = 0, MW off: each spin-preserving pair is an isolated two-level system
    p = P.with_(isc_rate=0.0, mw_rate=0.0)
    pops = steady_state(build_rate_system(p, 0.0))
    w = p.pump_rate_peak
    assert pops[4] == pytest.approx(0.25 * w / (2 * w + p.gamma_rad), rel=1e-10)
    assert pops.sum() == pytest.approx(1.0, abs=1e-12)


def test_steady_state_is_stationary():
    r = build_rate_system(P, 0.0)
    pops = steady_state(r)
    assert np.abs(r.generator @ pops).max() <= 1e-6 * np.abs(r.generator).max()
    assert pops.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(pops >= -1e-12)


def test_labels():
    assert len(LEVELS) == 9 and LEVELS[SHELF] == "shelf"
    assert MW_PAIRS == ((0, 2), (1, 3))


def test_mw_off_is_dark():
    det = default_detunings(P)
    on = ple_signal(P, det, True).max()
    off = ple_signal(P, det, False).max()
    assert off <= 0.05 * on


def test_mw_on_two_peaks_separated():
    s = ple_spectrum(P, default_detunings(P), True)
    fit = fit_lorentzian(s, 2)
    sep = fit.peaks[1].center - fit.peaks[0].center
    assert abs(sep - 0.998e9) <= GRID_STEP


@pytest.mark.parametrize("kw", [
    dict(isc_rate=1e7), dict(shelf_decay=1e8), dict(mw_rate=1e6), dict(mw_rate=1e8),
    dict(pump_rate_peak=1e6), dict(diffusion_sigma=20e6), dict(gamma_rad=1 / 9.72e-9),
])
def test_separation_independent_of_rates(kw):
    p = P.with_(**kw)
    fit = fit_lorentzian(ple_spectrum(p, default_detunings(p), True), 2)
    assert abs(fit.peaks[1].center - fit.peaks[0].center - p.line_separation) <= GRID_STEP


def test_isc_monotonic_mw_off():
    det = np.linspace(-0.2e9, 0.2e9, 81)
    peaks = [ple_signal(P.with_(isc_rate=k), det, False).max()
             for k in np.geomspace(1e4, 1e10, 13)]
    assert np.all(np.diff(peaks) <= 1e-12 * max(peaks))


def test_fwhm_weak_pump_matches_linewidth():
    p = P.with_(pump_rate_peak=1e-3 * P.gamma_rad)
    assert fitted_fwhm(p) == pytest.approx(p.opt_linewidth, rel=0.02)


def test_kernel():
    u, w = diffusion_kernel(0.0, 50e6)
    assert u.tolist() == [0.0] and w.tolist() == [1.0]
    u, w = diffusion_kernel(30e6, 50e6)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.sum(w * u) == pytest.approx(0.0, abs=1e-3)
    assert math.sqrt(np.sum(w * u**2)) == pytest.approx(30e6, rel=1e-6)


def test_convolution_matches_voigt():
    from scipy.special import voigt_profile

    # a single weakly driven line is Lorentzian, so its Gaussian blur is a Voigt
    p = P.with_(pump_rate_peak=1e-6 * P.gamma_rad, d_es_2=1e13, isc_rate=0.0)
    sig = 40e6
    det = np.linspace(-300e6, 300e6, 61)
    raw0 = ple_signal(p, np.array([0.0]), True)[0]
    got = ple_signal(p.with_(diffusion_sigma=sig), det, True) / raw0
    hw = p.opt_linewidth / 2
    ref = voigt_profile(det, sig, hw) / (1 / (math.pi * hw))
    assert got == pytest.approx(ref, rel=1e-5)


def test_convolution_preserves_integral():
    # wide, non-uniform grid: dense over the lines, sparse in the tails
    core = np.linspace(-0.6e9, 1.6e9, 4401)
    tails = np.concatenate([-np.geomspace(200e9, 0.61e9, 400), np.geomspace(1.61e9, 200e9, 400)])
    det = np.sort(np.concatenate([core, tails]))
    p = P.with_(pump_rate_peak=1e-3 * P.gamma_rad)
    a = np.trapezoid(ple_signal(p, det, True), det)
    b = np.trapezoid(ple_signal(p.with_(diffusion_sigma=40e6), det, True), det)
    assert b == pytest.approx(a, rel=1e-6)


def test_ple_spectrum_rejects_unsorted():
    with pytest.raises(ValueError):
        ple_spectrum(P, np.array([0.0, -1.0, 1.0]))


def test_default_detunings():
    det = default_detunings(P)
    assert det.size == 400
    assert det[0] == pytest.approx(-0.5e9)
    assert det[-1] == pytest.approx(P.line_separation + 0.5e9)
    assert np.diff(det) == pytest.approx(np.full(399, GRID_STEP), rel=1e-9)
    assert GRID_STEP == pytest.approx(5e6, rel=2e-3)


def test_on_resonance_preset():
    p = tune_diffusion(linewidth_preset("on_resonance"), 130e6)
    rep = linewidth_report(ple_spectrum(p, default_detunings(p)), gamma_tl=43e6)
    a1 = rep["peaks"][0]
    assert a1["line"] == "A1"
    assert a1["fwhm_Hz"] == pytest.approx(130e6, abs=0.1e6)
    assert a1["spectral_diffusion_Hz"] == pytest.approx(87e6, abs=1e6)
    assert abs(rep["separation_Hz"] - 0.998e9) <= GRID_STEP


def test_off_resonance_preset():
    base = linewidth_preset("off_resonance")
    assert base.opt_linewidth == pytest.approx(transform_limit(9.72e-9))
    p = tune_diffusion(base, 118e6)
    rep = linewidth_report(ple_spectrum(p, default_detunings(p)),
                           gamma_tl=transform_limit(9.72e-9))
    assert rep["peaks"][0]["spectral_diffusion_Hz"] == pytest.approx(102e6, abs=1e6)


def test_zero_diffusion_preset():
    p = linewidth_preset("off_resonance", pump_rate_peak=1e-3 / 9.72e-9)
    rep = linewidth_report(ple_spectrum(p, default_detunings(p)),
                           gamma_tl=transform_limit(9.72e-9))
    assert rep["peaks"][0]["spectral_diffusion_Hz"] == pytest.approx(0.0, abs=1e6)


def test_preset_errors():
    with pytest.raises(ValueError):
        linewidth_preset("cryogenic")
    with pytest.raises(ValueError):
        tune_diffusion(P, 10e6)
