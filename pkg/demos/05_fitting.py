"""Fitting the curves a cavity-emitter experiment produces.

Generates three noisy data sets, writes them as two-column CSV the way a
spectrometer or TCSPC export would look, reads them back and fits:

* a cavity transmission peak at 862 nm with Q = 700 (single Lorentzian);
* a PLE scan with two lines 0.998 GHz apart (double Lorentzian);
* a photon-counting decay with tau = 2.7 ns (single exponential).

    python demos/05_fitting.py [--seed 0]
"""

import argparse

import numpy as np

from nanopan.spectra import (
    Spectrum,
    TimeTrace,
    fit_exp_decay,
    fit_lorentzian,
    lorentzian,
    read_xy_csv,
    write_xy_csv,
)


def roundtrip(obj):
    return read_xy_csv(write_xy_csv(obj))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    rng = np.random.default_rng(ap.parse_args().seed)

    fwhm = 862.0 / 700
    x = np.linspace(862 - 11 * fwhm, 862 + 11 * fwhm, 401)
    y = 0.25 + lorentzian(x, 862.0, fwhm, 1.0) + rng.normal(0, 0.05, x.size)
    cav = roundtrip(Spectrum(x * 1e-9, np.clip(y, 0, None)))
    pk = fit_lorentzian(cav).peaks[0]
    print(f"cavity peak: {pk.center * 1e9:.3f} nm, FWHM {pk.fwhm * 1e9:.3f} nm, "
          f"Q = {pk.q:.0f} (true 700)")

    det = np.linspace(-0.5e9, 1.5e9, 2001)
    y = (0.25 + lorentzian(det, 0.0, 130e6, 1.0) + lorentzian(det, 0.998e9, 200e6, 1.0)
         + rng.normal(0, 0.05, det.size))
    ple = roundtrip(Spectrum(det, np.clip(y, 0, None), "frequency_detuning"))
    fit = fit_lorentzian(ple, 2)
    a1, a2 = fit.peaks
    print(f"PLE lines: separation {(a2.center - a1.center) / 1e9:.4f} GHz, "
          f"FWHM {a1.fwhm / 1e6:.0f} and {a2.fwhm / 1e6:.0f} MHz")

    t = np.linspace(0, 27e-9, 500)
    counts = rng.poisson(1e4 * np.exp(-t / 2.7e-9) + 10).astype(float)
    dec = fit_exp_decay(roundtrip(TimeTrace(t, counts)))
    print(f"decay: tau = {dec.tau * 1e9:.3f} +- {dec.stderr_tau * 1e9:.3f} ns (true 2.7 ns)")


if __name__ == "__main__":
    main()
