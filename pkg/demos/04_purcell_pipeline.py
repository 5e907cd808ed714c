"""From cavity numbers and measured rates to Purcell factors.

Three routes to the enhancement of the V_Si zero-phonon line:

* the cavity formula F_max = 3/(4 pi^2) Q (lambda/n)^3 / V, reduced by the
  dipole overlap and by spectral detuning from the cavity line;
* the ratio of ZPL intensities with and without the cavity;
* the lifetime shortening, corrected for the ZPL branching ratio.

    python demos/04_purcell_pipeline.py
"""

import numpy as np

from nanopan.purcell import (
    CavityParams,
    max_purcell,
    purcell_from_intensity,
    purcell_from_lifetime,
    spectral_diffusion,
    transform_limit,
    zpl_purcell,
)

LAMBDA_CAV, N_EFF = 861e-9, 2.6


def main():
    cav = CavityParams(q=2000.0, v_mode=0.45 * (LAMBDA_CAV / N_EFF) ** 3,
                       lambda_cav=LAMBDA_CAV, n_eff=N_EFF)
    fmax = max_purcell(cav)
    print(f"F_max for Q = 2000, V = 0.45 (lambda/n)^3: {fmax:.1f}")

    print("ZPL enhancement versus emitter detuning (xi = 1):")
    for d_nm in (0.0, 0.1, 0.2, 0.43, 1.0):
        f = zpl_purcell(fmax, 1.0, cav.q, LAMBDA_CAV + d_nm * 1e-9, LAMBDA_CAV)
        print(f"  {d_nm:5.2f} nm  F_zpl = {f:7.1f}")

    for ratio in (33.0, 13.0):
        print(f"intensity ratio {ratio:g} -> F = {purcell_from_intensity(ratio, 1.0):g}")

    f_tau = purcell_from_lifetime(tau0=6.8e-9, eta=0.038, tau_on=2.7e-9, tau_off=9.72e-9)
    print(f"lifetime 9.72 ns -> 2.7 ns with ZPL branching 3.8%: F = {f_tau:.1f}")

    for fwhm, tau in ((118e6, 9.72e-9), (130e6, 2.7e-9)):
        tl = transform_limit(tau)
        sd = spectral_diffusion(fwhm, tl)
        print(f"linewidth {fwhm / 1e6:.0f} MHz at tau = {tau * 1e9:.2f} ns: transform limit "
              f"{tl / 1e6:.1f} MHz, excess {sd.value / 1e6:.1f} MHz")

    lam = np.linspace(858e-9, 864e-9, 7)
    print("F_zpl on a wavelength grid:", np.round(zpl_purcell(fmax, 0.58, cav.q, lam, LAMBDA_CAV), 1))


if __name__ == "__main__":
    main()
