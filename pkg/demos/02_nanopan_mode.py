"""The whispering-gallery mode of a 900 nm silver-clad SiC nanopan.

Solves the m = 6 resonance near 861 nm for the geometry in
configs/nanopan900.yaml, then reports what an emitter in the disk would see:
quality factor, mode volume, polarization, the overlap factor at the
configured dipole, and the resulting Purcell factors. The field map is
written as CSV for plotting.

    python demos/02_nanopan_mode.py [--h-nm 5] [--out mode_field.csv]
"""

import argparse
from pathlib import Path

from nanopan.config import RunConfig
from nanopan.eigensolver import (
    Plane,
    build_domain,
    export_field_profile,
    mode_summary,
    omega_for_wavelength,
    solve_modes,
)
from nanopan.purcell import CavityParams, max_purcell, zpl_purcell

CONFIG = Path(__file__).with_name("configs") / "nanopan900.yaml"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h-nm", type=float, default=None, help="grid step (default from config)")
    ap.add_argument("--out", default="mode_field.csv", help="rz field map CSV")
    args = ap.parse_args()

    cfg = RunConfig.load(CONFIG)
    sol = cfg.solver()
    h = args.h_nm * 1e-9 if args.h_nm else sol["h"]
    dom = build_domain(cfg.geometry(), h, 6, sol["pad"], pml=sol["pml"])
    print(f"grid {h * 1e9:g} nm, {dom.n_cells_across_radius()} cells across the disk radius")
    mode = solve_modes(dom, omega_for_wavelength(sol["guess"]), tol=sol["tol"],
                       max_sweeps=sol["max_sweeps"])[0]

    rec = mode_summary(mode, cfg.dipoles())
    print(f"resonance    {rec['lambda_res_m'] * 1e9:.2f} nm")
    print(f"Q            {rec['Q']:.0f}")
    print(f"V_mode       {rec['Vmode_m3'] * 1e18:.4f} um^3 "
          f"(literal weighting {rec['Vmode_literal_m3'] * 1e18:.4f})")
    print(f"polarization {rec['polarization']}, E_z energy fraction {rec['ez_fraction']:.2f}")

    em = cfg.emitter()
    fmax = max_purcell(CavityParams(rec["Q"], rec["Vmode_m3"], mode.lambda_res, cfg.n_eff))
    print(f"F_max        {fmax:.1f}")
    for dip, xi in zip(cfg.dipoles(), rec["xi_at"]):
        r, z = dip.position
        f = zpl_purcell(fmax, xi, rec["Q"], em.lambda_zpl, mode.lambda_res)
        print(f"dipole at r={r * 1e9:.0f} nm z={z * 1e9:.0f} nm: xi = {xi:.3f}, "
              f"F_zpl at {em.lambda_zpl * 1e9:.0f} nm = {f:.1f}")

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        export_field_profile(mode, Plane("rz")).to_csv(fh)
    print(f"field map written to {args.out}")


if __name__ == "__main__":
    main()
