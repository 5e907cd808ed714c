"""Figures of merit of a computed resonance: Q, mode volume, polarization, overlap."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .operators import cell_energy_weight, cell_permittivity, to_cell_centres
from .solver import EigenMode

TM_LIKE = "TM-like"
TE_LIKE = "TE-like"


class UndefinedQError(ValueError):
    """Q requested for a mode that does not decay."""


def quality_factor(mode) -> float:
    """Q = Re(omega) / (-2 Im(omega)).

    Accepts an :class:`EigenMode` or a bare complex frequency.
    """
    w = complex(mode.omega if hasattr(mode, "omega") else mode)
    if not w.imag < 0:
        raise UndefinedQError(f"Im(omega) = {w.imag:.3e} is not negative; Q undefined")
    return w.real / (-2.0 * w.imag)


def _centre_fields(mode: EigenMode):
    return to_cell_centres(mode.fields)


def _intensity(c):
    return np.abs(c["Er"]) ** 2 + np.abs(c["Ephi"]) ** 2 + np.abs(c["Ez"]) ** 2


def mode_volume(mode: EigenMode, d=None, weighting: str = "energy") -> float:
    """Effective mode volume  int w|E|^2 dV / max(w|E|^2)  [m^3].

    The integral runs over the full revolution (2 pi r dr dz) of the cells
    outside the absorbing layers; because |E|^2 of an exp(i m phi) mode does
    not depend on phi the azimuthal average cancels between numerator and
    denominator.

    ``weighting="energy"`` uses Re d(omega eps)/d omega, which is positive in
    a Drude metal; ``"literal"`` uses Re(eps) everywhere (negative in metal).
    The peak in the denominator is taken over non-dispersive cells, where an
    emitter can sit; the metal-side peak at a sharp corner is grid-dependent.
    """
    d = d or mode.domain
    if weighting == "energy":
        w = cell_energy_weight(d, mode.omega.real)
    elif weighting == "literal":
        w = np.real(cell_permittivity(d, mode.omega.real))
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    dens = w * _intensity(_centre_fields(mode))
    phys = d.physical_mask()
    host = phys & _dielectric_mask(d)
    peak = dens[host if host.any() else phys].max()
    if not peak > 0:
        raise ValueError("mode has no electric energy in the physical domain")
    return float(np.sum(dens[phys] * d.cell_volumes()[phys]) / peak)


def _dielectric_mask(d):
    flags = np.array([not mat.dispersive for mat in d.materials])
    return flags[d.cell_labels]


def classify_polarization(mode: EigenMode, region: str = "disk") -> str:
    """TM-like when E_z carries more than half the electric energy in ``region``."""
    d = mode.domain
    c = _centre_fields(mode)
    mask = d.region_mask(region) & d.physical_mask()
    vol = d.cell_volumes()[mask]
    ez = np.sum(np.abs(c["Ez"][mask]) ** 2 * vol)
    total = np.sum(_intensity(c)[mask] * vol)
    return TM_LIKE if ez / total > 0.5 else TE_LIKE


def ez_energy_fraction(mode: EigenMode, region: str = "disk") -> float:
    d = mode.domain
    c = _centre_fields(mode)
    mask = d.region_mask(region) & d.physical_mask()
    vol = d.cell_volumes()[mask]
    return float(np.sum(np.abs(c["Ez"][mask]) ** 2 * vol) / np.sum(_intensity(c)[mask] * vol))


@dataclass(frozen=True)
class DipoleSpec:
    """Point dipole at (r, z) with a real unit orientation in the (r, phi, z) basis."""

    position: tuple
    orientation: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        o = np.asarray(self.orientation, dtype=float)
        if o.shape != (3,) or abs(np.linalg.norm(o) - 1.0) > 1e-12:
            raise ValueError(f"orientation must be a unit 3-vector, got {self.orientation}")
        if len(self.position) != 2:
            raise ValueError("position is (r, z)")

    @classmethod
    def along(cls, position, direction) -> "DipoleSpec":
        v = np.asarray(direction, dtype=float)
        return cls(tuple(position), tuple(v / np.linalg.norm(v)))


def field_at(mode: EigenMode, r: float, z: float):
    """Bilinear interpolation of the cell-centred (E_r, E_phi, E_z) at (r, z)."""
    d = mode.domain
    r0, r1, z0, z1 = d.extent
    if not (r0 <= r <= r1 and z0 <= z <= z1):
        raise ValueError(f"point (r={r:g}, z={z:g}) is outside the computational domain")
    c = _centre_fields(mode)
    fr = np.clip((r - 0.5 * d.h) / d.h, 0, d.nr - 1)
    fz = np.clip((z - d.z0 - 0.5 * d.h) / d.h, 0, d.nz - 1)
    i, j = min(int(fr), d.nr - 2), min(int(fz), d.nz - 2)
    tr, tz = fr - i, fz - j
    out = []
    for name in ("Er", "Ephi", "Ez"):
        a = c[name]
        out.append(
            (1 - tr) * (1 - tz) * a[i, j] + tr * (1 - tz) * a[i + 1, j]
            + (1 - tr) * tz * a[i, j + 1] + tr * tz * a[i + 1, j + 1]
        )
    return np.array(out)


def overlap_factor(mode: EigenMode, dip: DipoleSpec) -> float:
    """xi = (|mu_hat . E(r0)| / |E|_max)^2, with |E|_max over the physical domain."""
    d = mode.domain
    e = field_at(mode, *dip.position)
    peak = math.sqrt(_intensity(_centre_fields(mode))[d.physical_mask()].max())
    xi = abs(np.dot(np.asarray(dip.orientation), e)) ** 2 / peak**2
    return float(min(xi, 1.0))


@dataclass(frozen=True)
class Plane:
    """Field-export cut: ``"rz"`` half-plane or ``"top"`` view.

    For the top view ``z_offset`` is the depth below the disk/cap interface.
    """

    kind: str = "rz"
    z_offset: float = 10e-9

    def __post_init__(self):
        if self.kind not in ("rz", "top"):
            raise ValueError(f"plane kind must be 'rz' or 'top', got {self.kind!r}")


@dataclass
class FieldProfile:
    """Gridded field data normalized to max |E| = 1."""

    columns: dict
    shape: tuple

    def to_csv(self, fh=None) -> str:
        buf = fh or io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.columns)
        w.writerow(names)
        cols = [np.ravel(self.columns[n]) for n in names]
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue() if fh is None else ""


def export_field_profile(mode: EigenMode, plane: Plane = Plane()) -> FieldProfile:
    """Cartesian E components and |E| on an (r, z) cut at phi = 0 or a top view."""
    d = mode.domain
    c = _centre_fields(mode)
    if plane.kind == "rz":
        rr, zz = np.meshgrid(d.r_half, d.z_half, indexing="ij")
        ex, ey, ez = c["Er"], c["Ephi"], c["Ez"]
        coords = {"r_m": rr, "z_m": zz}
    else:
        z = d.geometry.disk_thickness - plane.z_offset
        _, _, z_lo, z_hi = d.extent
        if not z_lo <= z <= z_hi:
            raise ValueError(f"top-view plane z={z:g} m lies outside the domain")
        radial = np.array([field_at(mode, r, z) for r in d.r_half])
        phys = d.physical_mask().any(axis=1)
        rmax = d.r_half[phys].max()
        n = int(round(rmax / d.h))
        x = (np.arange(-n, n + 1)) * d.h
        xx, yy = np.meshgrid(x, x, indexing="ij")
        rho = np.hypot(xx, yy)
        phi = np.arctan2(yy, xx)
        comp = [np.interp(rho, d.r_half, radial[:, k].real)
                + 1j * np.interp(rho, d.r_half, radial[:, k].imag) for k in range(3)]
        rot = np.exp(1j * d.m * phi)
        er, ep, ez = (cmp * rot for cmp in comp)
        ex = er * np.cos(phi) - ep * np.sin(phi)
        ey = er * np.sin(phi) + ep * np.cos(phi)
        outside = rho > rmax
        for arr in (ex, ey, ez):
            arr[outside] = 0
        coords = {"x_m": xx, "y_m": yy}
    absE = np.sqrt(np.abs(ex) ** 2 + np.abs(ey) ** 2 + np.abs(ez) ** 2)
    scale = absE.max()
    if not scale > 0:
        raise ValueError("field vanishes on the requested plane")
    cols = dict(coords)
    for name, arr in (("Ex", ex), ("Ey", ey), ("Ez", ez)):
        cols[name + "_re"] = (arr / scale).real
        cols[name + "_im"] = (arr / scale).imag
    cols["absE"] = absE / scale
    return FieldProfile(cols, absE.shape)


def mode_summary(mode: EigenMode, dipoles=()) -> dict:
    """JSON-ready record for one mode."""
    try:
        q = quality_factor(mode)
    except UndefinedQError:
        q = math.inf
    return {
        "m": mode.m,
        "lambda_res_m": mode.lambda_res,
        "omega_re": mode.omega.real,
        "omega_im": mode.omega.imag,
        "Q": q,
        "Vmode_m3": mode_volume(mode),
        "Vmode_literal_m3": mode_volume(mode, weighting="literal"),
        "polarization": classify_polarization(mode),
        "ez_fraction": ez_energy_fraction(mode),
        "xi_at": [overlap_factor(mode, dp) for dp in dipoles],
        "residual": mode.residual,
    }
