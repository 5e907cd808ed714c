"""Staggered (r, z) grid for the body-of-revolution Maxwell problem.

Field components for azimuthal order m live at the Yee positions

    E_r (i+1/2, j)     E_phi (i, j)        E_z (i, j+1/2)
    H_r (i, j+1/2)     H_phi (i+1/2, j+1/2) H_z (i+1/2, j)

with node i at r = i*h and node j at z = z0 + j*h. Material labels are
sampled at cell centres (i+1/2, j+1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C0

from .geometry import Geometry

MIN_CELLS_PER_DIM = 40
MIN_CELLS_PER_RADIUS = 10
MIN_PML_CELLS = 8


@dataclass(frozen=True)
class PML:
    """Polynomially graded stretched-coordinate absorber."""

    cells: int = 10
    order: int = 3
    reflection: float = 1e-6
    sides: frozenset = frozenset({"r_max", "z_min", "z_max"})

    def sigma_max(self, h: float) -> float:
        d = self.cells * h
        return -(self.order + 1) * C0 * math.log(self.reflection) / (2 * d)


@dataclass(frozen=True, eq=False)
class DiscretizedDomain:
    geometry: Geometry
    h: float
    m: int
    nr: int
    nz: int
    z0: float
    cell_labels: np.ndarray = field(repr=False)
    pml: PML | None = None

    @property
    def r_nodes(self):
        return np.arange(self.nr + 1) * self.h

    @property
    def r_half(self):
        return (np.arange(self.nr) + 0.5) * self.h

    @property
    def z_nodes(self):
        return self.z0 + np.arange(self.nz + 1) * self.h

    @property
    def z_half(self):
        return self.z0 + (np.arange(self.nz) + 0.5) * self.h

    @property
    def shape(self):
        return (self.nr, self.nz)

    @property
    def extent(self):
        return (0.0, self.nr * self.h, self.z0, self.z0 + self.nz * self.h)

    @property
    def materials(self):
        return [self.geometry.materials[k] for k in self.geometry.material_labels]

    @property
    def dispersive(self) -> bool:
        return any(mat.dispersive for mat in self.materials)

    def physical_mask(self):
        """Cells outside the absorbing layers."""
        mask = np.ones(self.shape, dtype=bool)
        if self.pml is None:
            return mask
        n = self.pml.cells
        if "r_max" in self.pml.sides:
            mask[-n:, :] = False
        if "z_min" in self.pml.sides:
            mask[:, :n] = False
        if "z_max" in self.pml.sides:
            mask[:, -n:] = False
        return mask

    def region_mask(self, name: str):
        reg = self.geometry.region_of(name)
        r, z = np.meshgrid(self.r_half, self.z_half, indexing="ij")
        return reg.contains(r, z)

    def cell_volumes(self):
        """Volume of each cell's full revolution, 2 pi r h^2."""
        return np.outer(2 * np.pi * self.r_half * self.h * self.h, np.ones(self.nz))

    def n_cells_across_radius(self) -> int:
        return int(round(self.geometry.disk_radius / self.h))

    # Stretched-coordinate profiles ------------------------------------

    def _pml_profile(self, x, start, outward):
        """(sigma, integral of sigma) at positions x for a layer starting at ``start``."""
        d = self.pml.cells * self.h
        smax = self.pml.sigma_max(self.h)
        u = np.clip(outward * (x - start), 0.0, None)
        p = self.pml.order
        return smax * (u / d) ** p, smax * d / (p + 1) * (u / d) ** (p + 1)

    def stretch(self, omega_ref: float):
        """Complex stretch factors and stretched radii.

        Returns a dict with ``sr_n, sr_h, rt_n, rt_h, sz_n, sz_h`` (s factors
        and complex radii at integer and half-integer positions).
        """
        rn, rh, zn, zh = self.r_nodes, self.r_half, self.z_nodes, self.z_half
        out = {
            "sr_n": np.ones(rn.size, complex), "sr_h": np.ones(rh.size, complex),
            "rt_n": rn.astype(complex), "rt_h": rh.astype(complex),
            "sz_n": np.ones(zn.size, complex), "sz_h": np.ones(zh.size, complex),
        }
        if self.pml is None:
            return out
        w = float(omega_ref)
        d = self.pml.cells * self.h
        sides = self.pml.sides
        if "r_max" in sides:
            start = rn[-1] - d
            for key, x in (("n", rn), ("h", rh)):
                sig, integ = self._pml_profile(x, start, 1.0)
                out["sr_" + key] = 1 + 1j * sig / w
                out["rt_" + key] = x + 1j * integ / w
        for key, x in (("n", zn), ("h", zh)):
            sig = np.zeros(x.size)
            if "z_max" in sides:
                sig = sig + self._pml_profile(x, zn[-1] - d, 1.0)[0]
            if "z_min" in sides:
                sig = sig + self._pml_profile(x, zn[0] + d, -1.0)[0]
            out["sz_" + key] = 1 + 1j * sig / w
        return out


def build_domain(
    g: Geometry,
    h: float,
    m: int,
    pad: float = 200e-9,
    *,
    pml: PML | None = None,
) -> DiscretizedDomain:
    """Discretize ``g`` on a staggered grid of spacing ``h`` for azimuthal order ``m``.

    Open geometries get ``pad`` of physical domain beyond the disk radius, below
    the substrate interface and above the disk top, followed by absorbing layers.
    Closed geometries are meshed exactly on their bounding box.
    """
    if not h > 0:
        raise ValueError("grid spacing must be positive")
    if int(m) != m or m < 0:
        raise ValueError(f"azimuthal order must be a non-negative integer, got {m}")
    m = int(m)
    a = g.disk_radius
    if a / h < MIN_CELLS_PER_RADIUS - 1e-9:
        raise ValueError(
            f"grid too coarse: {a / h:.1f} cells across the disk radius "
            f"(need >= {MIN_CELLS_PER_RADIUS})"
        )

    if g.closed:
        r0, r1, z_lo, z_hi = g.bounding_box()
        if r0 != 0.0:
            raise ValueError("closed geometry must start at the axis")
        nr, nz = _snap(r1 / h), _snap((z_hi - z_lo) / h)
        z0 = z_lo
        pml = None
        if nr < 2 or nz < 2:
            raise ValueError("closed cavity needs at least two cells per dimension")
    else:
        if not pad > 0:
            raise ValueError("open geometry needs pad > 0 in front of the absorbing layers")
        pml = pml or PML()
        if pml.cells < MIN_PML_CELLS:
            raise ValueError(f"PML needs >= {MIN_PML_CELLS} cells, got {pml.cells}")
        n_pad = math.ceil(pad / h - 1e-9)
        nr_phys = math.ceil((a + pad) / h - 1e-9)
        n_disk = math.ceil(g.disk_thickness / h - 1e-9)
        nr = nr_phys + (pml.cells if "r_max" in pml.sides else 0)
        nz = 2 * n_pad + n_disk
        nz += pml.cells * sum(s in pml.sides for s in ("z_min", "z_max"))
        z0 = -n_pad * h - (pml.cells * h if "z_min" in pml.sides else 0.0)
        if min(nr, nz) < MIN_CELLS_PER_DIM:
            raise ValueError(
                f"grid {nr}x{nz} has fewer than {MIN_CELLS_PER_DIM} cells in a dimension"
            )

    r = (np.arange(nr) + 0.5) * h
    z = z0 + (np.arange(nz) + 0.5) * h
    rr, zz = np.meshgrid(r, z, indexing="ij")
    labels = g.label_map(rr, zz)
    return DiscretizedDomain(g, h, m, nr, nz, z0, labels, pml)


def _snap(x: float) -> int:
    n = int(round(x))
    if abs(x - n) > 1e-6 * max(1.0, x):
        raise ValueError(f"closed-cavity extent is not a whole number of cells ({x:.4f})")
    return n
