"""Axisymmetric device geometry: the nanopan stack and closed test cavities.

Coordinates are cylindrical (r, z). For the nanopan, z = 0 is the plane where
the etched SiC disk meets the substrate, the disk occupies 0 < z < t and the
silver cap starts at z = t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..materials import MaterialModel, silicon_carbide, silver, vacuum

MIN_DIAMETER = 100e-9
MAX_DIAMETER = 5e-6

INF = math.inf


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle in the (r, z) half-plane filled with one material.

    Bounds may be infinite; they are clipped to the computational domain.
    """

    name: str
    material: str
    r_min: float
    r_max: float
    z_min: float
    z_max: float

    def contains(self, r, z):
        return (r >= self.r_min) & (r < self.r_max) & (z >= self.z_min) & (z < self.z_max)

    def overlaps(self, other: "Region") -> bool:
        dr = min(self.r_max, other.r_max) - max(self.r_min, other.r_min)
        dz = min(self.z_max, other.z_max) - max(self.z_min, other.z_min)
        return dr > 0 and dz > 0


@dataclass(frozen=True)
class Geometry:
    """Device stack plus a region map assigning materials to the (r, z) plane.

    ``closed=True`` describes a cavity bounded by perfect electric conductor on
    the bounding box of its regions; no absorbing layers are attached.
    """

    disk_diameter: float
    disk_thickness: float
    metal_thickness: float
    substrate_index: float
    regions: tuple[Region, ...]
    materials: dict[str, MaterialModel] = field(hash=False)
    closed: bool = False

    def __post_init__(self):
        for name in ("disk_diameter", "disk_thickness", "metal_thickness", "substrate_index"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not MIN_DIAMETER <= self.disk_diameter <= MAX_DIAMETER:
            raise ValueError(
                f"disk_diameter {self.disk_diameter:g} m outside guard range "
                f"[{MIN_DIAMETER:g}, {MAX_DIAMETER:g}]"
            )
        if not self.regions:
            raise ValueError("empty region map")
        for reg in self.regions:
            if reg.material not in self.materials:
                raise ValueError(f"region {reg.name!r} uses undefined material {reg.material!r}")
            if reg.r_min < 0 or not (reg.r_max > reg.r_min and reg.z_max > reg.z_min):
                raise ValueError(f"region {reg.name!r} has inverted or negative bounds")
        for i, a in enumerate(self.regions):
            for b in self.regions[i + 1:]:
                if a.overlaps(b):
                    raise ValueError(f"regions {a.name!r} and {b.name!r} overlap")
        if self.closed:
            bb = self.bounding_box()
            if not all(math.isfinite(v) for v in bb):
                raise ValueError("closed geometry needs finite region bounds")

    @property
    def disk_radius(self) -> float:
        return 0.5 * self.disk_diameter

    def bounding_box(self):
        return (
            min(r.r_min for r in self.regions),
            max(r.r_max for r in self.regions),
            min(r.z_min for r in self.regions),
            max(r.z_max for r in self.regions),
        )

    def label_map(self, r, z):
        """Index into ``material_labels`` for each point; raises on gaps."""
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        labels = self.material_labels
        out = np.full(np.broadcast(r, z).shape, -1, dtype=int)
        for reg in self.regions:
            hit = reg.contains(r, z)
            if np.any(out[hit] >= 0):
                raise ValueError(f"region {reg.name!r} overlaps another region")
            out[hit] = labels.index(reg.material)
        if np.any(out < 0):
            raise ValueError("region map leaves part of the domain uncovered")
        return out

    @property
    def material_labels(self) -> list[str]:
        return sorted(self.materials)

    def region_of(self, name: str) -> Region:
        for reg in self.regions:
            if reg.name == name:
                return reg
        raise KeyError(name)

    def with_diameter(self, diameter: float) -> "Geometry":
        """Same stack with a different disk diameter (nanopan layout only)."""
        mats = dict(self.materials)
        return nanopan(
            diameter,
            self.disk_thickness,
            self.metal_thickness,
            substrate_index=self.substrate_index,
            metal=mats.get("silver"),
            cover=mats.get("cover"),
            disk=mats.get("disk"),
        )


def nanopan(
    disk_diameter: float = 900e-9,
    disk_thickness: float = 300e-9,
    metal_thickness: float = 500e-9,
    *,
    substrate_index: float = 2.6,
    metal: MaterialModel | None = None,
    disk: MaterialModel | None = None,
    cover: MaterialModel | None = None,
) -> Geometry:
    """SiC disk on a SiC substrate, capped and side-clad by silver."""
    a, t, tm = 0.5 * disk_diameter, disk_thickness, metal_thickness
    metal = metal or silver()
    disk = disk or silicon_carbide("disk", substrate_index)
    cover = cover or vacuum("cover")
    materials = {
        "substrate": silicon_carbide("substrate", substrate_index),
        "disk": MaterialModel(**{**disk.__dict__, "label": "disk"}),
        "silver": MaterialModel(**{**metal.__dict__, "label": "silver"}),
        "cover": MaterialModel(**{**cover.__dict__, "label": "cover"}),
    }
    regions = (
        Region("substrate", "substrate", 0.0, INF, -INF, 0.0),
        Region("disk", "disk", 0.0, a, 0.0, t),
        Region("sidewall", "silver", a, INF, 0.0, t),
        Region("cap", "silver", 0.0, INF, t, t + tm),
        Region("cover", "cover", 0.0, INF, t + tm, INF),
    )
    return Geometry(disk_diameter, t, tm, substrate_index, regions, materials)


def pec_cylinder(radius: float = 450e-9, length: float = 100e-9, n: float = 2.6) -> Geometry:
    """Closed PEC can filled with a uniform dielectric (analytic test cavity)."""
    fill = MaterialModel.from_index("disk", n)
    regions = (Region("disk", "disk", 0.0, radius, 0.0, length),)
    return Geometry(2 * radius, length, length, n, regions, {"disk": fill}, closed=True)
