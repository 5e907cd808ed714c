"""Body-of-revolution finite-difference eigenmode solver for axisymmetric cavities."""

from .analysis import (
    TE_LIKE,
    TM_LIKE,
    DipoleSpec,
    FieldProfile,
    Plane,
    UndefinedQError,
    classify_polarization,
    export_field_profile,
    ez_energy_fraction,
    field_at,
    mode_summary,
    mode_volume,
    overlap_factor,
    quality_factor,
)
from .domain import PML, DiscretizedDomain, build_domain
from .geometry import Geometry, Region, nanopan, pec_cylinder
from .solver import (
    ConvergenceError,
    EigenMode,
    EigenSolverError,
    NoModeFound,
    omega_for_wavelength,
    solve_modes,
    track_mode,
)

__all__ = [
    "TE_LIKE", "TM_LIKE", "DipoleSpec", "FieldProfile", "Plane", "UndefinedQError",
    "classify_polarization", "export_field_profile", "ez_energy_fraction", "field_at",
    "mode_summary", "mode_volume", "overlap_factor", "quality_factor",
    "PML", "DiscretizedDomain", "build_domain",
    "Geometry", "Region", "nanopan", "pec_cylinder",
    "ConvergenceError", "EigenMode", "EigenSolverError", "NoModeFound",
    "omega_for_wavelength", "solve_modes", "track_mode",
]
