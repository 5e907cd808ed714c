"""Run configuration: a YAML document with unit-suffixed keys.

Sections are ``geometry``, ``materials``, ``solver``, ``dipoles``,
``emitter``, ``spin`` and ``sweep``; all optional except where a command
needs them. Keys carry their unit as a suffix (``_nm``, ``_ns``, ``_hz``,
``_per_s``, ``_rad_s``); everything is converted to SI on access.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass

import numpy as np
import yaml

from .eigensolver.analysis import DipoleSpec
from .eigensolver.domain import PML
from .eigensolver.geometry import Geometry, nanopan, pec_cylinder
from .materials import GAMMA_ROOM_SILVER, DrudeParams, MaterialModel, scale_damping
from .purcell import EmitterParams
from .spinmodel import SpinParams

SECTIONS = ("geometry", "materials", "solver", "dipoles", "emitter", "spin", "sweep")

NUM = (int, float)


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads 1e-6 and 1.4e16 as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                  |[0-9][0-9_]*[eE][-+]?[0-9]+
                  |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                  |[-+]?\.(?:inf|Inf|INF)
                  |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


# key -> (accepted types, default); default None means optional
_GEOMETRY = {
    "kind": (str, "nanopan"),
    "disk_diameter_nm": (NUM, 900.0),
    "disk_thickness_nm": (NUM, 300.0),
    "metal_thickness_nm": (NUM, 500.0),
    "substrate_index": (NUM, 2.6),
    "disk_material": (str, "sic"),
    "metal_material": (str, "silver"),
    "cover_material": (str, "vacuum"),
    "substrate_material": (str, "sic"),
}
_SOLVER = {
    "h_nm": (NUM, 5.0),
    "pad_nm": (NUM, 200.0),
    "pml_cells": (int, 10),
    "pml_order": (int, 3),
    "pml_reflection": (NUM, 1e-6),
    "m": ((int, list), 6),
    "guess_nm": (NUM, 861.0),
    "n_modes": (int, 1),
    "fixed_point_tol": (NUM, 1e-6),
    "max_sweeps": (int, 20),
}
_EMITTER = {
    "lambda_zpl_nm": (NUM, 861.0),
    "tau0_ns": (NUM, 6.8),
    "debye_waller": (NUM, 0.07),
    "eta": (NUM, 0.038),
    "n_eff": (NUM, 2.6),
}
_SPIN = {
    "d_gs_2_hz": (NUM, 4.5e6),
    "d_es_2_hz": (NUM, 1.0025e9),
    "tau_ns": (NUM, 2.7),
    "isc_rate_per_s": (NUM, None),
    "shelf_decay_per_s": (NUM, 1.0 / 150e-9),
    "mw_rate_per_s": (NUM, 5e7),
    "opt_linewidth_hz": (NUM, None),
    "diffusion_sigma_hz": (NUM, 0.0),
    "target_fwhm_hz": (NUM, None),
    "pump_rate_peak_per_s": (NUM, None),
    "detuning_min_hz": (NUM, -0.5e9),
    "detuning_max_hz": (NUM, 1.498e9),
    "n_points": (int, 400),
    "gamma_tl_hz": (NUM, None),
}
_SWEEP = {
    "diameter_start_nm": (NUM, 600.0),
    "diameter_stop_nm": (NUM, 1000.0),
    "diameter_step_nm": (NUM, 50.0),
    "m": ((int, list), None),
    "workers": (int, None),
}
_DIPOLE = {"r_nm": (NUM, None), "z_nm": (NUM, None), "orientation": (list, [0.0, 0.0, 1.0])}
_MAT_CONSTANT = {"kind": (str, "constant"), "eps": (NUM, None), "index": (NUM, None)}
_MAT_DRUDE = {
    "kind": (str, "drude"),
    "eps_inf": (NUM, 3.1),
    "omega_p_rad_s": (NUM, 1.4e16),
    "gamma_room_rad_s": (NUM, GAMMA_ROOM_SILVER),
    "conductivity_ratio": (NUM, 1.0),
}

_SCHEMAS = {"geometry": _GEOMETRY, "solver": _SOLVER, "emitter": _EMITTER,
            "spin": _SPIN, "sweep": _SWEEP}


def _check_section(name, data, schema):
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a mapping")
    unknown = sorted(set(data) - set(schema))
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {', '.join(unknown)}")
    out = {}
    for key, (types, default) in schema.items():
        if key in data:
            v = data[key]
            if isinstance(v, bool) or not isinstance(v, types):
                raise ConfigError(f"[{name}] {key}: unexpected value {v!r}")
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigError(f"[{name}] {key}: must be finite")
            out[key] = v
        elif default is not None:
            out[key] = copy.deepcopy(default)
    return out


def _m_list(v, where):
    ms = v if isinstance(v, list) else [v]
    if not ms or any(isinstance(m, bool) or not isinstance(m, int) or m < 0 for m in ms):
        raise ConfigError(f"{where}: m must be a non-negative integer or a non-empty list of them")
    return ms


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with defaults filled in (user units)."""

    data: dict

    # -- parsing / serialization ---------------------------------------

    @classmethod
    def from_dict(cls, raw) -> "RunConfig":
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping of sections")
        unknown = sorted(set(raw) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown sections: {', '.join(unknown)}")
        data = {}
        for sec in ("geometry", "solver", "emitter"):
            data[sec] = _check_section(sec, raw.get(sec) or {}, _SCHEMAS[sec])
        mats = raw.get("materials")
        data["materials"] = _check_materials(default_materials() if mats is None else mats)
        dips = raw.get("dipoles") or []
        if not isinstance(dips, list):
            raise ConfigError("[dipoles] must be a list")
        data["dipoles"] = [_check_dipole(i, d) for i, d in enumerate(dips)]
        if "spin" in raw:
            data["spin"] = _check_section("spin", raw["spin"] or {}, _SPIN)
        if "sweep" in raw:
            data["sweep"] = _check_section("sweep", raw["sweep"] or {}, _SWEEP)
        cfg = cls(data)
        cfg._validate()
        return cfg

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        try:
            raw = yaml.load(text, Loader=_Loader)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_yaml(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc

    def to_dict(self) -> dict:
        return copy.deepcopy({k: self.data[k] for k in SECTIONS if k in self.data})

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)

    def _validate(self):
        g = self.data["geometry"]
        if g["kind"] not in ("nanopan", "pec_cylinder"):
            raise ConfigError(f"[geometry] kind must be nanopan or pec_cylinder, got {g['kind']!r}")
        roles = ("disk_material",) if g["kind"] == "pec_cylinder" else (
            "disk_material", "metal_material", "cover_material", "substrate_material")
        for role in roles:
            if g[role] not in self.data["materials"]:
                raise ConfigError(f"[geometry] {role} refers to undefined material {g[role]!r}")
        if g["kind"] == "pec_cylinder" and self.data["materials"][g["disk_material"]]["kind"] != "constant":
            raise ConfigError("[geometry] pec_cylinder needs a constant disk material")
        _m_list(self.data["solver"]["m"], "[solver]")
        s = self.data["solver"]
        if not (s["h_nm"] > 0 and s["pad_nm"] > 0 and s["guess_nm"] > 0):
            raise ConfigError("[solver] h_nm, pad_nm and guess_nm must be positive")
        if "sweep" in self.data:
            sw = self.data["sweep"]
            if sw.get("m") is not None:
                _m_list(sw["m"], "[sweep]")
            if not sw["diameter_step_nm"] > 0 or sw["diameter_stop_nm"] < sw["diameter_start_nm"]:
                raise ConfigError("[sweep] diameter range is empty")
            if sw.get("workers") is not None and sw["workers"] < 1:
                raise ConfigError("[sweep] workers must be >= 1")
        if "spin" in self.data:
            sp = self.data["spin"]
            if sp["n_points"] < 8 or not sp["detuning_max_hz"] > sp["detuning_min_hz"]:
                raise ConfigError("[spin] detuning scan needs >= 8 points and max > min")
        try:
            self.geometry()
            self.emitter()
            if "spin" in self.data:
                self.spin_params()
            self.dipoles()
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    # -- SI accessors ----------------------------------------------------

    def material(self, label: str) -> MaterialModel:
        spec = self.data["materials"][label]
        if spec["kind"] == "drude":
            gamma = scale_damping(spec["gamma_room_rad_s"], spec["conductivity_ratio"])
            return MaterialModel.drude(label, DrudeParams(spec["eps_inf"], spec["omega_p_rad_s"], gamma))
        if "eps" in spec:
            return MaterialModel.constant(label, spec["eps"])
        return MaterialModel.from_index(label, spec["index"])

    def geometry(self, diameter: float | None = None) -> Geometry:
        g = self.data["geometry"]
        d = g["disk_diameter_nm"] * 1e-9 if diameter is None else diameter
        if g["kind"] == "pec_cylinder":
            disk = self.material(g["disk_material"])
            n = math.sqrt(complex(disk.eps).real)
            return pec_cylinder(0.5 * d, g["disk_thickness_nm"] * 1e-9, n)
        return nanopan(
            d, g["disk_thickness_nm"] * 1e-9, g["metal_thickness_nm"] * 1e-9,
            substrate_index=g["substrate_index"],
            metal=self.material(g["metal_material"]),
            disk=self.material(g["disk_material"]),
            cover=self.material(g["cover_material"]),
        )

    def solver(self) -> dict:
        s = self.data["solver"]
        return {
            "h": s["h_nm"] * 1e-9,
            "pad": s["pad_nm"] * 1e-9,
            "pml": PML(cells=s["pml_cells"], order=s["pml_order"], reflection=s["pml_reflection"]),
            "m": _m_list(s["m"], "[solver]"),
            "guess": s["guess_nm"] * 1e-9,
            "n_modes": s["n_modes"],
            "tol": s["fixed_point_tol"],
            "max_sweeps": s["max_sweeps"],
        }

    def dipoles(self) -> list:
        return [
            DipoleSpec.along((d["r_nm"] * 1e-9, d["z_nm"] * 1e-9), d["orientation"])
            for d in self.data["dipoles"]
        ]

    def emitter(self) -> EmitterParams:
        e = self.data["emitter"]
        return EmitterParams(e["lambda_zpl_nm"] * 1e-9, e["tau0_ns"] * 1e-9,
                             e["debye_waller"], e["eta"])

    @property
    def n_eff(self) -> float:
        return float(self.data["emitter"]["n_eff"])

    def spin_params(self) -> SpinParams:
        if "spin" not in self.data:
            raise ConfigError("configuration has no [spin] section")
        s = self.data["spin"]
        return SpinParams(
            d_gs_2=s["d_gs_2_hz"], d_es_2=s["d_es_2_hz"],
            gamma_rad=1.0 / (s["tau_ns"] * 1e-9),
            isc_rate=s.get("isc_rate_per_s"),
            shelf_decay=s["shelf_decay_per_s"],
            mw_rate=s["mw_rate_per_s"],
            opt_linewidth=s.get("opt_linewidth_hz"),
            diffusion_sigma=s["diffusion_sigma_hz"],
            pump_rate_peak=s.get("pump_rate_peak_per_s"),
        )

    def detunings(self):
        s = self.data["spin"]
        return np.linspace(s["detuning_min_hz"], s["detuning_max_hz"], s["n_points"])

    def sweep_diameters_nm(self):
        """Swept disk diameters [nm], start to stop inclusive."""
        if "sweep" not in self.data:
            raise ConfigError("configuration has no [sweep] section")
        sw = self.data["sweep"]
        n = int(math.floor((sw["diameter_stop_nm"] - sw["diameter_start_nm"])
                           / sw["diameter_step_nm"] + 1e-9)) + 1
        return [round(sw["diameter_start_nm"] + i * sw["diameter_step_nm"], 9) for i in range(n)]

    def sweep_orders(self):
        sw = self.data.get("sweep", {})
        m = sw.get("m")
        return _m_list(m if m is not None else self.data["solver"]["m"], "[sweep]")


def default_materials() -> dict:
    return {
        "silver": {"kind": "drude", "eps_inf": 3.1, "omega_p_rad_s": 1.4e16,
                   "gamma_room_rad_s": GAMMA_ROOM_SILVER, "conductivity_ratio": 1.0},
        "sic": {"kind": "constant", "index": 2.6},
        "vacuum": {"kind": "constant", "eps": 1.0},
    }


def _check_materials(mats):
    if not isinstance(mats, dict) or not mats:
        raise ConfigError("[materials] must be a non-empty mapping of labels")
    out = {}
    for label, spec in mats.items():
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError(f"[materials] {label}: needs a 'kind'")
        kind = spec["kind"]
        if kind == "drude":
            out[label] = _check_section(f"materials.{label}", spec, _MAT_DRUDE)
        elif kind == "constant":
            item = _check_section(f"materials.{label}", spec, _MAT_CONSTANT)
            if ("eps" in item) == ("index" in item):
                raise ConfigError(f"[materials] {label}: give exactly one of eps, index")
            out[label] = item
        else:
            raise ConfigError(f"[materials] {label}: unknown kind {kind!r}")
    return out


def _check_dipole(i, d):
    item = _check_section(f"dipoles[{i}]", d, _DIPOLE)
    for key in ("r_nm", "z_nm"):
        if key not in item:
            raise ConfigError(f"[dipoles][{i}] missing {key}")
    o = item["orientation"]
    if len(o) != 3 or not all(isinstance(c, NUM) and not isinstance(c, bool) for c in o):
        raise ConfigError(f"[dipoles][{i}] orientation must be three numbers")
    if not any(o):
        raise ConfigError(f"[dipoles][{i}] orientation is the zero vector")
    return item
