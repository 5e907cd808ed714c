"""Sparse curl operators and material sampling on the staggered BOR grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .domain import DiscretizedDomain

COMPONENTS = ("Er", "Ephi", "Ez")


def component_shapes(nr: int, nz: int):
    return {"Er": (nr, nz + 1), "Ephi": (nr + 1, nz + 1), "Ez": (nr + 1, nz)}


def active_masks(d: DiscretizedDomain):
    """Unknowns that survive the PEC outer wall and the axis conditions.

    Tangential E vanishes on the outer box. On the axis, m = 0 keeps E_z and
    drops E_phi; m >= 1 drops both E_z and E_phi.
    """
    nr, nz = d.nr, d.nz
    er = np.zeros((nr, nz + 1), bool)
    er[:, 1:nz] = True
    ep = np.zeros((nr + 1, nz + 1), bool)
    ep[1:nr, 1:nz] = True
    ez = np.zeros((nr + 1, nz), bool)
    ez[(0 if d.m == 0 else 1):nr, :] = True
    return {"Er": er, "Ephi": ep, "Ez": ez}


@dataclass
class Layout:
    """Bookkeeping between the full stacked component vector and the unknowns."""

    shapes: dict
    offsets: dict
    size: int
    active: np.ndarray

    @classmethod
    def for_domain(cls, d: DiscretizedDomain) -> "Layout":
        shapes = component_shapes(d.nr, d.nz)
        masks = active_masks(d)
        offsets, n = {}, 0
        for c in COMPONENTS:
            offsets[c] = n
            n += int(np.prod(shapes[c]))
        act = np.flatnonzero(np.concatenate([masks[c].ravel() for c in COMPONENTS]))
        return cls(shapes, offsets, n, act)

    def scatter(self, x):
        """Unknown vector -> dict of full component arrays (zeros on walls)."""
        full = np.zeros(self.size, dtype=complex)
        full[self.active] = x
        return self.split(full)

    def split(self, full):
        out = {}
        for c in COMPONENTS:
            o = self.offsets[c]
            n = int(np.prod(self.shapes[c]))
            out[c] = full[o:o + n].reshape(self.shapes[c])
        return out


def curl_matrices(d: DiscretizedDomain, omega_ref: float):
    """Discrete curls (C_E: E -> curl E at H sites, C_H: H -> curl H at E sites).

    Both act on full stacked component vectors ordered (r, phi, z). The
    phi-derivative becomes i*m, and radii/derivatives are complex-stretched in
    the absorbing layers.
    """
    nr, nz, h, m = d.nr, d.nz, d.h, d.m
    s = d.stretch(omega_ref)
    sr_n, sr_h, rt_n, rt_h = s["sr_n"], s["sr_h"], s["rt_n"], s["rt_h"]
    sz_n, sz_h = s["sz_n"], s["sz_h"]

    def diff(n):
        return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr") / h

    drn, dzn = diff(nr), diff(nz)
    drh, dzh = (-drn.T).tocsr(), (-dzn.T).tocsr()

    def eye(n):
        return sp.identity(n, format="csr")

    dg = sp.diags
    inv_rt_n = np.zeros(nr + 1, complex)
    inv_rt_n[1:] = 1.0 / rt_n[1:]
    im = 1j * m

    hr_ez = im * sp.kron(dg(inv_rt_n), eye(nz))
    hr_ep = -sp.kron(eye(nr + 1), dg(1 / sz_h) @ dzn)
    hp_er = sp.kron(eye(nr), dg(1 / sz_h) @ dzn)
    hp_ez = -sp.kron(dg(1 / sr_h) @ drn, eye(nz))
    hz_ep = sp.kron(dg(1 / (rt_h * sr_h)) @ drn @ dg(rt_n), eye(nz + 1))
    hz_er = -im * sp.kron(dg(1 / rt_h), eye(nz + 1))
    c_e = sp.bmat(
        [[None, hr_ep, hr_ez], [hp_er, None, hp_ez], [hz_er, hz_ep, None]], format="csr"
    )

    er_hz = im * sp.kron(dg(1 / rt_h), eye(nz + 1))
    er_hp = -sp.kron(eye(nr), dg(1 / sz_n) @ dzh)
    ep_hr = sp.kron(eye(nr + 1), dg(1 / sz_n) @ dzh)
    ep_hz = -sp.kron(dg(1 / sr_n) @ drh, eye(nz + 1))
    radial = (dg(inv_rt_n / sr_n) @ drh @ dg(rt_h)).tolil()
    # On-axis E_z: circulation of H_phi around a disc of radius h/2.
    radial[0, :] = 0.0
    radial[0, 0] = 4.0 / h
    ez_hp = sp.kron(radial.tocsr(), eye(nz))
    ez_hr = -im * sp.kron(dg(inv_rt_n), eye(nz))
    c_h = sp.bmat(
        [[None, er_hp, er_hz], [ep_hr, None, ep_hz], [ez_hr, ez_hp, None]], format="csr"
    )
    return c_e, c_h


def curl_curl(d: DiscretizedDomain, layout: Layout, omega_ref: float):
    """curl curl restricted to the active unknowns (CSC)."""
    c_e, c_h = curl_matrices(d, omega_ref)
    a = (c_h @ c_e).tocsr()
    idx = layout.active
    return a[idx][:, idx].tocsc()


def cell_permittivity(d: DiscretizedDomain, omega):
    """Complex permittivity per cell at (possibly complex) frequency ``omega``."""
    values = np.array([complex(mat.permittivity(omega)) for mat in d.materials])
    return values[d.cell_labels]


def cell_energy_weight(d: DiscretizedDomain, omega):
    values = np.array([float(mat.energy_coefficient(omega)) for mat in d.materials])
    return values[d.cell_labels]


def edge_permittivity(d: DiscretizedDomain, layout: Layout, omega):
    """Permittivity at each active E unknown (arithmetic mean of adjacent cells)."""
    return average_to_edges(cell_permittivity(d, omega), layout)


def average_to_edges(cell_values, layout: Layout):
    ec = np.asarray(cell_values)
    p = np.pad(ec, 1, mode="edge")
    er = 0.5 * (p[1:-1, :-1] + p[1:-1, 1:])
    ep = 0.25 * (p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:])
    ez = 0.5 * (p[:-1, 1:-1] + p[1:, 1:-1])
    ez[0] = ec[0]
    full = np.concatenate([er.ravel(), ep.ravel(), ez.ravel()])
    return full[layout.active]


def to_cell_centres(fields):
    """Average staggered E components onto cell centres, shape (nr, nz) each."""
    er, ep, ez = fields["Er"], fields["Ephi"], fields["Ez"]
    return {
        "Er": 0.5 * (er[:, :-1] + er[:, 1:]),
        "Ephi": 0.25 * (ep[:-1, :-1] + ep[1:, :-1] + ep[:-1, 1:] + ep[1:, 1:]),
        "Ez": 0.5 * (ez[:-1] + ez[1:]),
    }
