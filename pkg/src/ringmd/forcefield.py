"""SPC/E pair interactions with smooth fast/slow switching.

Intermolecular energies only: every site pair carries a bare-prefactor
Coulomb term Q Q'/r, oxygen-oxygen pairs add the Lennard-Jones term
A/r^12 - B/r^6.  Intramolecular pairs are excluded (rigid molecules), and
bead k of one molecule interacts only with bead k of another (the potential
acts per replica).

The cubic switch S(r) is 1 up to r_cut - delta_r, heals to 0 at r_cut with
matching first derivatives, and splits each pair term into a short-range
fast part V*S and a long-range slow part V*(1-S).  Forces are exact
negative gradients of the selected part, product rule included.

Truncation modes:
  none          direct distances, no images, no cutoff
  nearest_image minimum-image displacements
  cutoff        minimum image plus a hard zero beyond r_cut; the fast part
                already vanishes smoothly there, the slow tail is dropped

An optional indicator split (nonsmooth_split_radius) replaces S by the step
function 1[r <= r_h]; the total is unchanged but the split is discontinuous,
which is exactly the instability demonstration it exists for.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ForceFieldError, ValidationError
from .state import minimum_image

DEFAULT_A_LJ = 2.633e6
DEFAULT_B_LJ = 2.617e3

_OVERLAP_R = 1e-6


@dataclass
class ForceFieldSpec:
    """SPC/E parameters, switching lengths, and truncation choice."""

    a_lj: float = DEFAULT_A_LJ
    b_lj: float = DEFAULT_B_LJ
    charges: np.ndarray = None          # (n_sites,), usually from the topology
    r_cut: float = 8.0
    delta_r: float = 4.5
    split_enabled: bool = True
    truncation_mode: str = "none"
    nonsmooth_split_radius: float = None

    def __post_init__(self):
        if self.a_lj <= 0 or self.b_lj <= 0:
            raise ValidationError("a_lj and b_lj must be positive")
        if not (0 < self.delta_r <= self.r_cut):
            raise ValidationError(f"need 0 < delta_r <= r_cut, got delta_r={self.delta_r}, "
                                  f"r_cut={self.r_cut}")
        if self.charges is not None:
            self.charges = np.asarray(self.charges, dtype=float)

    @classmethod
    def from_topology(cls, topology, **kwargs):
        kwargs.setdefault("truncation_mode", topology.truncation_mode)
        return cls(charges=topology.site_charges.copy(), **kwargs)


def switch(r, r_cut, delta_r):
    """Cubic switching function: 1 short range, 0 beyond r_cut, C^1 joins."""
    r = np.asarray(r, dtype=float)
    low = r_cut - delta_r
    R = (r - low) / delta_r
    s = np.where(r < low, 1.0, np.where(r > r_cut, 0.0, 1.0 + R * R * (2.0 * R - 3.0)))
    return s if s.ndim else float(s)


def switch_with_derivative(r, r_cut, delta_r):
    """(S, dS/dr); the derivative vanishes at both interval ends."""
    r = np.asarray(r, dtype=float)
    low = r_cut - delta_r
    R = (r - low) / delta_r
    inside = (r >= low) & (r <= r_cut)
    s = np.where(r < low, 1.0, np.where(r > r_cut, 0.0, 1.0 + R * R * (2.0 * R - 3.0)))
    ds = np.where(inside, (6.0 * R * R - 6.0 * R) / delta_r, 0.0)
    return s, ds


def _split_factors(r, spec, part):
    """(factor, dfactor/dr) multiplying the bare pair term for one part."""
    if part == "full":
        return np.ones_like(r), np.zeros_like(r)
    if spec.nonsmooth_split_radius is not None:
        ind = (r <= spec.nonsmooth_split_radius).astype(float)
        s, ds = ind, np.zeros_like(r)
    else:
        s, ds = switch_with_derivative(r, spec.r_cut, spec.delta_r)
    if part == "fast":
        return s, ds
    if part == "slow":
        return 1.0 - s, -ds
    raise ValidationError(f"part must be full|fast|slow, got {part!r}")


def pair_energy_force(r_vec, kind, spec, part="full", charge_product=None):
    """Energy and force (on the first site) for one site pair.

    kind is "coulomb" or "lennard_jones"; charge_product is required for
    Coulomb.  The force includes the switch derivative of the chosen part.
    """
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.sqrt((r_vec ** 2).sum()))
    if r == 0.0:
        raise ForceFieldError("pair separation is zero (singular)")
    if kind == "coulomb":
        if charge_product is None:
            raise ValidationError("charge_product required for coulomb")
        v = charge_product / r
        dv = -charge_product / r ** 2
    elif kind == "lennard_jones":
        v = spec.a_lj / r ** 12 - spec.b_lj / r ** 6
        dv = -12.0 * spec.a_lj / r ** 13 + 6.0 * spec.b_lj / r ** 7
    else:
        raise ValidationError(f"kind must be coulomb|lennard_jones, got {kind!r}")
    s, ds = _split_factors(np.asarray(r), spec, part)
    energy = v * float(s)
    # -d(v*s)/dr along r_hat
    dtotal = dv * float(s) + v * float(ds)
    force = -dtotal * r_vec / r
    return energy, force


def _pair_indices(topology):
    """Global site index arrays (i, j) for all intermolecular site pairs."""
    n_mol = topology.n_molecules
    spm = topology.sites_per_molecule
    if n_mol < 2:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    ma, mb = np.triu_indices(n_mol, 1)
    si = np.repeat(np.arange(spm), spm)
    sj = np.tile(np.arange(spm), spm)
    i = (ma[:, None] * spm + si[None, :]).ravel()
    j = (mb[:, None] * spm + sj[None, :]).ravel()
    return i, j


def _scatter_add(forces3, idx, contrib):
    """Deterministic scatter-add of (n_pairs, 3, P) into (n_sites, 3, P)."""
    n_sites, _, n_beads = forces3.shape
    n_pairs = idx.shape[0]
    flat_idx = (idx[:, None, None] * 3 + np.arange(3)[None, :, None]) * n_beads \
        + np.arange(n_beads)[None, None, :]
    acc = np.bincount(flat_idx.ravel(), weights=contrib.ravel(),
                      minlength=n_sites * 3 * n_beads)
    forces3 += acc.reshape(n_sites, 3, n_beads)


def total_forces(positions, topology, spec, part="full"):
    """Potential energy and forces of one part, per bead.

    positions: (N, P).  Returns (energy, forces (N, P)) where forces are the
    exact negative gradient of the selected energy.  Pair loops run in a
    fixed order so reductions are bit-reproducible.
    """
    n_beads = positions.shape[1]
    pos3 = positions.reshape(-1, 3, n_beads)
    n_sites = pos3.shape[0]
    i_idx, j_idx = _pair_indices(topology)
    forces3 = np.zeros_like(pos3)
    if i_idx.size == 0:
        return 0.0, forces3.reshape(positions.shape)

    disp = pos3[i_idx] - pos3[j_idx]                      # (n_pairs, 3, P)
    if spec.truncation_mode in ("nearest_image", "cutoff"):
        disp = minimum_image(disp, topology.cell_edge)
    r2 = (disp ** 2).sum(axis=1)
    if np.any(r2 < _OVERLAP_R ** 2):
        k = int(np.argmin(r2.min(axis=1)))
        raise ForceFieldError(f"overlapping sites {i_idx[k]} and {j_idx[k]} "
                              f"(r = {np.sqrt(r2[k].min()):.2e})")
    r = np.sqrt(r2)

    charges = spec.charges if spec.charges is not None else topology.site_charges
    qq = (charges[i_idx] * charges[j_idx])[:, None]
    v = qq / r
    dv = -qq / r2
    spm = topology.sites_per_molecule
    oo = (i_idx % spm == 0) & (j_idx % spm == 0)
    if np.any(oo):
        r_oo = r[oo]
        inv6 = 1.0 / r_oo ** 6
        v[oo] += (spec.a_lj * inv6 - spec.b_lj) * inv6
        dv[oo] += (-12.0 * spec.a_lj * inv6 + 6.0 * spec.b_lj) / r_oo * inv6

    s, ds = _split_factors(r, spec, part)
    energy_pair = v * s
    dtotal = dv * s + v * ds
    if spec.truncation_mode == "cutoff":
        live = r <= spec.r_cut
        energy_pair = np.where(live, energy_pair, 0.0)
        dtotal = np.where(live, dtotal, 0.0)

    coef = -dtotal / r                                    # F_i = coef * disp
    contrib = coef[:, None, :] * disp
    _scatter_add(forces3, i_idx, contrib)
    _scatter_add(forces3, j_idx, -contrib)
    return float(energy_pair.sum()), forces3.reshape(positions.shape)


def total_full_force(positions, topology, spec):
    return total_forces(positions, topology, spec, "full")


def total_fast_force(positions, topology, spec):
    return total_forces(positions, topology, spec, "fast")


def total_slow_force(positions, topology, spec):
    return total_forces(positions, topology, spec, "slow")
