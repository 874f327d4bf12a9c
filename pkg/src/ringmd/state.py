"""System representation: topology, reduced units, and ring-polymer phase space.

Positions and momenta are stored in bead (Cartesian) layout as (N, P) arrays,
where N is the number of Cartesian degrees of freedom (3 per site) and P the
bead count.  Degree of freedom 3*i + c is component c of site i, so site
vectors are recovered with ``positions.reshape(n_sites, 3, P)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import PlacementError, ValidationError

WATER_SITES = 3

# SPC/E defaults: oxygen first, then the two hydrogens.
DEFAULT_MASSES = (15.999, 1.008, 1.008)
DEFAULT_CHARGES = (-0.8476, 0.4238, 0.4238)

TRUNCATION_MODES = ("none", "nearest_image", "cutoff")


@dataclass
class ReducedUnits:
    """Reduced unit system with hbar fixed at 1.

    beta is the inverse thermal energy; the bead spring frequency scale
    alpha = P / (beta * hbar) is always derived on demand so it can never
    go stale when P or beta changes.
    """

    beta: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")
        if self.hbar != 1.0:
            raise ValidationError("hbar is fixed at 1.0 in reduced units")

    def beta_p(self, n_beads):
        """Per-bead inverse temperature beta/P."""
        return self.beta / n_beads

    def alpha(self, n_beads):
        """Spring frequency scale P/(beta*hbar)."""
        return n_beads / (self.beta * self.hbar)


@dataclass
class Topology:
    """Static system description: sites, masses, charges, constraints, cell.

    constraint_pairs lists (site_a, site_b, target_length) with site indices
    local to one molecule; the same list applies to every molecule and is
    replicated across beads by the solvers.
    """

    n_molecules: int
    sites_per_molecule: int
    site_masses: np.ndarray       # (n_sites,) for the whole system
    site_charges: np.ndarray      # (n_sites,)
    constraint_pairs: list        # [(a, b, length), ...] local indices
    cell_edge: float
    truncation_mode: str = "none"

    def __post_init__(self):
        self.site_masses = np.asarray(self.site_masses, dtype=float)
        self.site_charges = np.asarray(self.site_charges, dtype=float)
        if self.n_molecules < 1:
            raise ValidationError(f"n_molecules must be >= 1, got {self.n_molecules}")
        if self.cell_edge <= 0:
            raise ValidationError(f"cell_edge must be positive, got {self.cell_edge}")
        if self.truncation_mode not in TRUNCATION_MODES:
            raise ValidationError(f"truncation_mode must be one of {TRUNCATION_MODES}, "
                                  f"got {self.truncation_mode!r}")
        n_sites = self.n_molecules * self.sites_per_molecule
        if self.site_masses.shape != (n_sites,):
            raise ValidationError(f"site_masses must have shape ({n_sites},)")
        if self.site_charges.shape != (n_sites,):
            raise ValidationError(f"site_charges must have shape ({n_sites},)")
        if np.any(self.site_masses <= 0):
            raise ValidationError("site_masses must all be positive")
        for a, b, length in self.constraint_pairs:
            if length <= 0:
                raise ValidationError(f"constraint target_length must be positive, got {length}")
            if a == b:
                raise ValidationError(f"constraint sites must be distinct, got ({a}, {b})")
            if not (0 <= a < self.sites_per_molecule and 0 <= b < self.sites_per_molecule):
                raise ValidationError(f"constraint site index out of range: ({a}, {b})")
        if self.sites_per_molecule == WATER_SITES and self.constraint_pairs:
            if len(self.constraint_pairs) != 3:
                raise ValidationError("rigid water needs exactly 3 constraint pairs")

    @property
    def n_sites(self):
        return self.n_molecules * self.sites_per_molecule

    @property
    def n_dof(self):
        return 3 * self.n_sites

    def molecule_sites(self, mol):
        """Global site indices of one molecule."""
        start = mol * self.sites_per_molecule
        return range(start, start + self.sites_per_molecule)


@dataclass
class RingPolymerState:
    """Phase-space snapshot of all beads.

    positions, momenta: (N, P) arrays, x[j, k] = degree of freedom j of
    replica k.
    """

    positions: np.ndarray
    momenta: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.momenta = np.asarray(self.momenta, dtype=float)
        if self.positions.ndim != 2:
            raise ValidationError(f"positions must be (N, P), got {self.positions.shape}")
        if self.momenta.shape != self.positions.shape:
            raise ValidationError(f"momenta shape {self.momenta.shape} must match "
                                  f"positions shape {self.positions.shape}")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.momenta))):
            raise ValidationError("state entries must be finite")

    @property
    def n_dof(self):
        return self.positions.shape[0]

    @property
    def n_beads(self):
        return self.positions.shape[1]

    def site_positions(self):
        """View as (n_sites, 3, P)."""
        return self.positions.reshape(-1, 3, self.n_beads)

    def site_momenta(self):
        return self.momenta.reshape(-1, 3, self.n_beads)

    def copy(self):
        return RingPolymerState(self.positions.copy(), self.momenta.copy(), self.time)


def dof_masses(topology):
    """Per-degree-of-freedom masses, shape (N,): each site mass repeated 3x."""
    return np.repeat(topology.site_masses, 3)


def minimum_image(displacement, cell_edge):
    """Wrap displacement components into the half-open box [-L/2, L/2).

    Convention: d -> d - L * floor(d/L + 1/2), which maps exactly -L/2 to
    -L/2 and exactly +L/2 to -L/2.
    """
    if cell_edge <= 0:
        raise ValidationError(f"cell_edge must be positive, got {cell_edge}")
    d = np.asarray(displacement, dtype=float)
    return d - cell_edge * np.floor(d / cell_edge + 0.5)


def build_water_topology(n_molecules, cell_edge, geometry=None, masses=DEFAULT_MASSES,
                         charges=DEFAULT_CHARGES, truncation_mode="none"):
    """Rigid 3-site water topology with the O-H / O-H / H-H constraint ring.

    geometry: dict with r_OH (bond length) and angle_HOH (degrees).  The H-H
    target length follows from the rigid triangle, 2 * r_OH * sin(angle/2).
    """
    if geometry is None:
        geometry = {"r_OH": 1.0, "angle_HOH": 109.47}
    r_oh = float(geometry["r_OH"])
    angle = float(geometry["angle_HOH"])
    if r_oh <= 0:
        raise ValidationError(f"r_OH must be positive, got {r_oh}")
    if not (0 < angle < 180):
        raise ValidationError(f"angle_HOH must be in (0, 180) degrees, got {angle}")

    l_hh = float(2.0 * r_oh * np.sin(np.deg2rad(angle) / 2.0))
    # Ring order matches the site order O(0), H(1), H(2): O-H, H-H, H-O.
    pairs = [(0, 1, r_oh), (1, 2, l_hh), (2, 0, r_oh)]
    site_masses = np.tile(np.asarray(masses, dtype=float), n_molecules)
    site_charges = np.tile(np.asarray(charges, dtype=float), n_molecules)
    return Topology(n_molecules=n_molecules, sites_per_molecule=WATER_SITES,
                    site_masses=site_masses, site_charges=site_charges,
                    constraint_pairs=pairs, cell_edge=cell_edge,
                    truncation_mode=truncation_mode)


def rigid_water_sites(r_oh, angle_deg):
    """Site coordinates of one rigid water with O at the origin.

    The HOH bisector points along +z; hydrogens sit in the x-z plane.
    Returns (3, 3) array ordered O, H, H.
    """
    half = np.deg2rad(angle_deg) / 2.0
    return np.array([
        [0.0, 0.0, 0.0],
        [r_oh * np.sin(half), 0.0, r_oh * np.cos(half)],
        [-r_oh * np.sin(half), 0.0, r_oh * np.cos(half)],
    ])


def _random_rotation(rng):
    """Uniform random rotation matrix (QR of a Gaussian matrix, det +1)."""
    m = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(m)
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def sample_thermal_momenta(topology, n_beads, units, temperature, rng):
    """Raw Gaussian momenta, variance temperature * m_j / beta_P per component.

    temperature is a dimensionless multiplier on the per-bead thermal
    variance; 1.0 is the beta_P ensemble and 0.0 gives exactly zero momenta.
    """
    masses = dof_masses(topology)
    sigma = np.sqrt(temperature * masses / units.beta_p(n_beads))
    return sigma[:, None] * rng.standard_normal((topology.n_dof, n_beads))


def project_momenta(momenta, positions, topology):
    """Project momenta onto the constraint tangent space, zero total momentum.

    Applies the exact per-bead velocity projection (so the hidden constraints
    f = 0 hold) and then removes the global center-of-mass velocity, which
    leaves relative velocities, and hence f, unchanged.  Idempotent.
    """
    from .constraints import classic_rattle_project

    out = momenta.copy()
    if topology.constraint_pairs:
        out = classic_rattle_project(out, positions, topology, dof_masses(topology))
    masses = dof_masses(topology)
    # One shared CM velocity per component across all beads and sites.
    comp = out.reshape(-1, 3, out.shape[1])
    mass3 = masses.reshape(-1, 3, 1)
    v_cm = comp.sum(axis=(0, 2)) / (topology.site_masses.sum() * out.shape[1])
    comp = comp - mass3 * v_cm[None, :, None]
    return comp.reshape(out.shape)


def initialize_state(topology, n_beads, units, temperature=1.0, seed=0):
    """Place molecules on a cubic sub-lattice and sample projected momenta.

    All beads of a site start at the same Cartesian point (zero spring
    energy) with the molecule's rigid geometry, so every constraint holds
    exactly.  Momenta are Gaussian, then projected so f = 0 and the total
    linear momentum vanishes.  Deterministic for a fixed seed.
    """
    if n_beads < 1:
        raise ValidationError(f"n_beads must be >= 1, got {n_beads}")
    if temperature < 0:
        raise ValidationError(f"temperature must be >= 0, got {temperature}")

    rng = np.random.default_rng(seed)
    n_mol = topology.n_molecules
    n_side = int(np.ceil(n_mol ** (1.0 / 3.0)))
    spacing = topology.cell_edge / n_side

    # Rigid geometry from the constraint targets (r_OH from pair 0).
    if topology.sites_per_molecule == WATER_SITES and topology.constraint_pairs:
        r_oh = topology.constraint_pairs[0][2]
        l_hh = topology.constraint_pairs[1][2]
        angle = 2.0 * np.rad2deg(np.arcsin(l_hh / (2.0 * r_oh)))
        base = rigid_water_sites(r_oh, angle)
    else:
        base = np.zeros((topology.sites_per_molecule, 3))

    centers = []
    for mol in range(n_mol):
        i, j, k = mol % n_side, (mol // n_side) % n_side, mol // (n_side * n_side)
        centers.append((np.array([i, j, k]) + 0.5) * spacing)
    centers = np.asarray(centers)

    oxy = centers  # O sits at the lattice point
    d = oxy[:, None, :] - oxy[None, :, :]
    if n_mol > 1:
        dist = np.sqrt((d ** 2).sum(axis=-1))
        np.fill_diagonal(dist, np.inf)
        if dist.min() < 1.5:
            raise PlacementError(f"minimum O-O distance {dist.min():.3f} below 1.5; "
                                 f"cell_edge {topology.cell_edge} too small for {n_mol} molecules")

    sites = np.empty((topology.n_sites, 3))
    for mol in range(n_mol):
        rot = _random_rotation(rng)
        block = base @ rot.T + centers[mol]
        sites[mol * topology.sites_per_molecule:(mol + 1) * topology.sites_per_molecule] = block

    positions = np.repeat(sites.reshape(-1, 1), n_beads, axis=1)
    momenta = sample_thermal_momenta(topology, n_beads, units, temperature, rng)
    momenta = project_momenta(momenta, positions, topology)
    return RingPolymerState(positions=positions, momenta=momenta, time=0.0)
