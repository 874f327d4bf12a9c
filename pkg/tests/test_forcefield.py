"""Tests for the SPC/E pair interactions and the switching split."""
import numpy as np
import pytest

from ringmd.errors import ForceFieldError, ValidationError
from ringmd.forcefield import (ForceFieldSpec, pair_energy_force, switch,
                               switch_with_derivative, total_fast_force,
                               total_forces, total_full_force, total_slow_force)
from ringmd.state import ReducedUnits, build_water_topology, initialize_state

UNITS = ReducedUnits()


def two_molecule_positions(n_beads=1, seed=0, spread=0.0):
    topo = build_water_topology(2, 8.0)
    state = initialize_state(topo, n_beads, UNITS, temperature=0.0, seed=seed)
    pos = state.positions.copy()
    if spread:
        rng = np.random.default_rng(seed + 1)
        pos = pos + spread * rng.standard_normal(pos.shape)
    return topo, pos


class TestSwitch:
    def test_short_range_is_one(self):
        assert switch(8.0 - 4.5 - 0.1, 8.0, 4.5) == 1.0

    def test_zero_at_cutoff_and_beyond(self):
        assert switch(8.0, 8.0, 4.5) == 0.0
        assert switch(9.0, 8.0, 4.5) == 0.0

    def test_midpoint_value(self):
        """R = 1/2 gives 1 + 0.25*(1 - 3) = 0.5."""
        r_cut, delta = 8.0, 4.5
        mid = r_cut - delta + 0.5 * delta
        assert switch(mid, r_cut, delta) == pytest.approx(0.5, abs=1e-14)

    def test_c1_continuity_at_joins(self):
        """S and S' match at both healing-interval ends."""
        r_cut, delta = 8.0, 4.5
        for edge in (r_cut - delta, r_cut):
            for eps in (1e-7, 1e-9):
                s_in, ds_in = switch_with_derivative(edge - eps, r_cut, delta)
                s_out, ds_out = switch_with_derivative(edge + eps, r_cut, delta)
                assert abs(s_in - s_out) < 1e-9
                assert abs(ds_in - ds_out) < 1e-6

    def test_derivative_matches_finite_difference(self):
        r = np.linspace(3.6, 7.9, 41)
        s, ds = switch_with_derivative(r, 8.0, 4.5)
        eps = 1e-7
        fd = (switch(r + eps, 8.0, 4.5) - switch(r - eps, 8.0, 4.5)) / (2 * eps)
        assert np.abs(ds - fd).max() < 1e-6


class TestSpecValidation:
    def test_rejects_bad_healing_length(self):
        with pytest.raises(ValidationError):
            ForceFieldSpec(delta_r=0.0)
        with pytest.raises(ValidationError):
            ForceFieldSpec(delta_r=9.0, r_cut=8.0)

    def test_rejects_bad_lj(self):
        with pytest.raises(ValidationError):
            ForceFieldSpec(a_lj=-1.0)


class TestPairEnergyForce:
    def setup_method(self):
        self.spec = ForceFieldSpec(r_cut=8.0, delta_r=4.5)

    def test_partition_of_unity(self):
        """fast + slow energies equal the full energy at any r."""
        rng = np.random.default_rng(2)
        for _ in range(20):
            r_vec = rng.uniform(-6, 6, 3)
            for kind, qq in (("coulomb", -0.35924488), ("lennard_jones", None)):
                e_full, f_full = pair_energy_force(r_vec, kind, self.spec, "full", qq)
                e_fast, f_fast = pair_energy_force(r_vec, kind, self.spec, "fast", qq)
                e_slow, f_slow = pair_energy_force(r_vec, kind, self.spec, "slow", qq)
                assert e_fast + e_slow == pytest.approx(e_full, abs=1e-12 * max(1, abs(e_full)))
                assert np.abs(f_fast + f_slow - f_full).max() < 1e-10 * max(1, np.abs(f_full).max())

    def test_lj_minimum_location(self):
        """Full LJ force vanishes at r = (2A/B)^(1/6) ~ 3.554."""
        r_star = (2.0 * self.spec.a_lj / self.spec.b_lj) ** (1.0 / 6.0)
        assert r_star == pytest.approx(3.554, abs=2e-3)
        _, force = pair_energy_force(np.array([r_star, 0, 0]), "lennard_jones",
                                     self.spec, "full")
        assert np.abs(force).max() < 1e-9

    def test_coulomb_oh_charge_product(self):
        """O-H Coulomb energy at r = 1 equals Q_O * Q_H."""
        qq = -0.8476 * 0.4238
        e, _ = pair_energy_force(np.array([1.0, 0, 0]), "coulomb", self.spec,
                                 "full", charge_product=qq)
        assert e == pytest.approx(qq, abs=1e-14)

    def test_zero_separation_raises(self):
        with pytest.raises(ForceFieldError):
            pair_energy_force(np.zeros(3), "coulomb", self.spec, "full", 1.0)

    def test_coulomb_requires_charge_product(self):
        with pytest.raises(ValidationError):
            pair_energy_force(np.ones(3), "coulomb", self.spec)


class TestTotalForces:
    def test_single_molecule_no_force(self):
        topo = build_water_topology(1, 8.0)
        spec = ForceFieldSpec.from_topology(topo)
        state = initialize_state(topo, 2, UNITS, temperature=0.0, seed=0)
        v, f = total_full_force(state.positions, topo, spec)
        assert v == 0.0
        assert np.abs(f).max() == 0.0

    def test_beyond_cutoff_zero(self):
        """Two molecules beyond r_cut in cutoff mode: zero force and energy."""
        topo = build_water_topology(2, 40.0, truncation_mode="cutoff")
        spec = ForceFieldSpec.from_topology(topo, r_cut=6.0, delta_r=2.0)
        state = initialize_state(topo, 2, UNITS, temperature=0.0, seed=0)
        pos3 = state.positions.reshape(-1, 3, 2)
        pos3[3:] = pos3[:3] + np.array([10.0, 0.0, 0.0])[None, :, None]
        for part in ("full", "fast", "slow"):
            v, f = total_forces(state.positions, topo, spec, part)
            assert v == 0.0
            assert np.abs(f).max() == 0.0

    @pytest.mark.parametrize("part", ["full", "fast", "slow"])
    def test_gradient_matches_finite_difference(self, part):
        """Forces equal the negative central-difference energy gradient."""
        topo, pos = two_molecule_positions(n_beads=2, spread=0.05)
        spec = ForceFieldSpec.from_topology(topo, r_cut=5.0, delta_r=2.0)
        v, f = total_forces(pos, topo, spec, part)
        scale = np.abs(f).max()
        eps = 1e-6
        rng = np.random.default_rng(5)
        for _ in range(8):
            i = rng.integers(pos.shape[0])
            k = rng.integers(pos.shape[1])
            xp = pos.copy(); xp[i, k] += eps
            xm = pos.copy(); xm[i, k] -= eps
            fd = -(total_forces(xp, topo, spec, part)[0]
                   - total_forces(xm, topo, spec, part)[0]) / (2 * eps)
            assert abs(fd - f[i, k]) <= 1e-6 * max(scale, 1.0)

    def test_newtons_third_law(self):
        """Intermolecular forces sum to zero per bead with no truncation."""
        topo, pos = two_molecule_positions(n_beads=3, spread=0.1)
        spec = ForceFieldSpec.from_topology(topo)
        _, f = total_full_force(pos, topo, spec)
        per_bead = f.reshape(-1, 3, 3).sum(axis=0)
        assert np.abs(per_bead).max() < 1e-10

    def test_translation_invariance(self):
        topo, pos = two_molecule_positions(n_beads=2, spread=0.05)
        spec = ForceFieldSpec.from_topology(topo)
        v0, _ = total_full_force(pos, topo, spec)
        shifted = pos + np.tile([1.3, -0.7, 2.9], topo.n_sites)[:, None]
        v1, _ = total_full_force(shifted, topo, spec)
        assert abs(v1 - v0) < 1e-12 * max(1.0, abs(v0))

    def test_per_replica_coupling(self):
        """Bead k of one molecule interacts only with bead k of another."""
        topo, pos = two_molecule_positions(n_beads=2)
        spec = ForceFieldSpec.from_topology(topo)
        _, f0 = total_full_force(pos, topo, spec)
        moved = pos.copy()
        moved3 = moved.reshape(-1, 3, 2)
        moved3[3:, :, 1] += 0.5        # move molecule 2, bead 1 only
        _, f1 = total_full_force(moved, topo, spec)
        # bead 0 forces identical, bead 1 forces different
        assert np.array_equal(f0.reshape(-1, 3, 2)[:, :, 0], f1.reshape(-1, 3, 2)[:, :, 0])
        assert np.abs(f0.reshape(-1, 3, 2)[:, :, 1] - f1.reshape(-1, 3, 2)[:, :, 1]).max() > 1e-6

    def test_overlap_raises_named_pair(self):
        topo, pos = two_molecule_positions(n_beads=1)
        pos3 = pos.reshape(-1, 3, 1)
        pos3[3] = pos3[0]              # drop molecule 2's oxygen onto molecule 1's
        spec = ForceFieldSpec.from_topology(topo)
        with pytest.raises(ForceFieldError, match="sites 0 and 3"):
            total_full_force(pos, topo, spec)

    def test_smooth_boundary_sweep(self):
        """Energy parts are continuous across both switch boundaries
        (truncation none)."""
        topo = build_water_topology(2, 50.0)
        spec = ForceFieldSpec.from_topology(topo, r_cut=6.0, delta_r=2.5)
        state = initialize_state(topo, 1, UNITS, temperature=0.0, seed=0)
        base = state.positions.copy()
        base3 = base.reshape(-1, 3, 1)
        base3[3:] -= base3[3]          # put mol-2 oxygen at origin offset
        for boundary in (6.0, 6.0 - 2.5):
            energies = {}
            for part in ("full", "fast", "slow"):
                vals = []
                for eps in (-1e-7, 1e-7):
                    pos = base.copy()
                    pos3 = pos.reshape(-1, 3, 1)
                    pos3[3:] += np.array([boundary + eps + 20.0, 0, 0])[None, :, None]
                    pos3[3:] -= np.array([20.0, 0, 0])[None, :, None]
                    vals.append(total_forces(pos, topo, spec, part)[0])
                energies[part] = vals
                assert abs(vals[1] - vals[0]) < 1e-9, (part, boundary)

    def test_nonsmooth_split_partition(self):
        """Indicator split keeps fast+slow = full but jumps at r_h."""
        topo = build_water_topology(2, 50.0)
        spec = ForceFieldSpec.from_topology(topo, r_cut=8.0, delta_r=4.5,
                                            nonsmooth_split_radius=4.0)
        state = initialize_state(topo, 1, UNITS, temperature=0.0, seed=0)
        pos = state.positions
        vf, ff = total_fast_force(pos, topo, spec)
        vs, fs = total_slow_force(pos, topo, spec)
        vfull, ffull = total_full_force(pos, topo, spec)
        assert vf + vs == pytest.approx(vfull, rel=1e-12)
        assert np.abs(ff + fs - ffull).max() < 1e-10


def test_nearest_image_uses_wrapped_distances():
    """In nearest_image mode a molecule interacts with the closest copy."""
    topo = build_water_topology(2, 6.0, truncation_mode="nearest_image")
    spec = ForceFieldSpec.from_topology(topo)
    state = initialize_state(topo, 1, UNITS, temperature=0.0, seed=0)
    pos = state.positions.copy()
    pos3 = pos.reshape(-1, 3, 1)
    # direct distance 5.0 along x wraps to 1.0 in a box of edge 6
    pos3[3:] = pos3[:3] + np.array([5.0, 0.0, 0.0])[None, :, None]
    v_wrapped, _ = total_full_force(pos, topo, spec)

    direct_topo = build_water_topology(2, 60.0)
    direct_spec = ForceFieldSpec.from_topology(direct_topo)
    pos2 = pos.copy()
    pos23 = pos2.reshape(-1, 3, 1)
    pos23[3:] = pos23[:3] + np.array([-1.0, 0.0, 0.0])[None, :, None]
    v_direct, _ = total_full_force(pos2, direct_topo, direct_spec)
    assert v_wrapped == pytest.approx(v_direct, rel=1e-12)
