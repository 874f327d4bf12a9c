"""Tests for the constraint residuals and the two solver families."""
import numpy as np
import pytest

from ringmd.constraints import (classic_rattle_project, classic_shake, residual_f,
                                residual_g, solve_position_multipliers,
                                solve_velocity_multipliers)
from ringmd.errors import ConstraintError
from ringmd.normal_modes import build_basis, build_propagator
from ringmd.state import (ReducedUnits, RingPolymerState, Topology, build_water_topology,
                          dof_masses, initialize_state)

UNITS = ReducedUnits()


def water_system(n_mol=1, n_beads=1, seed=0, temperature=0.0):
    topo = build_water_topology(n_mol, 10.0 + 3.0 * n_mol)
    state = initialize_state(topo, n_beads, UNITS, temperature=temperature, seed=seed)
    return topo, state


def cache_for(n_beads, h):
    return build_propagator(build_basis(n_beads, UNITS.alpha(n_beads)), h)


def two_body_topology(m1=2.0, m2=3.0, length=1.5):
    return Topology(n_molecules=1, sites_per_molecule=2,
                    site_masses=np.array([m1, m2]), site_charges=np.zeros(2),
                    constraint_pairs=[(0, 1, length)], cell_edge=20.0)


class TestResiduals:
    def test_rigid_state_zero(self):
        topo, state = water_system(n_mol=2, n_beads=4)
        assert np.abs(residual_g(state, topo)).max() < 1e-12

    def test_stretched_bond_value(self):
        """Bond stretched to 1.1 with target 1.0: residual 1.1^2 - 1 = 0.21."""
        topo, state = water_system()
        pos3 = state.positions.reshape(3, 3, 1)
        d = pos3[1] - pos3[0]
        pos3[1] = pos3[0] + 1.1 * d / np.linalg.norm(d)
        res = residual_g(state, topo)
        assert res[0, 0, 0] == pytest.approx(0.21, abs=1e-12)

    def test_perturbed_bead_locality(self):
        """Only the perturbed bead's residuals move (P = 3)."""
        topo, state = water_system(n_beads=3)
        state.positions[3, 1] += 0.05      # H site x-component, bead 1
        res = residual_g(state, topo)
        assert np.abs(res[:, :, [0, 2]]).max() < 1e-12
        assert np.abs(res[:, :, 1]).max() > 1e-3

    def test_velocity_residual_zero_momenta(self):
        topo, state = water_system(n_beads=2)
        assert np.abs(residual_f(state, topo)).max() == 0.0

    def test_velocity_residual_orthogonal(self):
        """Relative velocity orthogonal to the bond gives zero residual."""
        topo = two_body_topology(m1=1.0, m2=1.0)
        pos = np.zeros((6, 1))
        pos[3] = 1.5                        # bond along x
        mom = np.zeros((6, 1))
        mom[4] = 2.0                        # site 2 moves along y
        state = RingPolymerState(pos, mom)
        assert np.abs(residual_f(state, topo)).max() < 1e-14

    def test_velocity_residual_radial(self):
        """Radial relative speed v along a bond of length l gives -v*l."""
        topo = two_body_topology(m1=1.0, m2=1.0, length=1.5)
        pos = np.zeros((6, 1))
        pos[3] = 1.5
        mom = np.zeros((6, 1))
        mom[3] = 0.7                        # site 2 recedes along +x at v=0.7
        state = RingPolymerState(pos, mom)
        res = residual_f(state, topo)
        # d/dt |r_1 - r_2|^2 / 2 = (v_1 - v_2).(r_1 - r_2) = (-0.7)(-1.5)
        assert res[0, 0, 0] == pytest.approx(0.7 * 1.5, abs=1e-14)


class TestPositionSolver:
    def test_satisfied_trial_is_noop(self):
        topo, state = water_system(n_mol=2, n_beads=4)
        cache = cache_for(4, 0.05)
        sol = solve_position_multipliers(state.positions, state.positions, topo,
                                         dof_masses(topo), cache)
        assert sol.report.iterations == 0
        assert sol.report.converged
        assert np.array_equal(sol.lambdas, np.zeros_like(sol.lambdas))
        assert np.allclose(sol.positions, state.positions, atol=1e-15)
        assert np.array_equal(sol.momentum_kick, np.zeros_like(sol.momentum_kick))

    def test_matches_classic_shake_at_one_bead(self):
        """P = 1 normal-mode solve equals classic SHAKE on 100 random inputs."""
        topo, base = water_system()
        masses = dof_masses(topo)
        cache = cache_for(1, 0.02)
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(100):
            ref = base.positions
            trial = ref + 0.03 * rng.standard_normal(ref.shape)
            sol = solve_position_multipliers(trial, ref, topo, masses, cache,
                                             tol_g=1e-13, max_iter=200)
            oracle = classic_shake(trial, ref, topo, masses, 0.02,
                                   tol_g=1e-13, max_iter=2000)
            worst = max(worst, float(np.abs(sol.positions - oracle).max()))
        assert worst < 1e-10

    def test_converges_quickly_for_small_perturbation(self):
        """P = 8 with <=1e-3 perturbations: <= 5 iterations to 1e-10."""
        topo, state = water_system(n_beads=8)
        masses = dof_masses(topo)
        cache = cache_for(8, 0.05)
        rng = np.random.default_rng(7)
        trial = state.positions + 1e-3 * rng.standard_normal(state.positions.shape)
        sol = solve_position_multipliers(trial, state.positions, topo, masses, cache,
                                         tol_g=1e-10, max_iter=10)
        assert sol.report.converged
        assert sol.report.iterations <= 5
        assert sol.report.max_residual <= 1e-10

    def test_mirror_symmetry(self):
        """Reflecting the x axis reflects the solution (parity invariance)."""
        topo, state = water_system(n_beads=4, seed=5)
        masses = dof_masses(topo)
        cache = cache_for(4, 0.05)
        rng = np.random.default_rng(11)
        trial = state.positions + 0.01 * rng.standard_normal(state.positions.shape)

        def mirror(arr):
            out = arr.copy().reshape(-1, 3, arr.shape[1])
            out[:, 0] = -out[:, 0]
            return out.reshape(arr.shape)

        sol = solve_position_multipliers(trial, state.positions, topo, masses, cache)
        sol_m = solve_position_multipliers(mirror(trial), mirror(state.positions),
                                           topo, masses, cache)
        assert np.abs(sol_m.positions - mirror(sol.positions)).max() < 1e-10

    def test_linearization_order(self):
        """Residual after one Newton update scales as eps^2 (order >= 1.9)."""
        topo, state = water_system(n_beads=4, seed=2)
        masses = dof_masses(topo)
        cache = cache_for(4, 0.05)
        rng = np.random.default_rng(3)
        direction = rng.standard_normal(state.positions.shape)
        direction /= np.abs(direction).max()
        epsilons = np.array([1e-2, 1e-3, 1e-4, 1e-5])
        after = []
        for eps in epsilons:
            trial = state.positions + eps * direction
            with pytest.raises(ConstraintError) as err:
                solve_position_multipliers(trial, state.positions, topo, masses,
                                           cache, tol_g=1e-30, max_iter=1)
            after.append(err.value.max_residual)
        slope = np.polyfit(np.log(epsilons), np.log(after), 1)[0]
        assert slope >= 1.9

    def test_nonconvergence_reports_residual(self):
        """A violently distorted trial raises with the residual attached."""
        topo, state = water_system(n_beads=4)
        masses = dof_masses(topo)
        cache = cache_for(4, 0.05)
        rng = np.random.default_rng(1)
        trial = state.positions + 2.0 * rng.standard_normal(state.positions.shape)
        with pytest.raises(ConstraintError) as err:
            solve_position_multipliers(trial, state.positions, topo, masses, cache,
                                       max_iter=3)
        assert err.value.max_residual is not None
        assert err.value.max_residual > 0


class TestVelocitySolver:
    def test_satisfied_momenta_noop(self):
        """Rigid translation satisfies f exactly and is left untouched."""
        topo, state = water_system(n_mol=2, n_beads=4)
        masses = dof_masses(topo)
        velocity = np.tile(np.array([0.3, -0.2, 0.1]), topo.n_sites)
        mom_in = (velocity * masses)[:, None] * np.ones((1, 4))
        sig, mom = solve_velocity_multipliers(mom_in, state.positions, topo, masses, 0.05)
        assert np.abs(sig).max() < 1e-13
        assert np.abs(mom - mom_in).max() < 1e-13

    def test_idempotent(self):
        """Projecting already-projected momenta changes nothing measurable."""
        topo, state = water_system(n_mol=2, n_beads=4)
        masses = dof_masses(topo)
        rng = np.random.default_rng(19)
        raw = rng.standard_normal(state.momenta.shape)
        _, once = solve_velocity_multipliers(raw, state.positions, topo, masses, 0.05)
        sig, twice = solve_velocity_multipliers(once, state.positions, topo, masses, 0.05)
        assert np.abs(twice - once).max() < 1e-12

    def test_matches_classic_rattle_at_one_bead(self):
        topo, base = water_system()
        masses = dof_masses(topo)
        rng = np.random.default_rng(21)
        worst = 0.0
        for _ in range(100):
            mom = rng.standard_normal(base.positions.shape)
            _, got = solve_velocity_multipliers(mom, base.positions, topo, masses, 0.05)
            want = classic_rattle_project(mom, base.positions, topo, masses, tol_f=1e-14)
            worst = max(worst, float(np.abs(got - want).max()))
        assert worst < 1e-12

    def test_post_solve_residual(self):
        """Defining property: the corrected momenta satisfy f to 1e-10."""
        topo, state = water_system(n_mol=3, n_beads=8)
        masses = dof_masses(topo)
        rng = np.random.default_rng(13)
        mom = rng.standard_normal(state.momenta.shape) * masses[:, None]
        _, corrected = solve_velocity_multipliers(mom, state.positions, topo, masses, 0.05)
        fixed = RingPolymerState(state.positions, corrected)
        assert np.abs(residual_f(fixed, topo, masses)).max() < 1e-10


class TestCombinedSolve:
    def test_full_constraint_enforcement(self):
        """Position solve then velocity solve restores both residual families."""
        topo, state = water_system(n_mol=2, n_beads=8, temperature=0.0, seed=4)
        masses = dof_masses(topo)
        cache = cache_for(8, 0.05)
        rng = np.random.default_rng(17)
        trial = state.positions + 5e-3 * rng.standard_normal(state.positions.shape)
        sol = solve_position_multipliers(trial, state.positions, topo, masses, cache)
        mom = rng.standard_normal(state.momenta.shape)
        _, corrected = solve_velocity_multipliers(mom, sol.positions, topo, masses, 0.05)
        out = RingPolymerState(sol.positions, corrected)
        assert np.abs(residual_g(out, topo)).max() <= 1e-10
        assert np.abs(residual_f(out, topo, masses)).max() <= 1e-10


class TestClassicShake:
    def test_satisfied_unchanged(self):
        topo, state = water_system(n_mol=2, n_beads=4)
        masses = dof_masses(topo)
        out = classic_shake(state.positions, state.positions, topo, masses, 0.01)
        assert np.array_equal(out, state.positions)

    def test_two_body_closed_form(self):
        """Single constraint: the quadratic multiplier equation solved exactly."""
        topo = two_body_topology(m1=2.0, m2=3.0, length=1.5)
        masses = dof_masses(topo)
        h = 0.05
        rng = np.random.default_rng(23)
        ref = np.zeros((6, 1))
        ref[3] = 1.5
        trial = ref + 0.05 * rng.standard_normal((6, 1))
        got = classic_shake(trial, ref, topo, masses, h, tol_g=1e-14, max_iter=500)

        # closed form: |d_trial - h^2 mu_inv lam d_ref|^2 = l^2, smaller root
        d_trial = (trial[3:] - trial[:3]).ravel()
        d_ref = (ref[3:] - ref[:3]).ravel()
        mu_inv = 1.0 / 2.0 + 1.0 / 3.0
        u = -h * h * mu_inv
        a = u * u * d_ref @ d_ref
        b = 2.0 * u * (d_trial @ d_ref)
        c = d_trial @ d_trial - 1.5 ** 2
        roots = np.roots([a, b, c])
        lam = roots[np.argmin(np.abs(roots))].real
        want = trial.copy()
        want[:3] += (h * h * lam / 2.0) * d_ref[:, None]
        want[3:] -= (h * h * lam / 3.0) * d_ref[:, None]
        assert np.abs(got - want).max() < 1e-12

    def test_water_perturbation_converges(self):
        """Small perturbation of rigid water: residual <= tol in <= 50 sweeps."""
        topo, state = water_system(n_beads=4)
        masses = dof_masses(topo)
        rng = np.random.default_rng(31)
        trial = state.positions + 1e-3 * rng.standard_normal(state.positions.shape)
        out = classic_shake(trial, state.positions, topo, masses, 0.02,
                            tol_g=1e-10, max_iter=50)
        fixed = RingPolymerState(out, np.zeros_like(out))
        assert np.abs(residual_g(fixed, topo)).max() <= 1e-10


class TestClassicRattle:
    def test_satisfied_unchanged(self):
        topo, state = water_system(n_mol=2, n_beads=4, temperature=1.0, seed=8)
        masses = dof_masses(topo)
        out = classic_rattle_project(state.momenta, state.positions, topo, masses)
        assert np.array_equal(out, state.momenta)

    def test_two_body_closed_form(self):
        """One constraint projects in a single pass with the textbook factor."""
        topo = two_body_topology(m1=2.0, m2=3.0, length=1.5)
        masses = dof_masses(topo)
        pos = np.zeros((6, 1))
        pos[3] = 1.5
        rng = np.random.default_rng(29)
        mom = rng.standard_normal((6, 1))
        got = classic_rattle_project(mom, pos, topo, masses, tol_f=1e-15)

        r = (pos[:3] - pos[3:]).ravel()
        v = (mom[:3] / 2.0 - mom[3:] / 3.0).ravel()
        g = (v @ r) / ((1.0 / 2.0 + 1.0 / 3.0) * (r @ r))
        want = mom.copy()
        want[:3] -= g * r[:, None]
        want[3:] += g * r[:, None]
        assert np.abs(got - want).max() < 1e-12

    def test_post_projection_residual(self):
        topo, state = water_system(n_mol=2, n_beads=8)
        masses = dof_masses(topo)
        rng = np.random.default_rng(37)
        mom = rng.standard_normal(state.momenta.shape)
        out = classic_rattle_project(mom, state.positions, topo, masses)
        fixed = RingPolymerState(state.positions, out)
        assert np.abs(residual_f(fixed, topo, masses)).max() <= 1e-10
