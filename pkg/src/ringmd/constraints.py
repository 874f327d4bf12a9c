"""Holonomic bond constraints for all beads.

Two solver families live here:

* The normal-mode-adapted solvers used by the trigonometric integrators.
  The position solve treats all beads of a molecule as one ensemble coupled
  through Bhat(h): for M constraints it iterates Newton updates on a dense
  (M P) x (M P) linear system per molecule, with constraint gradients
  evaluated at the reference (start-of-step) configuration.  The velocity
  solve is a direct per-bead M x M solve, no iteration.

* Classic per-bead SHAKE (Gauss-Seidel over constraints, h^2 coupling) and
  RATTLE velocity projection, used by the baseline integrators and as
  independent oracles: at P = 1 the normal-mode solvers must reproduce them.

Sign conventions: a constraint c = (i, j, l) has g_c = |r_i - r_j|^2 - l^2,
gradient +2 r_ij on site i and -2 r_ij on site j.  Multiplier kicks enter
momenta as -(h/2) * grad_g^T * lambda, matching the integrator splitting.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError
from .state import dof_masses


@dataclass
class SolveReport:
    """Outcome of one constraint solve."""

    iterations: int
    max_residual: float
    converged: bool


@dataclass
class PositionSolve:
    """Position-constraint solve output for the whole system.

    lambdas has shape (n_molecules, M, P); momentum_kick is the matching
    -(h/2) grad_g^T lambda term, shape (N, P), to be added to the momenta
    that feed the free flight.
    """

    lambdas: np.ndarray
    positions: np.ndarray
    momentum_kick: np.ndarray
    report: SolveReport


def _pair_arrays(topology):
    """Local site indices (a, b) and squared targets for one molecule."""
    a = np.array([p[0] for p in topology.constraint_pairs], dtype=int)
    b = np.array([p[1] for p in topology.constraint_pairs], dtype=int)
    l2 = np.array([p[2] ** 2 for p in topology.constraint_pairs], dtype=float)
    return a, b, l2


def _coupling_matrix(pairs, site_masses_mol):
    """w[c, c'] = s_{i(c), c'}/m_i - s_{j(c), c'}/m_j for local constraints.

    s_{a, c'} is +1 when site a is the first member of pair c', -1 when the
    second, 0 otherwise.  The diagonal is the inverse reduced mass of the
    pair; off-diagonals carry the inverse mass of the shared site.
    """
    n = len(pairs)
    s = np.zeros((len(site_masses_mol), n))
    for c, (i, j, _l) in enumerate(pairs):
        s[i, c] = 1.0
        s[j, c] = -1.0
    inv_m = 1.0 / np.asarray(site_masses_mol)
    w = np.zeros((n, n))
    for c, (i, j, _l) in enumerate(pairs):
        w[c] = s[i] * inv_m[i] - s[j] * inv_m[j]
    return w, s


def _mol_view(flat, topology):
    """(N, P) -> (n_molecules, sites_per_molecule, 3, P) view."""
    n_mol = topology.n_molecules
    spm = topology.sites_per_molecule
    return flat.reshape(n_mol, spm, 3, -1)


def residual_g(state, topology):
    """g residuals |r_i - r_j|^2 - l^2, shape (n_molecules, M, P).

    Distances are taken directly; molecules are never wrapped internally.
    """
    a, b, l2 = _pair_arrays(topology)
    pos = _mol_view(state.positions, topology)
    d = pos[:, a] - pos[:, b]                     # (n_mol, M, 3, P)
    return (d ** 2).sum(axis=2) - l2[None, :, None]


def residual_f(state, topology, masses=None):
    """Hidden velocity residuals (v_i - v_j) . (r_i - r_j), same shape."""
    if masses is None:
        masses = dof_masses(topology)
    a, b, l2 = _pair_arrays(topology)
    pos = _mol_view(state.positions, topology)
    vel = _mol_view(state.momenta / np.asarray(masses)[:, None], topology)
    d = pos[:, a] - pos[:, b]
    dv = vel[:, a] - vel[:, b]
    return (d * dv).sum(axis=2)


def solve_position_multipliers(trial_positions, reference_positions, topology,
                               masses, cache, tol_g=1e-10, max_iter=100):
    """Solve for position multipliers so every bond constraint holds.

    trial_positions is the unconstrained step output; the correction to
    degree of freedom block a is -(h / m_a) Bhat (sum_c s_{a,c} lambda_c *
    r_c(reference)), linear in lambda, so each Newton update re-applies the
    full correction to the trial exactly.  The Newton matrix per molecule is
    the (M P) x (M P) block matrix with blocks
    -2 h w[c, c'] * (r_hat_c^T r_ref_c' outer over beads) .* Bhat.

    Returns a PositionSolve; raises ConstraintError on a singular system or
    when max_iter is exceeded (carrying the residual reached).
    """
    if not topology.constraint_pairs:
        kick = np.zeros_like(trial_positions)
        return PositionSolve(np.zeros((topology.n_molecules, 0, trial_positions.shape[1])),
                             trial_positions.copy(), kick,
                             SolveReport(iterations=0, max_residual=0.0, converged=True))

    h = cache.h
    Bhat = cache.Bhat
    pairs = topology.constraint_pairs
    a, b, l2 = _pair_arrays(topology)
    n_mol = topology.n_molecules
    spm = topology.sites_per_molecule
    n_con = len(pairs)
    n_beads = trial_positions.shape[1]

    site_m = topology.site_masses[:spm]
    w, s = _coupling_matrix(pairs, site_m)
    inv_m = 1.0 / site_m

    trial = _mol_view(trial_positions, topology)
    ref = _mol_view(reference_positions, topology)
    r_ref = ref[:, a] - ref[:, b]                  # (n_mol, M, 3, P)

    lam = np.zeros((n_mol, n_con, n_beads))

    def apply_correction(lam):
        # grad[m, site] = sum_c s_{site,c} lam_c r_ref_c
        grad = np.einsum('ac,mcsp->masp', s, lam[:, :, None, :] * r_ref)
        delta = -(h * inv_m)[None, :, None, None] * (grad @ Bhat)
        return trial + delta, grad

    def residuals(cur):
        d = cur[:, a] - cur[:, b]
        return d, (d ** 2).sum(axis=2) - l2[None, :, None]  # (n_mol, M, P)

    cur, grad = apply_correction(lam)
    d, res = residuals(cur)
    max_res = float(np.abs(res).max())
    for it in range(max_iter + 1):
        if max_res < tol_g:
            kick = (-h) * grad.reshape(trial_positions.shape)
            return PositionSolve(lam, cur.reshape(trial_positions.shape).copy(),
                                 kick, SolveReport(it, max_res, True))
        if it == max_iter:
            raise ConstraintError(
                f"position constraint solve did not converge in {max_iter} iterations "
                f"(max residual {max_res:.3e})", max_residual=max_res, iterations=it)

        # outer[m, c, c', k, l] = sum_s d[m,c,s,k] r_ref[m,c',s,l]
        outer = np.einsum('mcsk,mdsl->mcdkl', d, r_ref)
        jac = (-2.0 * h) * w[None, :, :, None, None] * outer * Bhat[None, None, None, :, :]
        jac = jac.transpose(0, 1, 3, 2, 4).reshape(n_mol, n_con * n_beads, n_con * n_beads)
        try:
            dlam = np.linalg.solve(jac, -res.reshape(n_mol, n_con * n_beads, 1))
        except np.linalg.LinAlgError as exc:
            raise ConstraintError(f"singular constraint system (degenerate geometry): {exc}",
                                  max_residual=max_res, iterations=it) from exc
        dlam = dlam.reshape(n_mol, n_con, n_beads)

        # Backtracking on the residual sup-norm: full Newton steps overshoot
        # when the trial distortion is large (the residual is quadratic in
        # lambda), but a damped step always exists that decreases it.
        step = 1.0
        for _ in range(40):
            cand = lam + step * dlam
            cand_cur, cand_grad = apply_correction(cand)
            cand_d, cand_res = residuals(cand_cur)
            cand_max = float(np.abs(cand_res).max())
            if cand_max < max_res:
                break
            step *= 0.5
        else:
            raise ConstraintError(
                "position constraint solve stalled (no descent step found, "
                f"max residual {max_res:.3e})", max_residual=max_res, iterations=it)
        lam, cur, grad, d, res, max_res = cand, cand_cur, cand_grad, cand_d, cand_res, cand_max

    raise AssertionError("unreachable")


def solve_velocity_multipliers(momenta, positions, topology, masses, h):
    """Direct velocity-multiplier solve; momenta gain -(h/2) grad_g^T sigma.

    Constraint gradients are evaluated at the supplied (end-of-step)
    positions, which must already satisfy g = 0.  The system is linear and
    per-bead: one M x M solve per molecule per bead, batched.

    Returns (sigmas (n_mol, M, P), corrected momenta (N, P)).
    """
    if not topology.constraint_pairs:
        return np.zeros((topology.n_molecules, 0, momenta.shape[1])), momenta.copy()

    pairs = topology.constraint_pairs
    a, b, _l2 = _pair_arrays(topology)
    spm = topology.sites_per_molecule
    n_mol = topology.n_molecules
    n_con = len(pairs)
    n_beads = momenta.shape[1]

    site_m = topology.site_masses[:spm]
    w, s = _coupling_matrix(pairs, site_m)
    inv_m = 1.0 / site_m

    pos = _mol_view(positions, topology)
    mom = _mol_view(momenta, topology)
    vel = mom * inv_m[None, :, None, None]
    r = pos[:, a] - pos[:, b]
    dv = vel[:, a] - vel[:, b]
    f = (r * dv).sum(axis=2)                                  # (n_mol, M, P)

    # A[m, k, c, c'] = h w[c, c'] (r_c . r_c')[m, k]
    dots = np.einsum('mcsk,mdsk->mcdk', r, r)
    A = h * w[None, :, :, None] * dots
    A = A.transpose(0, 3, 1, 2).reshape(n_mol * n_beads, n_con, n_con)
    rhs = f.transpose(0, 2, 1).reshape(n_mol * n_beads, n_con, 1)
    try:
        sig = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise ConstraintError(f"singular velocity-constraint system: {exc}") from exc
    sig = sig.reshape(n_mol, n_beads, n_con).transpose(0, 2, 1)

    grad = np.einsum('ac,mcsp->masp', s, sig[:, :, None, :] * r)
    new_mom = mom + (-h) * grad
    return sig, new_mom.reshape(momenta.shape)


def classic_shake(trial_positions, reference_positions, topology, masses, h,
                  tol_g=1e-10, max_iter=100):
    """Per-bead SHAKE: Gauss-Seidel multiplier sweeps with h^2 coupling.

    Beads are treated independently (no Bhat); gradients at the reference
    configuration.  Vectorized over molecules and beads, sequential over
    constraints, so the sweep order is fixed and deterministic.
    """
    if not topology.constraint_pairs:
        return trial_positions.copy()

    pairs = topology.constraint_pairs
    spm = topology.sites_per_molecule
    site_m = topology.site_masses[:spm]
    pos = _mol_view(trial_positions, topology).copy()
    ref = _mol_view(reference_positions, topology)

    for sweep in range(max_iter):
        if _max_g_residual(pos, pairs) < tol_g:
            return pos.reshape(trial_positions.shape)
        for (i, j, length) in pairs:
            d = pos[:, i] - pos[:, j]                        # (n_mol, 3, P)
            res = (d ** 2).sum(axis=1) - length ** 2         # (n_mol, P)
            d_ref = ref[:, i] - ref[:, j]
            denom = 2.0 * h * h * (1.0 / site_m[i] + 1.0 / site_m[j]) * (d * d_ref).sum(axis=1)
            if np.abs(denom).min() < 1e-12:
                raise ConstraintError("degenerate geometry in classic SHAKE "
                                      f"(pair {i}-{j})",
                                      max_residual=float(np.abs(res).max()))
            g = res / denom
            pos[:, i] -= (h * h / site_m[i]) * g[:, None, :] * d_ref
            pos[:, j] += (h * h / site_m[j]) * g[:, None, :] * d_ref
    final = _max_g_residual(pos, pairs)
    if final < tol_g:
        return pos.reshape(trial_positions.shape)
    raise ConstraintError(f"classic SHAKE did not converge in {max_iter} sweeps "
                          f"(max residual {final:.3e})", max_residual=final,
                          iterations=max_iter)


def _max_g_residual(pos_mol, pairs):
    worst = 0.0
    for (i, j, length) in pairs:
        d = pos_mol[:, i] - pos_mol[:, j]
        worst = max(worst, float(np.abs((d ** 2).sum(axis=1) - length ** 2).max()))
    return worst


def classic_rattle_project(momenta, positions, topology, masses,
                           tol_f=1e-12, max_iter=500):
    """Per-bead RATTLE velocity projection onto the constraint tangent space.

    Iterative per-constraint corrections; exact in one pass for a single
    constraint.  Pure function, returns corrected momenta.
    """
    if not topology.constraint_pairs:
        return momenta.copy()

    pairs = topology.constraint_pairs
    spm = topology.sites_per_molecule
    site_m = topology.site_masses[:spm]
    pos = _mol_view(positions, topology)
    mom = _mol_view(momenta, topology).copy()

    def worst_f(mom):
        worst = 0.0
        for (i, j, _length) in pairs:
            r = pos[:, i] - pos[:, j]
            v = mom[:, i] / site_m[i] - mom[:, j] / site_m[j]
            worst = max(worst, float(np.abs((v * r).sum(axis=1)).max()))
        return worst

    for sweep in range(max_iter):
        if worst_f(mom) < tol_f:
            return mom.reshape(momenta.shape)
        for (i, j, _length) in pairs:
            r = pos[:, i] - pos[:, j]
            v = mom[:, i] / site_m[i] - mom[:, j] / site_m[j]
            f = (v * r).sum(axis=1)                          # (n_mol, P)
            mu_inv = 1.0 / site_m[i] + 1.0 / site_m[j]
            g = f / (mu_inv * (r ** 2).sum(axis=1))
            mom[:, i] -= g[:, None, :] * r
            mom[:, j] += g[:, None, :] * r
    final = worst_f(mom)
    if final < tol_f:
        return mom.reshape(momenta.shape)
    raise ConstraintError(f"classic RATTLE projection did not converge in {max_iter} "
                          f"sweeps (max residual {final:.3e})", max_residual=final,
                          iterations=max_iter)
