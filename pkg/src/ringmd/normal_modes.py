"""Ring-polymer normal modes and the exact free-polymer propagator.

The free ring polymer decouples, per Cartesian degree of freedom, into P
harmonic modes with frequencies omega_k = 2*alpha*sin(k*pi/P).  This module
builds the real orthogonal trigonometric basis U that diagonalizes the
cyclic second-difference (spring) matrix, and from it the bead-space
propagator blocks

    x(t) = Ahat(t) x(0) + (1/m) Bhat(t) p(0)
    p(t) = m Chat(t) x(0) + Ahat(t) p(0)

with diagonal mode entries A = cos(w t), B = sin(w t)/w, C = -w sin(w t)
and the free-particle limits A = 1, B = t, C = 0 on the zero mode.  The
mollifier (time-averaging) matrix has mode entries sinc(w t) with 1 on the
zero mode.

Column convention of U (bead index j, mode index k, both 0-based):
    k = 0:              1/sqrt(P)
    1 <= k < P/2:       sqrt(2/P) * cos(2 pi j k / P)
    k = P/2 (P even):   (-1)^j / sqrt(P)
    P/2 < k <= P-1:     sqrt(2/P) * sin(2 pi j k / P)
Each column k is an eigenvector of the cyclic Laplacian with eigenvalue
4 sin^2(k pi / P), so omega[k] = 2 alpha sin(k pi / P) holds for every k
(modes k and P-k are the degenerate cosine/sine pair).
"""
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .state import RingPolymerState


@dataclass(frozen=True)
class NormalModeBasis:
    """Orthogonal mode transform and frequencies for one (P, alpha)."""

    n_beads: int
    alpha: float
    U: np.ndarray          # (P, P), columns are modes
    omega: np.ndarray      # (P,), omega[0] = 0


@dataclass(frozen=True)
class PropagatorCache:
    """Bead-space propagator blocks for one time step.

    All four matrices are symmetric (orthogonal conjugations of diagonals).
    Dmoll is the mollifier U D(h) U^T used for averaged slow forces.
    """

    h: float
    basis: NormalModeBasis
    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    Dmoll: np.ndarray
    # Mode-diagonal entries, kept for tests and for exact identities.
    a_diag: np.ndarray
    b_diag: np.ndarray
    c_diag: np.ndarray
    d_diag: np.ndarray


def build_basis(n_beads, alpha):
    """Build the trigonometric normal-mode basis for P beads."""
    if n_beads < 1:
        raise ValidationError(f"n_beads must be >= 1, got {n_beads}")
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")

    P = n_beads
    j = np.arange(P)
    U = np.empty((P, P))
    U[:, 0] = 1.0 / np.sqrt(P)
    for k in range(1, P):
        if 2 * k < P:
            U[:, k] = np.sqrt(2.0 / P) * np.cos(2.0 * np.pi * j * k / P)
        elif 2 * k == P:
            U[:, k] = (-1.0) ** j / np.sqrt(P)
        else:
            U[:, k] = np.sqrt(2.0 / P) * np.sin(2.0 * np.pi * j * k / P)
    omega = 2.0 * alpha * np.sin(np.arange(P) * np.pi / P)
    omega[0] = 0.0
    return NormalModeBasis(n_beads=P, alpha=alpha, U=U, omega=omega)


def cyclic_laplacian(n_beads):
    """Mass-free cyclic second-difference matrix (2 on diagonal, -1 wrap)."""
    P = n_beads
    lap = 2.0 * np.eye(P)
    for j in range(P):
        lap[j, (j - 1) % P] -= 1.0
        lap[j, (j + 1) % P] -= 1.0
    if P == 1:
        lap[:] = 0.0
    if P == 2:
        # Both neighbours wrap onto the same bead.
        lap = np.array([[2.0, -2.0], [-2.0, 2.0]])
    return lap


def build_propagator(basis, h):
    """Exact free-flow blocks and mollifier for time step h."""
    if h <= 0:
        raise ValidationError(f"h must be positive, got {h}")
    w = basis.omega
    wh = w * h
    a = np.cos(wh)
    b = np.empty_like(w)
    c = -w * np.sin(wh)
    d = np.empty_like(w)
    nz = w > 0
    b[~nz] = h                      # centroid is a free particle
    b[nz] = np.sin(wh[nz]) / w[nz]
    d[~nz] = 1.0
    d[nz] = np.sin(wh[nz]) / wh[nz]

    U = basis.U
    Ahat = (U * a) @ U.T
    Bhat = (U * b) @ U.T
    Chat = (U * c) @ U.T
    Dmoll = (U * d) @ U.T
    return PropagatorCache(h=h, basis=basis, Ahat=Ahat, Bhat=Bhat, Chat=Chat,
                           Dmoll=Dmoll, a_diag=a, b_diag=b, c_diag=c, d_diag=d)


def propagate_free(state, cache, masses):
    """Exact free ring-polymer flow over the cache's time step.

    masses: (N,) per-degree-of-freedom masses.  Pure; returns a new state.
    """
    masses = np.asarray(masses, dtype=float)
    if masses.shape != (state.n_dof,):
        raise ValidationError(f"masses must have shape ({state.n_dof},), got {masses.shape}")
    if cache.basis.n_beads != state.n_beads:
        raise ValidationError("cache and state bead counts differ")
    x, p = state.positions, state.momenta
    m = masses[:, None]
    new_x = x @ cache.Ahat + (p / m) @ cache.Bhat
    new_p = (m * x) @ cache.Chat + p @ cache.Ahat
    return RingPolymerState(new_x, new_p, state.time + cache.h)


def mollify_positions(positions, cache):
    """Apply the time-averaging operator U D(h) U^T along the bead axis."""
    return np.asarray(positions) @ cache.Dmoll


def apply_bhat(cache, vec):
    """Multiply a per-bead vector (last axis of length P) by Bhat."""
    return np.asarray(vec) @ cache.Bhat


def spring_forces(positions, masses, alpha):
    """Explicit bead-spring forces -m alpha^2 (2x - x_prev - x_next).

    Used only by the baseline integrators that do not integrate the springs
    exactly.
    """
    x = positions
    lap = 2.0 * x - np.roll(x, 1, axis=1) - np.roll(x, -1, axis=1)
    return -np.asarray(masses)[:, None] * alpha ** 2 * lap


def spring_energy(positions, masses, alpha):
    """Cyclic spring potential sum_k (m alpha^2 / 2) (x_k - x_{k-1})^2."""
    diff = positions - np.roll(positions, 1, axis=1)
    return 0.5 * alpha ** 2 * float(np.sum(np.asarray(masses)[:, None] * diff ** 2))
