"""The five steppers, as composable flow maps.

impulse_r   half kick (potential + position multipliers), exact free flight,
            half kick (potential + velocity multipliers)
molly_r     impulse_r with the slow kicks evaluated through the mollifier:
            force A^T grad V(A x), constraint kicks stay at true positions
mts         outer projected slow half-kicks around m inner impulse_r steps
            of the fast potential at delta_h; optionally mollified slow force
rattle      velocity Verlet with explicit spring forces, classic per-bead
            SHAKE on positions and RATTLE projection on velocities
rattle_i    outer projected slow half-kicks around m inner rattle steps

Composition order follows the symmetric splitting: constraint half-flows
outermost, potential half-flows next, the exact linear flow innermost.
Multipliers restart from zero every step (no warm starting).  Constraint
failures are returned as failed StepOutcomes with the incoming state
untouched, so drivers can log blow-up trajectories.

Both outer slow kicks of the multi-step schemes are followed by a velocity
re-projection: f = 0 then holds entering and leaving every inner step, and
the composition stays exactly time-reversible (a trailing projection alone
breaks flip symmetry at first order in the slow force).
"""
from dataclasses import dataclass, field

import numpy as np

from .constraints import (SolveReport, classic_rattle_project, classic_shake,
                          residual_f, residual_g, solve_position_multipliers,
                          solve_velocity_multipliers)
from .diagnostics import EnergyTrace, kinetic_energy
from .errors import ConstraintError, ValidationError
from .forcefield import total_fast_force, total_full_force, total_slow_force
from .normal_modes import build_basis, build_propagator, spring_energy, spring_forces
from .state import RingPolymerState, dof_masses

SCHEMES = ("impulse_r", "molly_r", "mts", "rattle", "rattle_i")


@dataclass
class SchemeConfig:
    """Stepper selection and step sizes."""

    scheme: str
    h: float
    delta_h: float = None
    mollify: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.h <= 0:
            raise ValidationError(f"h must be positive, got {self.h}")
        if self.scheme in ("mts", "rattle_i"):
            if self.delta_h is None:
                raise ValidationError(f"{self.scheme} requires delta_h")
            self.n_substeps()

    def n_substeps(self):
        m = int(round(self.h / self.delta_h))
        if m < 1 or abs(m * self.delta_h - self.h) > 1e-9 * self.h:
            raise ValidationError(f"h/delta_h must be a positive integer, got "
                                  f"{self.h}/{self.delta_h}")
        return m


@dataclass
class StepOutcome:
    """Result of one step; energies are filled where the step computed them
    for free (the mollified schemes leave potential to the caller)."""

    state: RingPolymerState
    kinetic: float = None
    spring: float = None
    potential: float = None
    position_report: SolveReport = None
    failed: bool = False
    failure_reason: str = None
    forces_new: np.ndarray = field(default=None, repr=False)


def _failed(state, reason):
    return StepOutcome(state=state, failed=True, failure_reason=reason)


def _mollified_eval(potential_force, positions, moll):
    """(V(A x), A^T grad-part): force of the mollified potential V(A x)."""
    averaged = positions @ moll
    v, f = potential_force(averaged)
    return v, f @ moll


def _finite(*arrays):
    return all(np.all(np.isfinite(a)) for a in arrays)


def _trig_step(state, potential_force, cache, topology, masses, h,
               mollifier=None, tol_g=1e-10, tol_f=1e-10, max_iter=100):
    """Shared impulse/molly kernel for one step of size h == cache.h."""
    x, p = state.positions, state.momenta
    m_col = masses[:, None]

    if mollifier is None:
        _, f0 = potential_force(x)
    else:
        _, f0 = _mollified_eval(potential_force, x, mollifier)
    p_half = p + 0.5 * h * f0

    trial = x @ cache.Ahat + (p_half / m_col) @ cache.Bhat
    if not _finite(trial):
        return _failed(state, "non-finite trial positions (diverged)")
    try:
        psol = solve_position_multipliers(trial, x, topology, masses, cache,
                                          tol_g=tol_g, max_iter=max_iter)
    except ConstraintError as exc:
        return _failed(state, f"constraint non-convergence: {exc}")
    x_new = psol.positions
    p_flight = (m_col * x) @ cache.Chat + (p_half + psol.momentum_kick) @ cache.Ahat

    if mollifier is None:
        v1, f1 = potential_force(x_new)
    else:
        v1, f1 = _mollified_eval(potential_force, x_new, mollifier)
    p_plus = p_flight + 0.5 * h * f1
    if not _finite(x_new, p_plus):
        return _failed(state, "non-finite state (diverged)")
    try:
        _, p_new = solve_velocity_multipliers(p_plus, x_new, topology, masses, h)
    except ConstraintError as exc:
        return _failed(state, f"velocity constraint failure: {exc}")

    new_state = RingPolymerState(x_new, p_new, state.time + h)
    out = StepOutcome(state=new_state, position_report=psol.report,
                      kinetic=kinetic_energy(new_state, masses),
                      spring=spring_energy(x_new, masses, cache.basis.alpha))
    if mollifier is None:
        out.potential = v1
    return out


def step_impulse_r(state, potential_force, cache, topology, masses, h,
                   tol_g=1e-10, tol_f=1e-10, max_iter=100):
    """One step of the trigonometric integrator with constant time step."""
    if abs(cache.h - h) > 1e-12 * max(1.0, h):
        raise ValidationError("cache was built for a different time step")
    return _trig_step(state, potential_force, cache, topology, masses, h,
                      mollifier=None, tol_g=tol_g, tol_f=tol_f, max_iter=max_iter)


def step_molly_r(state, potential_force, cache, topology, masses, h,
                 tol_g=1e-10, tol_f=1e-10, max_iter=100):
    """One step with mollified (time-averaged) slow forces."""
    if abs(cache.h - h) > 1e-12 * max(1.0, h):
        raise ValidationError("cache was built for a different time step")
    return _trig_step(state, potential_force, cache, topology, masses, h,
                      mollifier=cache.Dmoll, tol_g=tol_g, tol_f=tol_f,
                      max_iter=max_iter)


def _projected_kick(positions, momenta, force, scale, topology, masses, h):
    """Momentum kick by scale*force followed by the velocity projection."""
    p = momenta + scale * force
    if topology.constraint_pairs:
        _, p = solve_velocity_multipliers(p, positions, topology, masses, h)
    return p


def step_mts(state, fast_force, slow_force, cache, topology, masses, h, delta_h,
             mollify=False, outer_mollifier=None, tol_g=1e-10, tol_f=1e-10,
             max_iter=100):
    """Multiple-time-step trigonometric integrator.

    cache must be built at delta_h; the slow potential kicks at h around m
    inner fast steps.  With mollify the slow force is filtered by the outer
    mollifier built at h.
    """
    m = SchemeConfig("mts", h, delta_h).n_substeps()
    if abs(cache.h - delta_h) > 1e-12 * max(1.0, delta_h):
        raise ValidationError("mts cache must be built at delta_h")
    moll = None
    if mollify:
        moll = outer_mollifier if outer_mollifier is not None \
            else build_propagator(cache.basis, h).Dmoll

    x, p = state.positions, state.momenta
    if moll is None:
        _, fs = slow_force(x)
    else:
        _, fs = _mollified_eval(slow_force, x, moll)
    try:
        p = _projected_kick(x, p, fs, 0.5 * h, topology, masses, h)
    except ConstraintError as exc:
        return _failed(state, f"velocity constraint failure: {exc}")

    cur = RingPolymerState(x.copy(), p, state.time)
    inner = None
    for _ in range(m):
        inner = _trig_step(cur, fast_force, cache, topology, masses, delta_h,
                           mollifier=None, tol_g=tol_g, tol_f=tol_f,
                           max_iter=max_iter)
        if inner.failed:
            return _failed(state, inner.failure_reason)
        cur = inner.state

    x2 = cur.positions
    if moll is None:
        vs2, fs2 = slow_force(x2)
    else:
        vs2, fs2 = _mollified_eval(slow_force, x2, moll)
    try:
        p2 = _projected_kick(x2, cur.momenta, fs2, 0.5 * h, topology, masses, h)
    except ConstraintError as exc:
        return _failed(state, f"velocity constraint failure: {exc}")
    if not _finite(x2, p2):
        return _failed(state, "non-finite state (diverged)")

    new_state = RingPolymerState(x2, p2, state.time + h)
    out = StepOutcome(state=new_state, position_report=inner.position_report,
                      kinetic=kinetic_energy(new_state, masses),
                      spring=spring_energy(x2, masses, cache.basis.alpha))
    if moll is None and inner.potential is not None:
        out.potential = inner.potential + vs2     # fast(x2) + slow(x2)
    return out


def step_rattle(state, total_force, topology, masses, h, tol_g=1e-10,
                tol_f=1e-10, max_iter=100, forces_in=None):
    """Velocity Verlet with classic SHAKE/RATTLE; springs come in explicitly
    through total_force.  forces_in may carry the previous step's forces."""
    x, p = state.positions, state.momenta
    m_col = masses[:, None]

    f0 = forces_in if forces_in is not None else total_force(x)[1]
    p_half = p + 0.5 * h * f0
    trial = x + h * p_half / m_col
    if not _finite(trial):
        return _failed(state, "non-finite trial positions (diverged)")
    try:
        x_new = classic_shake(trial, x, topology, masses, h,
                              tol_g=tol_g, max_iter=max_iter)
    except ConstraintError as exc:
        return _failed(state, f"constraint non-convergence: {exc}")
    p_half = p_half + m_col * (x_new - trial) / h

    _, f1 = total_force(x_new)
    p_plus = p_half + 0.5 * h * f1
    if not _finite(x_new, p_plus):
        return _failed(state, "non-finite state (diverged)")
    try:
        p_new = classic_rattle_project(p_plus, x_new, topology, masses, tol_f=tol_f)
    except ConstraintError as exc:
        return _failed(state, f"velocity constraint failure: {exc}")

    new_state = RingPolymerState(x_new, p_new, state.time + h)
    return StepOutcome(state=new_state, kinetic=kinetic_energy(new_state, masses),
                       forces_new=f1)


def step_rattle_i(state, fast_force, slow_force, topology, masses, h, delta_h,
                  tol_g=1e-10, tol_f=1e-10, max_iter=100):
    """Impulse MTS with classic RATTLE inner steps.

    fast_force must include the explicit spring forces; the slow potential
    kicks at h with a velocity re-projection after each outer kick.
    """
    m = SchemeConfig("rattle_i", h, delta_h).n_substeps()
    x, p = state.positions, state.momenta
    _, fs = slow_force(x)
    try:
        p = classic_rattle_project(p + 0.5 * h * fs, x, topology, masses, tol_f=tol_f) \
            if topology.constraint_pairs else p + 0.5 * h * fs
    except ConstraintError as exc:
        return _failed(state, f"velocity constraint failure: {exc}")

    cur = RingPolymerState(x.copy(), p, state.time)
    forces = None
    for _ in range(m):
        inner = step_rattle(cur, fast_force, topology, masses, delta_h,
                            tol_g=tol_g, tol_f=tol_f, max_iter=max_iter,
                            forces_in=forces)
        if inner.failed:
            return _failed(state, inner.failure_reason)
        cur = inner.state
        forces = inner.forces_new

    x2 = cur.positions
    _, fs2 = slow_force(x2)
    p2 = cur.momenta + 0.5 * h * fs2
    if not _finite(x2, p2):
        return _failed(state, "non-finite state (diverged)")
    try:
        if topology.constraint_pairs:
            p2 = classic_rattle_project(p2, x2, topology, masses, tol_f=tol_f)
    except ConstraintError as exc:
        return _failed(state, f"velocity constraint failure: {exc}")

    new_state = RingPolymerState(x2, p2, state.time + h)
    return StepOutcome(state=new_state, kinetic=kinetic_energy(new_state, masses))


def relax_state(state, topology, units, ff_spec, n_steps=2000, h=5e-4, damping=0.995):
    """Damped baseline stepping onto a nearby potential-energy minimum.

    Runs classic RATTLE steps with the full potential plus explicit springs,
    scaling the momenta by `damping` after each step.  Momentum scaling
    preserves the hidden constraints (f is linear in p), so the returned
    state sits on the constraint manifold with its clock reset to zero.
    """
    masses = dof_masses(topology)
    alpha = units.alpha(state.n_beads)

    def total(x):
        v, f = total_full_force(x, topology, ff_spec)
        return v, f + spring_forces(x, masses, alpha)

    s = state
    forces = None
    for i in range(n_steps):
        out = step_rattle(s, total, topology, masses, h, forces_in=forces)
        if out.failed:
            raise ConstraintError(f"relaxation failed at step {i}: {out.failure_reason}")
        forces = out.forces_new
        s = RingPolymerState(out.state.positions, damping * out.state.momenta)
    return RingPolymerState(s.positions, s.momenta, 0.0)


def make_force_providers(topology, ff_spec):
    """(full, fast, slow) providers; with splitting disabled the whole
    potential is slow and the fast part is empty."""
    def full(x):
        return total_full_force(x, topology, ff_spec)

    if ff_spec.split_enabled:
        def fast(x):
            return total_fast_force(x, topology, ff_spec)

        def slow(x):
            return total_slow_force(x, topology, ff_spec)
    else:
        def fast(x):
            return 0.0, np.zeros_like(x)

        slow = full
    return full, fast, slow


def make_stepper(config, topology, units, ff_spec, n_beads, tol_g=1e-10,
                 tol_f=1e-10, max_iter=100):
    """Bind a SchemeConfig to force providers and caches; returns
    step(state) -> StepOutcome."""
    masses = dof_masses(topology)
    alpha = units.alpha(n_beads)
    basis = build_basis(n_beads, alpha)
    full, fast, slow = make_force_providers(topology, ff_spec)
    kw = dict(tol_g=tol_g, tol_f=tol_f, max_iter=max_iter)

    if config.scheme == "impulse_r":
        cache = build_propagator(basis, config.h)
        return lambda s: step_impulse_r(s, full, cache, topology, masses, config.h, **kw)
    if config.scheme == "molly_r":
        cache = build_propagator(basis, config.h)
        return lambda s: step_molly_r(s, full, cache, topology, masses, config.h, **kw)
    if config.scheme == "mts":
        cache = build_propagator(basis, config.delta_h)
        outer = build_propagator(basis, config.h).Dmoll if config.mollify else None
        return lambda s: step_mts(s, fast, slow, cache, topology, masses, config.h,
                                  config.delta_h, mollify=config.mollify,
                                  outer_mollifier=outer, **kw)
    if config.scheme == "rattle":
        def total(x):
            v, f = full(x)
            return v, f + spring_forces(x, masses, alpha)

        carry = {"forces": None, "time": None}

        def stepper(s):
            # Reuse the end-of-step forces only on consecutive steps.
            forces_in = carry["forces"] if carry["time"] == s.time else None
            out = step_rattle(s, total, topology, masses, config.h,
                              forces_in=forces_in, **kw)
            if not out.failed:
                carry["forces"] = out.forces_new
                carry["time"] = out.state.time
            return out

        return stepper
    if config.scheme == "rattle_i":
        def fast_total(x):
            v, f = fast(x)
            return v, f + spring_forces(x, masses, alpha)

        return lambda s: step_rattle_i(s, fast_total, slow, topology, masses,
                                       config.h, config.delta_h, **kw)
    raise ValidationError(f"unknown scheme {config.scheme!r}")


def run(state, config, topology, units, ff_spec, n_steps, record_every=1,
        observers=(), tol_g=1e-10, tol_f=1e-10, max_iter=100, metadata=None):
    """Iterate the configured stepper, recording an energy trace.

    A row is recorded at step 0 and every record_every-th step after.  On a
    stepper failure the run aborts cleanly and the trace up to the failure is
    returned, with failure details in the metadata.
    """
    masses = dof_masses(topology)
    alpha = units.alpha(state.n_beads)
    stepper = make_stepper(config, topology, units, ff_spec, state.n_beads,
                           tol_g=tol_g, tol_f=tol_f, max_iter=max_iter)

    meta = {"scheme": config.scheme, "h": config.h,
            "delta_h": config.delta_h if config.delta_h is not None else 0.0,
            "mollify": config.mollify, "failed": False}
    if metadata:
        meta.update(metadata)

    rows = {name: [] for name in ("steps", "times", "kinetic", "spring",
                                  "potential", "total", "max_g", "max_f")}

    def record(i, s, outcome=None):
        kin = outcome.kinetic if outcome is not None and outcome.kinetic is not None \
            else kinetic_energy(s, masses)
        spr = outcome.spring if outcome is not None and outcome.spring is not None \
            else spring_energy(s.positions, masses, alpha)
        pot = outcome.potential if outcome is not None and outcome.potential is not None \
            else total_full_force(s.positions, topology, ff_spec)[0]
        rows["steps"].append(i)
        rows["times"].append(s.time)
        rows["kinetic"].append(kin)
        rows["spring"].append(spr)
        rows["potential"].append(pot)
        rows["total"].append(kin + spr + pot)
        if topology.constraint_pairs:
            rows["max_g"].append(float(np.abs(residual_g(s, topology)).max()))
            rows["max_f"].append(float(np.abs(residual_f(s, topology, masses)).max()))
        else:
            rows["max_g"].append(0.0)
            rows["max_f"].append(0.0)

    record(0, state)
    current = state
    for i in range(1, n_steps + 1):
        outcome = stepper(current)
        if outcome.failed:
            meta["failed"] = True
            meta["failure_reason"] = outcome.failure_reason
            meta["failed_step"] = i
            break
        current = outcome.state
        for obs in observers:
            obs(i, current, outcome)
        if i % record_every == 0:
            record(i, current, outcome)

    return EnergyTrace(steps=np.asarray(rows["steps"]), times=np.asarray(rows["times"]),
                       kinetic=np.asarray(rows["kinetic"]), spring=np.asarray(rows["spring"]),
                       potential=np.asarray(rows["potential"]), total=np.asarray(rows["total"]),
                       max_g=np.asarray(rows["max_g"]), max_f=np.asarray(rows["max_f"]),
                       metadata=meta)
