"""Constrained ring-polymer molecular dynamics with trigonometric integrators.

The package is organized around seven building blocks:

* state         topology, reduced units, bead phase space, initialization
* normal_modes  mode basis, exact free-polymer propagator, mollifier
* constraints   normal-mode SHAKE/RATTLE and the classic per-bead solvers
* forcefield    SPC/E pair interactions with switched fast/slow splitting
* integrators   impulse_r, molly_r, mts, rattle, rattle_i steppers + run()
* diagnostics   Hamiltonian, drift metrics, reversibility/symplecticity
* cli           scenario configs, the `ringmd` command, and the self test
"""
from .state import (ReducedUnits, RingPolymerState, Topology, build_water_topology,
                    dof_masses, initialize_state, minimum_image)
from .normal_modes import (NormalModeBasis, PropagatorCache, apply_bhat, build_basis,
                           build_propagator, mollify_positions, propagate_free)
from .constraints import (SolveReport, classic_rattle_project, classic_shake,
                          residual_f, residual_g, solve_position_multipliers,
                          solve_velocity_multipliers)
from .forcefield import ForceFieldSpec, pair_energy_force, switch, total_forces
from .integrators import (SchemeConfig, StepOutcome, make_stepper, run,
                          step_impulse_r, step_molly_r, step_mts, step_rattle,
                          step_rattle_i)
from .diagnostics import (EnergyTrace, StabilityMetrics, compute_metrics, hamiltonian,
                          reversibility_defect, symplecticity_defect)
from .errors import (ConfigError, ConstraintError, DiagnosticsError, ForceFieldError,
                     PlacementError, RingmdError, ValidationError)

__version__ = "0.1.0"
