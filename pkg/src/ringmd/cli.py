"""Command-line front end: scenario configs, runs, analysis, self-test.

Configs are line-oriented ``key = value`` entries inside ``[section]``
headers.  Unknown sections or keys are hard errors; a preset fills scenario
defaults and explicit keys override them.  Exit codes: 0 success,
1 validation error, 2 stepper failure, 3 internal error.
"""
import argparse
import dataclasses
import sys
from dataclasses import dataclass

import numpy as np

from . import diagnostics
from .diagnostics import EnergyTrace, compute_metrics, hamiltonian, reversibility_defect
from .errors import ConfigError, RingmdError, ValidationError
from .forcefield import ForceFieldSpec, total_fast_force, total_full_force, total_slow_force
from .integrators import SchemeConfig, make_stepper, relax_state, run
from .normal_modes import build_basis, build_propagator, cyclic_laplacian, propagate_free
from .state import (ReducedUnits, RingPolymerState, build_water_topology, dof_masses,
                    initialize_state, project_momenta, sample_thermal_momenta)

PRESETS = {
    "table2": dict(n_molecules=8, p_beads=16, cell_edge=6.2, truncation="none",
                   split_enabled=False, scheme="impulse_r", h=0.02,
                   temperature=0.001, relax_steps=3000, equil_steps=4000,
                   n_steps=10000, record_every=1),
    "table3": dict(n_molecules=8, p_beads=8, cell_edge=6.2, truncation="nearest_image",
                   split_enabled=False, scheme="rattle_i", h=0.02, delta_h=0.002,
                   temperature=0.2, relax_steps=3000, equil_steps=200,
                   n_steps=2500, record_every=1),
    "table4": dict(n_molecules=27, p_beads=4, cell_edge=9.3, truncation="cutoff",
                   r_cut=8.0, delta_r=4.5, split_enabled=True, scheme="mts",
                   h=0.1, delta_h=0.05, temperature=0.2, relax_steps=3000,
                   equil_steps=200, n_steps=2500, record_every=1),
    "fig1": dict(n_molecules=8, p_beads=16, cell_edge=6.2, truncation="none",
                 split_enabled=False, scheme="impulse_r", h=0.125,
                 temperature=0.05, relax_steps=3000, equil_steps=0,
                 n_steps=2000, record_every=1),
    "fig3": dict(n_molecules=27, p_beads=4, cell_edge=9.3, truncation="cutoff",
                 r_cut=8.0, delta_r=4.5, split_enabled=True,
                 nonsmooth_split_radius=4.5, scheme="mts", mollify=True,
                 h=0.1, delta_h=0.05, temperature=0.2, relax_steps=3000,
                 equil_steps=200, n_steps=2000, record_every=1),
    "custom": dict(),
}

_SCHEMA = {
    "scenario": {"preset": str, "seed": int, "n_steps": int, "record_every": int,
                 "relax_steps": int, "equil_steps": int, "equil_h": float},
    "system": {"n_molecules": int, "p_beads": int, "cell_edge": float,
               "temperature": float, "r_oh": float, "angle_hoh": float},
    "forcefield": {"truncation": str, "r_cut": float, "delta_r": float,
                   "split_enabled": bool, "nonsmooth_split_radius": float,
                   "a_lj": float, "b_lj": float},
    "integrator": {"scheme": str, "h": float, "delta_h": float, "mollify": bool},
    "output": {"trace": str, "summary": str},
}

_FIELD_SECTION = {key: section for section, keys in _SCHEMA.items() for key in keys}


@dataclass
class ScenarioConfig:
    """A fully resolved scenario: system, force field, scheme, outputs."""

    preset: str = "custom"
    seed: int = 1234
    n_steps: int = 100
    record_every: int = 1
    relax_steps: int = 0
    equil_steps: int = 0
    equil_h: float = None     # equilibration step size; defaults to h
    n_molecules: int = 2
    p_beads: int = 4
    cell_edge: float = 6.2
    temperature: float = 1.0
    r_oh: float = 1.0
    angle_hoh: float = 109.47
    truncation: str = "none"
    r_cut: float = 8.0
    delta_r: float = 4.5
    split_enabled: bool = False
    nonsmooth_split_radius: float = None
    a_lj: float = 2.633e6
    b_lj: float = 2.617e3
    scheme: str = "impulse_r"
    h: float = 0.02
    delta_h: float = None
    mollify: bool = False
    trace: str = None
    summary: str = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from "
                              f"{sorted(PRESETS)}")
        if self.n_steps < 0:
            raise ConfigError(f"n_steps must be >= 0, got {self.n_steps}")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be >= 1, got {self.record_every}")
        if self.relax_steps < 0 or self.equil_steps < 0:
            raise ConfigError("relax_steps and equil_steps must be >= 0")
        self.scheme_config()          # validates scheme/h/delta_h

    def scheme_config(self):
        return SchemeConfig(scheme=self.scheme, h=self.h, delta_h=self.delta_h,
                            mollify=self.mollify)

    def build_topology(self):
        return build_water_topology(self.n_molecules, self.cell_edge,
                                    geometry={"r_OH": self.r_oh, "angle_HOH": self.angle_hoh},
                                    truncation_mode=self.truncation)

    def build_ff_spec(self, topology):
        return ForceFieldSpec.from_topology(
            topology, a_lj=self.a_lj, b_lj=self.b_lj, r_cut=self.r_cut,
            delta_r=self.delta_r, split_enabled=self.split_enabled,
            nonsmooth_split_radius=self.nonsmooth_split_radius)

    def to_text(self):
        """Canonical serialization; parsing it back yields an equal config."""
        lines = []
        for section, keys in _SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                value = getattr(self, key)
                if value is None:
                    continue
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)


def relaxed_placement(config, topology, ff_spec, units=None):
    """Rigid sub-lattice placement followed by the damped relaxation phase.

    Depends only on (topology, seed, relax_steps), so callers sweeping
    schemes or step sizes can compute it once and reuse it.
    """
    units = units or ReducedUnits()
    state = initialize_state(topology, config.p_beads, units,
                             temperature=0.0, seed=config.seed)
    if config.relax_steps > 0:
        state = relax_state(state, topology, units, ff_spec,
                            n_steps=config.relax_steps)
    return state


def prepare_state(config, topology, ff_spec, units=None, relaxed=None):
    """Initialize, optionally relax, thermalize, and equilibrate a scenario.

    The preparation protocol is: place molecules on the rigid sub-lattice;
    run `relax_steps` of damped baseline stepping so the cluster settles
    into a potential-energy pocket (no quench shock later); draw fresh
    projected momenta at the configured temperature; then discard
    `equil_steps` steps of the scenario's own scheme so measurements start
    from a settled trajectory.  Fully deterministic for a fixed seed; a
    precomputed `relaxed` placement for the same config may be passed in.
    """
    import numpy as np

    units = units or ReducedUnits()
    state = relaxed.copy() if relaxed is not None \
        else relaxed_placement(config, topology, ff_spec, units)
    if config.temperature > 0:
        rng = np.random.default_rng((config.seed, 1))
        momenta = sample_thermal_momenta(topology, config.p_beads, units,
                                         config.temperature, rng)
        momenta = project_momenta(momenta, state.positions, topology)
        state = RingPolymerState(state.positions, momenta, 0.0)
    if config.equil_steps > 0:
        equil_cfg = config.scheme_config()
        if config.equil_h is not None and config.equil_h != equil_cfg.h:
            # equilibrate at a fixed reference step so sweeps over h start
            # from the same settled trajectory
            scale = config.equil_h / equil_cfg.h if equil_cfg.delta_h else None
            equil_cfg = SchemeConfig(equil_cfg.scheme, config.equil_h,
                                     delta_h=equil_cfg.delta_h * scale if scale else None,
                                     mollify=equil_cfg.mollify)
        stepper = make_stepper(equil_cfg, topology, units, ff_spec, config.p_beads)
        for i in range(config.equil_steps):
            out = stepper(state)
            if out.failed:
                raise RingmdError(f"equilibration failed at step {i}: "
                                  f"{out.failure_reason}")
            state = out.state
        state = RingPolymerState(state.positions, state.momenta, 0.0)
    return state


def _convert(key, raw, line_no):
    target = _SCHEMA[_FIELD_SECTION[key]][key]
    if target is bool:
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"line {line_no}: key {key!r} expects a boolean, got {raw!r}")
    try:
        return target(raw)
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: key {key!r} expects {target.__name__}, "
                          f"got {raw!r}") from exc


def parse_config(text):
    """Parse config text into a ScenarioConfig (preset defaults applied)."""
    section = None
    values = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {line_no}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw_line!r}")
        if section is None:
            raise ConfigError(f"line {line_no}: key outside any [section]")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {line_no}: unknown key {key!r} in [{section}]")
        values[key] = _convert(key, raw, line_no)

    preset = values.get("preset", "custom")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    merged = dict(PRESETS[preset])
    merged.update(values)
    merged["preset"] = preset
    try:
        return ScenarioConfig(**merged)
    except (ValidationError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _summary_lines(config, trace, metrics, solver_stats):
    lines = [
        f"scenario = {config.preset}",
        f"scheme = {config.scheme}",
        f"h = {config.h:.17g}",
        f"delta_h = {config.delta_h if config.delta_h is not None else '-'}",
        f"mollify = {config.mollify}",
        f"seed = {config.seed}",
        f"n_steps = {config.n_steps}",
        f"records = {len(trace)}",
        f"failed = {trace.metadata.get('failed', False)}",
    ]
    if trace.metadata.get("failed"):
        lines.append(f"failure_reason = {trace.metadata.get('failure_reason')}")
        lines.append(f"failed_step = {trace.metadata.get('failed_step')}")
    if metrics is not None:
        lines += [
            f"drift = {metrics.drift:.17g}",
            f"noise = {metrics.noise:.17g}",
            f"delta_e = {metrics.delta_e:.17g}",
            f"delta_e_r = {metrics.delta_e_r:.17g}",
        ]
    if solver_stats["count"]:
        lines.append(f"solver_iterations_max = {solver_stats['max']}")
        lines.append(f"solver_iterations_mean = {solver_stats['sum'] / solver_stats['count']:.3f}")
    lines.append(f"max_g = {trace.max_g.max():.17g}" if len(trace) else "max_g = -")
    lines.append(f"max_f = {trace.max_f.max():.17g}" if len(trace) else "max_f = -")
    return lines


def run_command(args):
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.trace = args.out
    trace_path = config.trace or f"{config.preset}_trace.csv"
    summary_path = config.summary or trace_path + ".summary.txt"

    topology = config.build_topology()
    ff_spec = config.build_ff_spec(topology)
    units = ReducedUnits()
    state = prepare_state(config, topology, ff_spec, units)

    solver_stats = {"count": 0, "sum": 0, "max": 0}

    def collect(step, state_, outcome):
        rep = outcome.position_report
        if rep is not None:
            solver_stats["count"] += 1
            solver_stats["sum"] += rep.iterations
            solver_stats["max"] = max(solver_stats["max"], rep.iterations)

    trace = run(state, config.scheme_config(), topology, units, ff_spec,
                config.n_steps, record_every=config.record_every,
                observers=[collect],
                metadata={"seed": config.seed, "scenario": config.preset})
    trace.to_csv(trace_path)

    metrics = compute_metrics(trace) if len(trace) >= 2 else None
    diverged = (len(trace) >= 2 and
                (not np.all(np.isfinite(trace.total)) or
                 np.abs(trace.total - trace.total[0]).max() > 1e8))
    lines = _summary_lines(config, trace, metrics, solver_stats)
    text = "\n".join(lines) + "\n"
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    print(f"trace written to {trace_path}")
    print(f"summary written to {summary_path}")

    if trace.metadata.get("failed") or diverged:
        if diverged and not trace.metadata.get("failed"):
            print("diverging trace detected", file=sys.stderr)
        return 2
    return 0


def analyze_command(args):
    rows = []
    for path in args.trace:
        trace = EnergyTrace.from_csv(path)
        metrics = compute_metrics(trace)
        meta = trace.metadata
        rows.append((str(meta.get("scheme", "?")), float(meta.get("h", float("nan"))),
                     float(meta.get("delta_h", 0.0)) or None, metrics))
    rows.sort(key=lambda r: (r[0], r[1]))

    header = f"{'scheme':<10} {'h':>9} {'delta_h':>9} {'Drift':>12} {'Noise':>12} " \
             f"{'dE':>12} {'dE_r':>12}"
    print(header)
    out_rows = []
    for scheme, h, dh, m in rows:
        dh_txt = f"{dh:.4g}" if dh else "-"
        print(f"{scheme:<10} {h:>9.4g} {dh_txt:>9} {m.drift:>12.4e} {m.noise:>12.4e} "
              f"{m.delta_e:>12.4e} {m.delta_e_r:>12.4e}")
        out_rows.append((scheme, h, dh if dh else "", m.drift, m.noise, m.delta_e, m.delta_e_r))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("scheme,h,delta_h,drift,noise,delta_e,delta_e_r\n")
            for row in out_rows:
                fh.write(",".join(str(v) for v in row) + "\n")
    return 0


def _selftest_checks(inject_chat_sign_error=False):
    """Yield (name, passed, detail) for the fast invariant suite."""
    import dataclasses as _dc

    rng = np.random.default_rng(20240811)
    units = ReducedUnits()

    # Basis orthogonality and frequencies against a brute-force eigensolve.
    worst_orth = 0.0
    worst_freq = 0.0
    for n_beads in (1, 2, 3, 4, 8, 16, 32):
        basis = build_basis(n_beads, units.alpha(n_beads))
        worst_orth = max(worst_orth, float(np.abs(basis.U.T @ basis.U - np.eye(n_beads)).max()))
        evals = np.sort(np.linalg.eigvalsh(cyclic_laplacian(n_beads)))
        freq = np.sort((basis.omega / units.alpha(n_beads)) ** 2)
        worst_freq = max(worst_freq, float(np.abs(np.sort(freq) - evals).max()))
    yield "basis orthogonality", worst_orth < 1e-12, f"max |U^T U - I| = {worst_orth:.2e}"
    yield "mode frequencies", worst_freq < 1e-10, f"max eigenvalue mismatch = {worst_freq:.2e}"

    # Free-flow exactness: H0 conservation over many steps.
    n_beads = 8
    basis = build_basis(n_beads, units.alpha(n_beads))
    cache = build_propagator(basis, 0.05)
    if inject_chat_sign_error:
        cache = _dc.replace(cache, Chat=-cache.Chat)
    masses = np.array([1.3, 2.7])
    from .normal_modes import spring_energy as _senergy
    from .state import RingPolymerState as _RPS
    st = _RPS(rng.standard_normal((2, n_beads)), rng.standard_normal((2, n_beads)))

    def h0(s):
        kin = 0.5 * np.sum(s.momenta ** 2 / masses[:, None])
        return kin + _senergy(s.positions, masses, basis.alpha)

    e0 = h0(st)
    worst = 0.0
    s = st
    for _ in range(2000):
        s = propagate_free(s, cache, masses)
        worst = max(worst, abs(h0(s) - e0) / abs(e0))
        if worst > 1.0:
            break                      # already failed; avoid overflowing
    yield "free-flow exactness", worst < 1e-10, f"max relative H0 error = {worst:.2e}"

    # Reversibility of impulse_r on a tiny water system.
    topology = build_water_topology(2, 6.2)
    ff_spec = ForceFieldSpec.from_topology(topology)
    state = initialize_state(topology, 4, units, temperature=1.0, seed=7)
    config = SchemeConfig("impulse_r", 0.02)
    stepper = make_stepper(config, topology, units, ff_spec, 4,
                           tol_g=1e-12, tol_f=1e-12)
    defect = reversibility_defect(state, stepper, 5)
    yield "reversibility", defect < 1e-8, f"defect = {defect:.2e}"

    # P = 1 equivalence of the normal-mode solvers with classic SHAKE/RATTLE.
    from .constraints import (classic_rattle_project, classic_shake,
                              solve_position_multipliers, solve_velocity_multipliers)
    topo1 = build_water_topology(1, 10.0)
    cache1 = build_propagator(build_basis(1, units.alpha(1)), 0.02)
    masses1 = dof_masses(topo1)
    worst = 0.0
    for _ in range(20):
        base = initialize_state(topo1, 1, units, temperature=0.0, seed=int(rng.integers(1 << 30)))
        ref = base.positions
        trial = ref + 0.02 * rng.standard_normal(ref.shape)
        sol = solve_position_multipliers(trial, ref, topo1, masses1, cache1,
                                         tol_g=1e-13, max_iter=200)
        oracle = classic_shake(trial, ref, topo1, masses1, 0.02,
                               tol_g=1e-13, max_iter=500)
        worst = max(worst, float(np.abs(sol.positions - oracle).max()))
        mom = rng.standard_normal(ref.shape)
        _, got = solve_velocity_multipliers(mom, sol.positions, topo1, masses1, 0.02)
        want = classic_rattle_project(mom, sol.positions, topo1, masses1, tol_f=1e-14)
        worst = max(worst, float(np.abs(got - want).max()))
    yield "P=1 oracle equivalence", worst < 1e-10, f"max deviation = {worst:.2e}"

    # Force gradients against central finite differences.
    topo2 = build_water_topology(2, 8.0)
    spec2 = ForceFieldSpec.from_topology(topo2, r_cut=5.0, delta_r=2.0)
    st2 = initialize_state(topo2, 2, units, temperature=0.5, seed=3)
    x = st2.positions + 0.05 * rng.standard_normal(st2.positions.shape)
    worst = 0.0
    for fn in (total_full_force, total_fast_force, total_slow_force):
        v, f = fn(x, topo2, spec2)
        scale = max(1.0, np.abs(f).max())
        eps = 1e-6
        for idx in [(0, 0), (4, 1), (10, 0)]:
            xp = x.copy(); xp[idx] += eps
            xm = x.copy(); xm[idx] -= eps
            fd = -(fn(xp, topo2, spec2)[0] - fn(xm, topo2, spec2)[0]) / (2 * eps)
            worst = max(worst, abs(fd - f[idx]) / scale)
    yield "force gradients", worst < 1e-6, f"max relative FD mismatch = {worst:.2e}"

    # Mollifier filter bound |sinc(x)| <= |sinc(x/2)|.
    xs = np.linspace(1e-9, 20.0, 4001)
    lhs = np.abs(np.sinc(xs / np.pi))                  # numpy sinc(x) = sin(pi x)/(pi x)
    rhs = np.abs(np.sinc(xs / (2 * np.pi)))
    margin = float((rhs - lhs).min())
    yield "mollifier filter bound", margin >= -1e-12, f"min(|sinc(x/2)|-|sinc(x)|) = {margin:.2e}"


def selftest_command(args):
    failures = 0
    for name, passed, detail in _selftest_checks(args.inject_chat_sign_error):
        status = "PASS" if passed else "FAIL"
        print(f"{status}  {name}: {detail}")
        failures += 0 if passed else 1
    if failures:
        print(f"{failures} check(s) failed")
        return 1
    print("all checks passed")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ringmd",
                                     description="Constrained ring-polymer MD engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="override trace output path")
    p_run.add_argument("--seed", type=int, default=None, help="override RNG seed")
    p_run.set_defaults(func=run_command)

    p_an = sub.add_parser("analyze", help="summarize metric rows from trace files")
    p_an.add_argument("trace", nargs="+")
    p_an.add_argument("--csv", default=None, help="also write a machine-readable CSV")
    p_an.set_defaults(func=analyze_command)

    p_st = sub.add_parser("selftest", help="run the fast invariant suite")
    p_st.add_argument("--inject-chat-sign-error", action="store_true",
                      help=argparse.SUPPRESS)    # fault-injection hook for testing
    p_st.set_defaults(func=selftest_command)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RingmdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:          # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
