import sys
import numpy as np
import ringmd as rm
from ringmd.integrators import SchemeConfig, run, make_stepper
from ringmd.forcefield import ForceFieldSpec
from ringmd.diagnostics import compute_metrics

units = rm.ReducedUnits()
mode = sys.argv[1]


def system(cell):
    topo = rm.build_water_topology(8, cell)
    spec = ForceFieldSpec.from_topology(topo, split_enabled=False)
    return topo, spec


def burn_then_run(topo, spec, scheme, h, T, n_burn, n_meas, seed=1234):
    state = rm.initialize_state(topo, 16, units, temperature=T, seed=seed)
    stepper = make_stepper(SchemeConfig(scheme, h), topo, units, spec, 16)
    s = state
    for i in range(n_burn):
        out = stepper(s)
        if out.failed:
            return None, f'burn fail @{i}: {out.failure_reason[:55]}'
        s = out.state
    tr = run(s, SchemeConfig(scheme, h), topo, units, spec, n_meas, record_every=10)
    if tr.metadata['failed']:
        return tr, f"run fail @{tr.metadata['failed_step']}: {tr.metadata['failure_reason'][:55]}"
    return tr, None


if mode == "c5":
    cell = float(sys.argv[2])
    T = float(sys.argv[3])
    n_meas = int(sys.argv[4]) if len(sys.argv) > 4 else 10000
    topo, spec = system(cell)
    print(f'=== criterion 5, cell={cell}, T={T}, n={n_meas} ===')
    results = {}
    for scheme in ('impulse_r', 'molly_r'):
        for h in (0.02, 0.05, 0.075):
            tr, err = burn_then_run(topo, spec, scheme, h, T, 500, n_meas)
            if err:
                print(f'{scheme} h={h}: {err}', flush=True)
                continue
            m = compute_metrics(tr)
            results[(scheme, h)] = m
            print(f'{scheme} h={h}: D={m.drift:+.3e} dE={m.delta_e:.3e} '
                  f'dE_r={m.delta_e_r:.3e} K={tr.kinetic.mean():.1f}', flush=True)
    for scheme in ('impulse_r', 'molly_r'):
        ms = [results.get((scheme, h)) for h in (0.02, 0.05, 0.075)]
        if all(ms):
            vals = [m.delta_e_r for m in ms]
            ok = max(vals) <= 1e-4 and abs(max(m.drift for m in ms)) <= 1e-4
            print(f'{scheme}: flatness={max(vals)/min(vals):.2f} '
                  f'maxdEr={max(vals):.2e} pass={ok}')

elif mode == "fig1":
    cell = float(sys.argv[2])
    for T in [float(x) for x in sys.argv[3:]]:
        topo, spec = system(cell)
        print(f'--- fig1, cell={cell}, T={T} ---')
        for scheme in ('impulse_r', 'molly_r'):
            levels = {}
            for h in (0.075, 0.125):
                state = rm.initialize_state(topo, 16, units, temperature=T, seed=1234)
                tr = run(state, SchemeConfig(scheme, h), topo, units, spec, 2000,
                         record_every=5)
                if tr.metadata['failed']:
                    print(f'{scheme} h={h}: FAILED @{tr.metadata["failed_step"]}',
                          flush=True)
                    levels[h] = None
                else:
                    levels[h] = np.abs(tr.total - tr.total[0]).max()
                    print(f'{scheme} h={h}: max|E-E0| = {levels[h]:.4e}', flush=True)
            if levels.get(0.075) and levels.get(0.125):
                print(f'{scheme}: ratio = {levels[0.125]/levels[0.075]:.2f}')
