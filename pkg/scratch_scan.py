import sys
import numpy as np
import ringmd as rm
from ringmd.integrators import SchemeConfig, run, make_stepper
from ringmd.forcefield import ForceFieldSpec
from ringmd.diagnostics import compute_metrics

units = rm.ReducedUnits()
topo = rm.build_water_topology(8, 6.2)
spec = ForceFieldSpec.from_topology(topo, split_enabled=False)

mode = sys.argv[1]


def burn_then_run(scheme, h, T, n_burn, n_meas, seed=1234):
    state = rm.initialize_state(topo, 16, units, temperature=T, seed=seed)
    stepper = make_stepper(SchemeConfig(scheme, h), topo, units, spec, 16)
    s = state
    for i in range(n_burn):
        out = stepper(s)
        if out.failed:
            return None, f'burn fail @{i}: {out.failure_reason[:60]}'
        s = out.state
    tr = run(s, SchemeConfig(scheme, h), topo, units, spec, n_meas, record_every=10)
    if tr.metadata['failed']:
        return tr, f"run fail @{tr.metadata['failed_step']}: {tr.metadata['failure_reason'][:60]}"
    return tr, None


if mode == "c5":
    T = float(sys.argv[2])
    n_meas = int(sys.argv[3]) if len(sys.argv) > 3 else 10000
    print(f'=== criterion 5 matrix, T = {T}, n_meas = {n_meas} ===')
    results = {}
    for scheme in ('impulse_r', 'molly_r'):
        for h in (0.02, 0.05, 0.075):
            tr, err = burn_then_run(scheme, h, T, 500, n_meas)
            if err:
                print(f'{scheme} h={h}: {err}', flush=True)
                continue
            m = compute_metrics(tr)
            emax = np.abs(tr.total - tr.total[0]).max()
            results[(scheme, h)] = m
            print(f'{scheme} h={h}: D={m.drift:+.3e} dE={m.delta_e:.3e} dE_r={m.delta_e_r:.3e} '
                  f'K={tr.kinetic.mean():.0f} maxdev={emax:.3e}', flush=True)
    for scheme in ('impulse_r', 'molly_r'):
        ms = [results.get((scheme, h)) for h in (0.02, 0.05, 0.075)]
        if all(ms):
            vals = [m.delta_e_r for m in ms]
            print(f'{scheme}: dE_r flatness max/min = {max(vals)/min(vals):.2f}')

elif mode == "fig1":
    # 2000-step contrast, no burn-in, several temperatures
    for T in [float(x) for x in sys.argv[2:]]:
        print(f'--- fig1 contrast at T={T} (2000 steps) ---')
        for scheme in ('impulse_r', 'molly_r'):
            levels = {}
            for h in (0.075, 0.125):
                state = rm.initialize_state(topo, 16, units, temperature=T, seed=1234)
                tr = run(state, SchemeConfig(scheme, h), topo, units, spec, 2000,
                         record_every=5)
                if tr.metadata['failed']:
                    print(f'{scheme} h={h}: FAILED @{tr.metadata["failed_step"]}: '
                          f'{tr.metadata["failure_reason"][:45]}')
                    levels[h] = None
                else:
                    levels[h] = np.abs(tr.total - tr.total[0]).max()
                    print(f'{scheme} h={h}: max|E-E0| = {levels[h]:.4e}', flush=True)
            if levels.get(0.075) and levels.get(0.125):
                print(f'{scheme}: ratio(0.125/0.075) = {levels[0.125]/levels[0.075]:.1f}')
