import sys
import numpy as np
import ringmd as rm
from ringmd.integrators import SchemeConfig, run, make_stepper
from ringmd.forcefield import ForceFieldSpec
from ringmd.diagnostics import compute_metrics

units = rm.ReducedUnits()
T = float(sys.argv[1])
n_burn = int(sys.argv[2])
seeds = [int(s) for s in sys.argv[3:]] or [1234]

topo = rm.build_water_topology(8, 6.2)
spec = ForceFieldSpec.from_topology(topo, split_enabled=False)

for seed in seeds:
    vals = {}
    fail = False
    for scheme in ('impulse_r', 'molly_r'):
        for h in (0.02, 0.05, 0.075):
            state = rm.initialize_state(topo, 16, units, temperature=T, seed=seed)
            stepper = make_stepper(SchemeConfig(scheme, h), topo, units, spec, 16)
            s = state
            for i in range(n_burn):
                out = stepper(s)
                if out.failed:
                    print(f'seed={seed} {scheme} h={h}: burn FAIL @{i}', flush=True)
                    fail = True
                    break
                s = out.state
            if fail:
                break
            tr = run(s, SchemeConfig(scheme, h), topo, units, spec, 10000,
                     record_every=10)
            if tr.metadata['failed']:
                print(f'seed={seed} {scheme} h={h}: FAIL @{tr.metadata["failed_step"]}',
                      flush=True)
                fail = True
                break
            vals[(scheme, h)] = compute_metrics(tr)
        if fail:
            break
    if fail:
        continue
    for scheme in ('impulse_r', 'molly_r'):
        der = [vals[(scheme, h)].delta_e_r for h in (0.02, 0.05, 0.075)]
        dmax = max(abs(vals[(scheme, h)].drift) for h in (0.02, 0.05, 0.075))
        ok = max(der) <= 1e-4 and dmax <= 1e-4 and max(der) / min(der) <= 10
        print(f'seed={seed} {scheme}: dE_r={der[0]:.2e}/{der[1]:.2e}/{der[2]:.2e} '
              f'flat={max(der)/min(der):5.2f} maxD={dmax:.2e} pass={ok}', flush=True)
