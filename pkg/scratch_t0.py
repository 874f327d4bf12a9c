import sys
import numpy as np
import ringmd as rm
from ringmd.integrators import SchemeConfig, run, make_stepper
from ringmd.forcefield import ForceFieldSpec
from ringmd.diagnostics import compute_metrics

units = rm.ReducedUnits()
T = float(sys.argv[1])
cell = float(sys.argv[2]) if len(sys.argv) > 2 else 6.2
seeds = [int(s) for s in sys.argv[3:]] or [1234]

topo = rm.build_water_topology(8, cell)
spec = ForceFieldSpec.from_topology(topo, split_enabled=False)

for seed in seeds:
    vals = {}
    ok = True
    for scheme in ('impulse_r', 'molly_r'):
        for h in (0.02, 0.05, 0.075):
            state = rm.initialize_state(topo, 16, units, temperature=T, seed=seed)
            stepper = make_stepper(SchemeConfig(scheme, h), topo, units, spec, 16)
            s = state
            fail = False
            for i in range(500):
                out = stepper(s)
                if out.failed:
                    fail = True
                    break
                s = out.state
            if fail:
                print(f'seed={seed} {scheme} h={h}: burn FAIL'); ok = False
                continue
            tr = run(s, SchemeConfig(scheme, h), topo, units, spec, 10000, record_every=10)
            if tr.metadata['failed']:
                print(f'seed={seed} {scheme} h={h}: run FAIL @{tr.metadata["failed_step"]}')
                ok = False
                continue
            m = compute_metrics(tr)
            vals[(scheme, h)] = m
    if not ok:
        continue
    for scheme in ('impulse_r', 'molly_r'):
        der = [vals[(scheme, h)].delta_e_r for h in (0.02, 0.05, 0.075)]
        dmax = max(abs(vals[(scheme, h)].drift) for h in (0.02, 0.05, 0.075))
        print(f'seed={seed} {scheme}: dE_r={der[0]:.2e}/{der[1]:.2e}/{der[2]:.2e} '
              f'flat={max(der)/min(der):5.2f} maxD={dmax:.2e} '
              f'pass={max(der) <= 1e-4 and dmax <= 1e-4 and max(der)/min(der) <= 10}',
              flush=True)
