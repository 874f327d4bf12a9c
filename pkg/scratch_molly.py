import sys
import numpy as np
import ringmd as rm
from ringmd.integrators import SchemeConfig, run, make_stepper
from ringmd.forcefield import ForceFieldSpec
from ringmd.diagnostics import compute_metrics

units = rm.ReducedUnits()
topo = rm.build_water_topology(8, 6.2)
spec = ForceFieldSpec.from_topology(topo, split_enabled=False)

for T in (0.001, 0.0003):
    for seed in (1234, 7):
        for n_burn in (4000, 10000):
            state = rm.initialize_state(topo, 16, units, temperature=T, seed=seed)
            stepper = make_stepper(SchemeConfig('molly_r', 0.075), topo, units, spec, 16)
            s = state
            bad = False
            for i in range(n_burn):
                out = stepper(s)
                if out.failed:
                    print(f'T={T} seed={seed} burn={n_burn}: FAIL @{i}', flush=True)
                    bad = True
                    break
                s = out.state
            if bad:
                continue
            tr = run(s, SchemeConfig('molly_r', 0.075), topo, units, spec, 10000,
                     record_every=10)
            if tr.metadata['failed']:
                print(f'T={T} seed={seed} burn={n_burn}: run FAIL', flush=True)
                continue
            m = compute_metrics(tr)
            print(f'T={T} seed={seed} burn={n_burn}: dE_r={m.delta_e_r:.3e} '
                  f'D={m.drift:+.2e} K={tr.kinetic.mean():.1f}', flush=True)
