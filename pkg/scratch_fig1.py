import sys
import numpy as np
import ringmd as rm
from ringmd.integrators import SchemeConfig, run
from ringmd.forcefield import ForceFieldSpec

units = rm.ReducedUnits()
topo = rm.build_water_topology(8, 6.2)
spec = ForceFieldSpec.from_topology(topo, split_enabled=False)

T = float(sys.argv[1])
for seed in [int(s) for s in sys.argv[2:]]:
    rows = {}
    for scheme in ('impulse_r', 'molly_r'):
        for h in (0.075, 0.125):
            state = rm.initialize_state(topo, 16, units, temperature=T, seed=seed)
            tr = run(state, SchemeConfig(scheme, h), topo, units, spec, 2000,
                     record_every=5)
            if tr.metadata['failed']:
                rows[(scheme, h)] = None
            else:
                rows[(scheme, h)] = np.abs(tr.total - tr.total[0]).max()
    def fmt(v):
        return 'FAIL' if v is None else f'{v:.3e}'
    ir = rows[('impulse_r', 0.125)] and rows[('impulse_r', 0.075)] and \
        rows[('impulse_r', 0.125)] / rows[('impulse_r', 0.075)]
    mr = rows[('molly_r', 0.125)] and rows[('molly_r', 0.075)] and \
        rows[('molly_r', 0.125)] / rows[('molly_r', 0.075)]
    ok_i = rows[('impulse_r', 0.125)] is None or (ir is not None and ir > 10)
    ok_m = mr is not None and mr <= 3
    print(f'seed={seed}: imp75={fmt(rows[("impulse_r",0.075)])} '
          f'imp125={fmt(rows[("impulse_r",0.125)])} ratio={ir if ir else "-":.1f} | '
          f'mol75={fmt(rows[("molly_r",0.075)])} mol125={fmt(rows[("molly_r",0.125)])} '
          f'ratio={mr if mr else "-":.1f} | PASS={ok_i and ok_m}', flush=True)
