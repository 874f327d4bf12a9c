import sys
import numpy as np
import ringmd as rm
from ringmd.integrators import SchemeConfig, run, make_stepper
from ringmd.forcefield import ForceFieldSpec
from ringmd.diagnostics import compute_metrics

units = rm.ReducedUnits()
mode = sys.argv[1]


def burn_then_run(topo, spec, config, T, P, n_burn, n_meas, seed, record_every=10):
    state = rm.initialize_state(topo, P, units, temperature=T, seed=seed)
    stepper = make_stepper(config, topo, units, spec, P)
    s = state
    for i in range(n_burn):
        out = stepper(s)
        if out.failed:
            return None, f'burn fail @{i}: {out.failure_reason[:50]}'
        s = out.state
    tr = run(s, config, topo, units, spec, n_meas, record_every=record_every)
    if tr.metadata['failed']:
        return tr, f'run fail @{tr.metadata["failed_step"]}'
    return tr, None


if mode == "rattle_pair":
    # criterion 6a: table2 scenario, RATTLE h=2e-4 vs 5e-4, fixed time span
    T = float(sys.argv[2])
    t_span = float(sys.argv[3]) if len(sys.argv) > 3 else 8.0
    topo = rm.build_water_topology(8, 6.2)
    spec = ForceFieldSpec.from_topology(topo, split_enabled=False)
    vals = {}
    for h in (2e-4, 5e-4):
        n = int(round(t_span / h))
        tr, err = burn_then_run(topo, spec, SchemeConfig('rattle', h), T, 16,
                                200, n, 1234, record_every=max(1, n // 1000))
        if err:
            print(f'rattle h={h}: {err}', flush=True)
            continue
        m = compute_metrics(tr)
        vals[h] = m.delta_e_r
        print(f'rattle h={h}: D={m.drift:+.2e} dE_r={m.delta_e_r:.3e} '
              f'K={tr.kinetic.mean():.1f} steps={n}', flush=True)
    if len(vals) == 2:
        print(f'ratio = {vals[5e-4] / vals[2e-4]:.2f} (need >= 5)')

elif mode == "table3":
    # criterion 6b: P=8 nearest-image; rattle_i monotone vs impulse flat
    T = float(sys.argv[2])
    t_span = float(sys.argv[3]) if len(sys.argv) > 3 else 100.0
    seed = int(sys.argv[4]) if len(sys.argv) > 4 else 1234
    topo = rm.build_water_topology(8, 6.2, truncation_mode="nearest_image")
    spec = ForceFieldSpec.from_topology(topo, split_enabled=False)
    imp = {}
    rat = {}
    for h in (0.02, 0.04, 0.05):
        n = int(round(t_span / h))
        tr, err = burn_then_run(topo, spec, SchemeConfig('impulse_r', h), T, 8,
                                200, n, seed)
        if err:
            print(f'impulse h={h}: {err}', flush=True)
        else:
            m = compute_metrics(tr)
            imp[h] = m.delta_e_r
            print(f'impulse h={h}: dE_r={m.delta_e_r:.3e} K={tr.kinetic.mean():.0f} '
                  f'steps={n}', flush=True)
        tr, err = burn_then_run(topo, spec, SchemeConfig('rattle_i', h, delta_h=h / 10),
                                T, 8, 200, n, seed)
        if err:
            print(f'rattle_i h={h}: {err}', flush=True)
        else:
            m = compute_metrics(tr)
            rat[h] = m.delta_e_r
            print(f'rattle_i h={h}: dE_r={m.delta_e_r:.3e}', flush=True)
    if len(imp) == 3:
        band = max(imp.values()) / min(imp.values())
        print(f'impulse band = {band:.2f} (need <= 3)')
    if len(rat) == 3:
        mono = rat[0.02] < rat[0.04] < rat[0.05]
        print(f'rattle_i monotone = {mono} ({rat[0.02]:.2e} {rat[0.04]:.2e} {rat[0.05]:.2e})')
