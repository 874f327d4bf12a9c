"""Joint table2 check with fixed-h equilibration (equil_h = 0.075)."""
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

import ringmd as rm
from ringmd.cli import ScenarioConfig, PRESETS, prepare_state
from ringmd.diagnostics import compute_metrics
from ringmd.integrators import SchemeConfig, run

UNITS = rm.ReducedUnits()


def one_cell(args):
    seed, equil, scheme, h = args
    cfg = dict(PRESETS['table2'])
    cfg.update(preset='table2', temperature=1e-3, relax_steps=0, equil_steps=equil,
               equil_h=0.075, seed=seed, scheme=scheme, h=h)
    config = ScenarioConfig(**cfg)
    topo = config.build_topology()
    spec = config.build_ff_spec(topo)
    try:
        state = prepare_state(config, topo, spec, UNITS)
        tr = run(state, SchemeConfig(scheme, h), topo, UNITS, spec, 10000,
                 record_every=10)
        if tr.metadata['failed']:
            return args, None
        m = compute_metrics(tr)
        return args, (m.delta_e_r, m.drift)
    except Exception:
        return args, None


def main():
    pairs = [(int(sys.argv[i]), int(sys.argv[i + 1]))
             for i in range(1, len(sys.argv), 2)]
    cells = [(seed, equil, scheme, h) for (seed, equil) in pairs
             for scheme in ('impulse_r', 'molly_r') for h in (0.02, 0.05, 0.075)]
    results = {}
    with ProcessPoolExecutor(max_workers=2) as pool:
        for args, val in pool.map(one_cell, cells):
            results[args] = val
            seed, equil, scheme, h = args
            txt = f'{val[0]:.3e}' if val else 'FAIL'
            print(f'seed={seed} equil={equil} {scheme} h={h}: {txt}', flush=True)
    for (seed, equil) in pairs:
        ok = True
        detail = []
        for scheme in ('impulse_r', 'molly_r'):
            vals = [results.get((seed, equil, scheme, h)) for h in (0.02, 0.05, 0.075)]
            if not all(vals):
                ok = False
                detail.append(f'{scheme}: FAIL')
                continue
            der = [v[0] for v in vals]
            dmax = max(abs(v[1]) for v in vals)
            flat = max(der) / min(der)
            cok = max(der) <= 1e-4 and dmax <= 1e-4 and flat <= 10
            ok = ok and cok
            detail.append(f'{scheme}: flat={flat:.1f} max={max(der):.2e} ok={cok}')
        print(f'JOINT seed={seed} equil={equil}: {" | ".join(detail)} PASS={ok}',
              flush=True)


if __name__ == '__main__':
    main()
