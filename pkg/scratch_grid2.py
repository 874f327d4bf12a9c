"""Stage-1 molly-only sweep (unrelaxed protocol), then joint verification."""
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

import ringmd as rm
from ringmd.cli import ScenarioConfig, PRESETS, prepare_state
from ringmd.diagnostics import compute_metrics
from ringmd.integrators import SchemeConfig, run, make_stepper

UNITS = rm.ReducedUnits()


def one_cell(args):
    T, equil, seed, scheme, h = args
    cfg = dict(PRESETS['table2'])
    cfg.update(preset='table2', temperature=T, relax_steps=0, equil_steps=equil,
               seed=seed, scheme=scheme, h=h)
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
    stage = sys.argv[1]
    with ProcessPoolExecutor(max_workers=2) as pool:
        if stage == "molly75":
            seeds = [1234, 7, 42, 99, 2718, 31415]
            equils = [4000, 10000]
            cells = [(1e-3, e, s, 'molly_r', 0.075) for e in equils for s in seeds]
            for args, val in pool.map(one_cell, cells):
                T, e, s, scheme, h = args
                txt = f'{val[0]:.3e} D={val[1]:+.1e}' if val else 'FAIL'
                print(f'equil={e} seed={s}: {txt}', flush=True)
        else:
            # joint verification: args = equil seed [equil seed ...]
            pairs = [(int(sys.argv[i]), int(sys.argv[i + 1]))
                     for i in range(2, len(sys.argv), 2)]
            cells = [(1e-3, e, s, scheme, h) for (e, s) in pairs
                     for scheme in ('impulse_r', 'molly_r')
                     for h in (0.02, 0.05, 0.075)]
            results = {}
            for args, val in pool.map(one_cell, cells):
                results[args] = val
                T, e, s, scheme, h = args
                txt = f'{val[0]:.3e}' if val else 'FAIL'
                print(f'equil={e} seed={s} {scheme} h={h}: {txt}', flush=True)
            for (e, s) in pairs:
                ok = True
                detail = []
                for scheme in ('impulse_r', 'molly_r'):
                    vals = [results.get((1e-3, e, s, scheme, h))
                            for h in (0.02, 0.05, 0.075)]
                    if not all(vals):
                        ok = False
                        detail.append(f'{scheme}: FAIL')
                        continue
                    der = [v[0] for v in vals]
                    dmax = max(abs(v[1]) for v in vals)
                    flat = max(der) / min(der)
                    cell_ok = max(der) <= 1e-4 and dmax <= 1e-4 and flat <= 10
                    ok = ok and cell_ok
                    detail.append(f'{scheme}: flat={flat:.1f} max={max(der):.2e} ok={cell_ok}')
                print(f'JOINT equil={e} seed={s}: {" | ".join(detail)} PASS={ok}',
                      flush=True)


if __name__ == '__main__':
    main()
