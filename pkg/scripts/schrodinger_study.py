"""Global-error study for the Schrodinger problem (family F).

Prints the error table, fitted orders, the tau ranking at the smallest h and
the five/three-stage per-step cost ratio, then writes CSV and SVG.
"""
import argparse
import logging

import numpy as np

from splitkit.harness import emit_outputs, load_config, run_convergence_study

p = argparse.ArgumentParser()
p.add_argument("--config", default="configs/schrodinger.cfg")
p.add_argument("--out")
p.add_argument("-v", "--verbose", action="store_true")
args = p.parse_args()
logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

cfg = load_config(args.config, {"out": args.out})
table = run_convergence_study(cfg)

print(f"{'tau':>7} " + " ".join(f"h=1/{round(1 / h):<6d}" for h in cfg.h) + "   order")
for tau in cfg.tau:
    errs = " ".join(f"{table.error(tau, h):10.3e}" for h in cfg.h)
    print(f"{tau:7.3f} {errs}   {table.orders[(cfg.problem, cfg.family, tau)]:.3f}")

h = cfg.h[-1]
ranking = sorted(cfg.tau, key=lambda t: table.error(t, h))
print(f"ranking at h={h:g}: " + " < ".join(f"{t:g}" for t in ranking))
print(f"max norm drift: {max(r.norm_drift for r in table.rows):.1e}")
five = np.mean([r.per_step_ms for r in table.rows if 0 < r.tau < 0.5])
three = np.mean([r.per_step_ms for r in table.rows if r.tau in (0.0, 0.5)])
print(f"per-step cost: five-stage {five * 1e3:.1f}us, three-stage {three * 1e3:.1f}us, ratio {five / three:.2f}")
for path in emit_outputs(table, cfg):
    print("wrote", path)
