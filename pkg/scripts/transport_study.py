"""Global-error study for the transport problem (family D, exact reference)."""
import argparse
import logging

from splitkit.harness import emit_outputs, load_config, run_convergence_study

p = argparse.ArgumentParser()
p.add_argument("--config", default="configs/transport.cfg")
p.add_argument("--out")
p.add_argument("--dx", type=float, help="grid spacing, e.g. 0.002 for the finer grid")
p.add_argument("-v", "--verbose", action="store_true")
args = p.parse_args()
logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

cfg = load_config(args.config, {"out": args.out, "dx": args.dx})
table = run_convergence_study(cfg)

print(f"{'tau':>5} " + " ".join(f"h=1/{round(1 / h):<6d}" for h in cfg.h) + "   order")
for tau in cfg.tau:
    errs = " ".join(f"{table.error(tau, h):10.3e}" for h in cfg.h)
    print(f"{tau:5.2f} {errs}   {table.orders[(cfg.problem, cfg.family, tau)]:.3f}")
for h in cfg.h:
    best = min(cfg.tau, key=lambda t: table.error(t, h))
    pairs = [(t, 1 - t) for t in cfg.tau if t < 0.5 and (1 - t) in cfg.tau]
    sym = ", ".join(f"e({a:g})/e({b:g})={table.error(a, h) / table.error(b, h):.4f}" for a, b in pairs)
    print(f"h={h:<9g} best tau={best:g}  {sym}")
for path in emit_outputs(table, cfg):
    print("wrote", path)
