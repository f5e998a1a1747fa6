"""Fidelity along delta_t for several excited-state lifetimes."""
import argparse

import numpy as np

from sechgate.experiments import SweepConfig, lifetime_baseline, reference_unitary, sweep_lifetime


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=7)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfg = SweepConfig(dt_count=args.count, jobs=args.jobs)
    ref = reference_unitary(cfg)
    curves = sweep_lifetime(cfg, ref)
    base = lifetime_baseline(cfg, ref)
    np.set_printoptions(precision=5, suppress=True)
    print("delta_t  ", cfg.dt_grid())
    for te, row in zip(cfg.te_list, curves.values):
        print(f"{te:9g}", row)
    print("no decay ", base)


if __name__ == "__main__":
    main()
