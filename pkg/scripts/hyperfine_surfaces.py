"""Controlled-phase fidelity over the hyperfine grid, with and without refocusing."""
import argparse
import time

from sechgate.experiments import SweepConfig, reference_unitary, sweep_hyperfine


def summary(name, surface):
    v = surface.values
    print(f"{name:12s} min {v.min():.5f}  max {v.max():.5f}  "
          f"spread along delta_c {surface.variation(0):.2e}  along delta_t {surface.variation(1):.2e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=21)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--decay", action="store_true", help="also run the T_e = 100 us master-equation surface")
    ap.add_argument("--no-apply-2pi", dest="apply_2pi", action="store_false")
    args = ap.parse_args()
    cfg = SweepConfig(dc_count=args.count, dt_count=args.count, jobs=args.jobs, apply_2pi=args.apply_2pi)
    start = time.time()
    ref = reference_unitary(cfg)
    print(f"reference checksum {ref.checksum}")
    refocused = sweep_hyperfine(cfg, ref, decay=False)
    summary("refocused", refocused)
    summary("unrefocused", sweep_hyperfine(cfg, decay=False, refocus=False))
    if args.decay:
        decayed = sweep_hyperfine(cfg, ref, decay=True)
        summary("T_e=100us", decayed)
        print(f"largest change from decay {(decayed.minus(refocused)).max():.2e}")
    print(f"{time.time() - start:.1f} s")


if __name__ == "__main__":
    main()
