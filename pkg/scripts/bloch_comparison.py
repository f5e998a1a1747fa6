"""Distances of the zeroth- and first-order trajectories from the exact one."""
import argparse

import numpy as np

from sechgate.adiabatic import compare_trajectories, stark_crossings
from sechgate.pulse_engine import angular, reference_pulse


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--detuning", type=float, default=0.1, help="optical detuning, MHz")
    ap.add_argument("--points", type=int, default=2001)
    args = ap.parse_args()
    pulse = reference_pulse()
    cmp_ = compare_trajectories(pulse, angular(args.detuning), n_points=args.points)
    zeroth, first = cmp_.distances()
    print(f"max distance  zeroth {zeroth.max():.4f}  first {first.max():.4f}")
    print(f"first order closer on {np.mean(first < zeroth):.1%} of {args.points} points")
    for ratio, t in stark_crossings(pulse, angular(args.detuning), angular(0.03)).items():
        print(f"E+ reaches {ratio:g} x delta at {t:.4f} us after pulse start")


if __name__ == "__main__":
    main()
