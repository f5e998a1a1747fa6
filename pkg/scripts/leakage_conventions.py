"""Final bar-state leakage under both frequency conventions."""
import argparse

from sechgate.experiments import LeakageConfig, leakage_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta-hf", type=float, default=0.03)
    ap.add_argument("--delta-opt", type=float, default=0.1)
    args = ap.parse_args()
    print("convention  numeric     perturbative  naive bound")
    for flag in (False, True):
        scan = leakage_scan(LeakageConfig(delta_opt=args.delta_opt, delta_hf=args.delta_hf, apply_2pi=flag))
        name = "2pi" if flag else "bare"
        print(f"{name:10s}  {scan.final_numeric:.4e}  {scan.final_perturbative:.4e}    {scan.naive_bound:.4g}")


if __name__ == "__main__":
    main()
