"""Find the actuator disturbance std that splits a sine run's error 71.3 : 28.7.

Usage: python3 scripts/calibrate_noise.py [--target 0.287] [--delay-steps 4]
"""

import argparse

from steercomp.plant import DEFAULT_NOISE_STD, calibrate_noise_std, calibration_ratio


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--target", type=float, default=0.287, help="best-shift / zero-shift RMSE")
    p.add_argument("--delay-steps", type=int, default=4)
    p.add_argument("--sample-period", type=float, default=0.05)
    args = p.parse_args()
    std = calibrate_noise_std(args.target, args.delay_steps, args.sample_period)
    print(f"noise_std={std:.4f}")
    print(f"ratio at noise_std={std:.4f}: {calibration_ratio(std, args.delay_steps, args.sample_period):.4f}")
    print(f"ratio at shipped default {DEFAULT_NOISE_STD}: "
          f"{calibration_ratio(DEFAULT_NOISE_STD, args.delay_steps, args.sample_period):.4f}")


if __name__ == "__main__":
    main()
