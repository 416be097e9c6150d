"""Detection rate of the Bob/Zach collusion as a function of pre-check size m.

Each pre-check photon matches with probability 1/2 under the attack, so the
expected detection rate is 1 - 2**-m.

    python scripts/detection_vs_m.py --trials 500 --ms 1 2 4 8
"""

import argparse
import csv
import sys

from bellqss.cli import parse_args, run_batch


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ms", type=int, nargs="+", default=[1, 2, 3, 4, 6, 8])
    ap.add_argument("--k", type=int, default=64)
    ap.add_argument("--k1", type=int, default=8)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--zach-returns-genuine", action="store_true")
    args = ap.parse_args(argv)

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["m", "trials", "detection_rate", "expected", "precheck_match_rate"])
    for m in args.ms:
        cli = ["--scenario", "collusion-improved", "--k", str(args.k), "--k1", str(args.k1), "--m", str(m)]
        cli += ["--trials", str(args.trials), "--seed", str(args.seed)]
        if args.zach_returns_genuine:
            cli.append("--zach-returns-genuine")
        spec, _ = parse_args(cli)
        report = run_batch(spec)
        writer.writerow(
            [m, args.trials, f"{report.detection_rate:.4f}", f"{1 - 2.0**-m:.4f}", f"{report.precheck_match_rate:.4f}"]
        )


if __name__ == "__main__":
    main()
