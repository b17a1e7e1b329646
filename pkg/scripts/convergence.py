"""Variance of the rescaled fluctuations along a (lambda_N, n) ladder against the oscillator."""
import argparse
import json

from dcp.rescaled import convergence_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=float, default=5.0)
    ap.add_argument("--rho", type=float, default=0.7)
    ap.add_argument("--T", type=float, default=3.0)
    ap.add_argument("--replicas", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ladder", default="25:10000,30:100000,35:1000000",
                    help="comma separated lambda_N:n pairs")
    a = ap.parse_args()
    ladder = [(float(x.split(":")[0]), int(x.split(":")[1])) for x in a.ladder.split(",")]
    rep = convergence_study(a.r, a.rho, ladder, a.T, a.replicas, a.seed)
    print(json.dumps(rep.to_dict(), indent=2))


if __name__ == "__main__":
    main()
