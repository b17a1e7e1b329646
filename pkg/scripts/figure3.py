"""Sample path of the limiting noisy oscillator next to rescaled particle fluctuations.

    python scripts/figure3.py --T 30 --out runs/figure3
"""
import argparse
import json

from dcp.config import ExperimentConfig
from dcp.experiments import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--lambda-n", type=float, default=50.0)
    ap.add_argument("--rho", type=float, default=0.7)
    ap.add_argument("--r", type=float, default=5.0)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--T", type=float, default=30.0)
    ap.add_argument("--h", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=30)
    ap.add_argument("--out", default="runs/figure3")
    a = ap.parse_args()
    cfg = ExperimentConfig(
        kind="figure3", params={"lam": a.lambda_n, "rho": a.rho, "r": a.r}, seed=a.seed,
        output_dir=a.out, n=a.n, T=a.T, h=a.h, replicas=1, sample_dt=0.01,
    )
    res = run_experiment(cfg)
    print(json.dumps(res.meta["summary"], indent=2))
    print(f"tables in {res.output_dir}")


if __name__ == "__main__":
    main()
