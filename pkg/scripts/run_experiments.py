"""Drive the full desk-scale experiment set through the CLI.

Writes every figure-style CSV (landscape, entropy, shot noise,
concentration/transfer, baseline, compile check) into one output directory
with fixed seeds, so the whole set is reproducible byte-for-byte.
"""

from __future__ import annotations

import argparse
import subprocess
import sys
from pathlib import Path


def run(args: list[str]) -> None:
    print("+", " ".join(args), flush=True)
    subprocess.run(args, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--quick", action="store_true",
                        help="shrink ensembles for a fast smoke run")
    opts = parser.parse_args()
    out = Path(opts.out)
    insts = out / "instances"
    qeopt = [sys.executable, "-m", "qeopt.cli"]
    n_ensemble = 3 if opts.quick else 10
    samples = 20 if opts.quick else 100

    run(qeopt + ["generate", "--fixture-n4", "--out", str(insts)])
    run(qeopt + ["generate", "--n", "64", "--count", str(n_ensemble),
                 "--seed", str(opts.seed), "--out", str(insts)])

    fixture = insts / "fixture_n4.txt"
    donor = insts / "sk_n64_pm1_000.txt"

    # single-layer landscape of the worked 4-variable instance
    run(qeopt + ["landscape", "--instance", str(fixture), "--d", "2",
                 "--beta-steps", "33", "--gamma-steps", "33",
                 "--out", str(out / "landscape_exact.csv")])
    run(qeopt + ["landscape", "--instance", str(fixture), "--d", "2",
                 "--beta-steps", "17", "--gamma-steps", "17", "--mode", "shots",
                 "--shots", "10000", "--seed", str(opts.seed),
                 "--out", str(out / "landscape_shots.csv")])

    # entanglement of the encoding
    run(qeopt + ["entropy", "--n", "65536", "--d-list", "1,2,4,8,16,32,64,256,1024",
                 "--samples", str(samples), "--seed", str(opts.seed),
                 "--out", str(out / "entropy.csv")])

    # optimize the donor, then reuse its parameters across the ensemble
    run(qeopt + ["solve", "--instance", str(donor), "--d", "4", "--p", "3",
                 "--seed", str(opts.seed), "--out", str(out / "donor_solve.csv")])
    transfer_args = qeopt + ["transfer", "--donor-instance", str(donor), "--d", "4",
                             "--p", "3", "--seed", str(opts.seed),
                             "--out", str(out / "concentration.csv")]
    for k in range(1, n_ensemble):
        transfer_args += ["--target-instance", str(insts / f"sk_n64_pm1_{k:03d}.txt")]
    run(transfer_args)

    # decomposition baseline on the same ensemble
    baseline_args = qeopt + ["baseline", "--d", "4",
                             "--r-star", "1:0.3033,2:0.4075,3:0.4726",
                             "--out", str(out / "baseline.csv")]
    for k in range(n_ensemble):
        baseline_args += ["--instance", str(insts / f"sk_n64_pm1_{k:03d}.txt")]
    run(baseline_args)

    # shot-noise convergence at fixed parameters
    run(qeopt + ["shots", "--instance", str(donor), "--d", "4",
                 "--params", "0.4,0.01,0.3", "--shot-counts", "100,1000,10000,100000",
                 "--replicas", "10" if opts.quick else "20",
                 "--seed", str(opts.seed), "--out", str(out / "shot_noise.csv")])

    # compiled-layer verification report
    run(qeopt + ["compile-check", "--n", "8", "--d", "2", "--seed", str(opts.seed),
                 "--out", str(out / "compiled_layer.txt")])

    print(f"all experiment outputs in {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
