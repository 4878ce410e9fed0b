"""Wall time of ODkAnon and OIGH on one large synthetic dataset."""

import argparse
import time

from odkanon.bench import SynthConfig, gen_synthetic
from odkanon.pipeline import run_algorithm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-trips", type=int, default=100_000)
    ap.add_argument("--resolution", type=int, default=6)
    ap.add_argument("--k", type=float, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = gen_synthetic(SynthConfig(seed=args.seed, n_trips=args.n_trips, target_resolution=args.resolution))
    leaves = len({r.origin for r in ds.records} | {r.destination for r in ds.records})
    print(f"{len(ds)} trips, {leaves} distinct leaf cells")
    for alg in ("odkanon", "oigh"):
        t0 = time.perf_counter()
        out = run_algorithm(ds, alg, args.k, "participant")
        wall = time.perf_counter() - t0
        parts = ", ".join(f"{k} {v:.2f}" for k, v in out.timings.items())
        print(f"{alg:8s} {wall:6.1f} s  ({parts})  {out.result.terminated}")


if __name__ == "__main__":
    main()
