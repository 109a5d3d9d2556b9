"""Rate ratio versus K for Zipf(100, 1) popularities and M = 1, 2, 3."""

import argparse
import sys
from pathlib import Path

from papir.pmf import Zipf
from papir.simulation import DEFAULT_SWEEP, ExperimentConfig, emit_csv, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("sweep_side_info.csv"))
    ap.add_argument("--profiles", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    cfg = ExperimentConfig(
        Zipf(100, 1.0), (), tuple(DEFAULT_SWEEP), args.profiles, args.seed, K_by_M=tuple(DEFAULT_SWEEP.items())
    )
    rows = run_experiment(
        cfg,
        lambda r: print(f"M={r.M} K={r.K:<3d} rcs {r.mean_rcs_ratio:.4f} mds {r.mds_ratio:.4f}", file=sys.stderr),
    )
    emit_csv(rows, args.out)
    print(args.out)


if __name__ == "__main__":
    main()
