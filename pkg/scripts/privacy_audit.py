"""Exact privacy audit of the three query policies on random rational profiles.

Prints one line per (profile, policy) and exits non-zero if the randomized
code selection policy ever leaks.
"""

import argparse
import random
import sys
from fractions import Fraction

from papir.analysis import Policy, privacy_oracle
from papir.pmf import PopularityProfile, ProblemParams


def random_profile(rng, K):
    return PopularityProfile.from_values(Fraction(rng.randint(1, 30), rng.randint(1, 8)) for _ in range(K))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-K", type=int, default=6)
    ap.add_argument("-M", type=int, default=1)
    ap.add_argument("--profiles", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = random.Random(args.seed)
    params = ProblemParams(args.K, args.M)
    leaks = 0
    for j in range(args.profiles):
        prof = random_profile(rng, args.K)
        for policy in Policy:
            v = privacy_oracle(prof, params, policy, keep_distribution=False)
            print(f"profile {j:3d}  {policy.value:4s}  {'private' if v.passed else 'LEAKS'}  ({len(v.violations)} violations)")
            leaks += policy is Policy.RCS and not v.passed
    return 1 if leaks else 0


if __name__ == "__main__":
    sys.exit(main())
