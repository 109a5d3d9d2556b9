"""Rates, capacity bounds and exact privacy auditing.

Download is counted in coded vectors; one vector carries n*log2(q) bits,
the same as one message, so rates are plain ratios of vector counts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterator, Union

from .errors import EnumerationLimitError
from .pmf import DEFAULT_ENUMERATION_LIMIT, PopularityProfile, ProblemParams, demand_model
from .schemes import MdsQuery, PartitionQuery, RcsPolicy, leftover_arrangements, mds_build_query, rcs_gamma_base


class Policy(enum.Enum):
    MDS = "mds"
    PC = "pc"
    RCS = "rcs"


@dataclass(frozen=True)
class RateReport:
    r_ub: Fraction
    r_lb: Fraction
    r_mds: Fraction
    expected_download_units: Fraction

    def __post_init__(self):
        if not self.r_mds <= self.r_lb <= self.r_ub:
            raise AssertionError(f"rate ordering violated: {self.r_mds} <= {self.r_lb} <= {self.r_ub}")


def rate_upper_bound(params: ProblemParams) -> Fraction:
    return Fraction(params.M + 1, params.K)


def rate_mds(params: ProblemParams) -> Fraction:
    return Fraction(1, params.K - params.M)


def rate_lower_bound(
    profile: PopularityProfile, params: ProblemParams, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> Fraction:
    """Closed-form rate of the randomized code selection scheme."""
    params.require_rcs()
    K, M = params.K, params.M
    base = rcs_gamma_base(profile, params, limit)
    ratio = demand_model(profile, M, limit).joint_over_marginal(1, range(2, M + 2))
    gap = K - M - Fraction(K, M + 1)
    return 1 / (K - M - gap * base * ratio * math.comb(K - 1, M))


def all_demands(K: int, M: int) -> Iterator[tuple[int, frozenset[int]]]:
    for W in range(1, K + 1):
        others = [i for i in range(1, K + 1) if i != W]
        for S in combinations(others, M):
            yield W, frozenset(S)


def expected_download(
    profile: PopularityProfile, params: ProblemParams, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> Fraction:
    """Average number of downloaded vectors, summed term by term over every (W, S)."""
    params.require_rcs()
    K, M = params.K, params.M
    if K * math.comb(K - 1, M) > limit:
        raise EnumerationLimitError(f"{K * math.comb(K - 1, M)} demand pairs exceed limit {limit}")
    policy = RcsPolicy.build(profile, params, limit)
    dm = demand_model(profile, M, limit)
    N = Fraction(K, M + 1)
    total = Fraction(0)
    for W, S in all_demands(K, M):
        g = policy.gamma(W, S)
        total += dm.joint(W, S) * (g * N + (1 - g) * (K - M))
    return total


def rate_report(
    profile: PopularityProfile, params: ProblemParams, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> RateReport:
    r_lb = rate_lower_bound(profile, params, limit)
    return RateReport(rate_upper_bound(params), r_lb, rate_mds(params), 1 / r_lb)


# --------------------------------------------------------------------------
# Privacy oracle


def count_partitions(K: int, M: int) -> int:
    """Set partitions of [K] into blocks of size M+1."""
    size = M + 1
    N = K // size
    return math.factorial(K) // (math.factorial(size) ** N * math.factorial(N))


def enumerate_partitions(K: int, M: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All canonical partitions of [K] into blocks of size M+1.

    Each block is ascending and blocks are ordered by their smallest element.
    """
    size = M + 1
    if K % size:
        raise ValueError(f"{size} does not divide {K}")

    def rec(remaining: tuple[int, ...]):
        if not remaining:
            yield ()
            return
        head, rest = remaining[0], remaining[1:]
        for mates in combinations(rest, size - 1):
            block = (head,) + mates
            left = tuple(i for i in rest if i not in mates)
            for tail in rec(left):
                yield (block,) + tail

    yield from rec(tuple(range(1, K + 1)))


@dataclass(frozen=True)
class Violation:
    query: Union[PartitionQuery, MdsQuery]
    W: int
    posterior: Fraction
    prior: Fraction


@dataclass
class PrivacyVerdict:
    passed: bool
    violations: list[Violation]
    query_probability: dict = field(default_factory=dict, repr=False)
    posteriors: dict = field(default_factory=dict, repr=False)

    def probability_of(self, query) -> Fraction:
        return self.query_probability.get(query, Fraction(0))

    def posterior(self, query, W: int) -> Fraction:
        return self.posteriors[query][W]


def privacy_oracle(
    profile: PopularityProfile,
    params: ProblemParams,
    policy: Policy | str,
    limit: int = DEFAULT_ENUMERATION_LIMIT,
    keep_distribution: bool = True,
) -> PrivacyVerdict:
    """Exact posterior of the demand index for every possible query value.

    Query values are canonical partitions (Partition-and-Code) and the single
    Vandermonde query (MDS).  Given (W, S), a particular partition containing
    the block W u S is produced with probability Gamma_{W,S} / L, where L
    counts the arrangements of the remaining indices; the MDS query is
    produced with probability 1 - Gamma_{W,S}.  The verdict passes iff every
    posterior equals the prior p_W exactly.
    """
    policy = Policy(policy)
    params.require_rcs()
    K, M = params.K, params.M
    n_parts = count_partitions(K, M)
    n_pairs = K * math.comb(K - 1, M)
    terms = n_parts * K + n_pairs
    if terms > limit:
        raise EnumerationLimitError(f"{terms} terms exceed enumeration limit {limit}")

    dm = demand_model(profile, M, limit)
    prior = {w: dm.pmf_W(w) for w in range(1, K + 1)}
    if policy is Policy.RCS:
        rcs = RcsPolicy.build(profile, params, limit)
        gamma = rcs.gamma
    else:
        const = Fraction(1) if policy is Policy.PC else Fraction(0)

        def gamma(W, S):
            return const

    # Mass of (W, S) that ends up on a partition query, before the 1/L factor.
    pc_mass: dict[tuple[int, frozenset[int]], Fraction] = {}
    mds_mass = {w: Fraction(0) for w in range(1, K + 1)}
    for W, S in all_demands(K, M):
        g = gamma(W, S)
        joint = dm.joint(W, S)
        pc_mass[(W, S)] = g * joint
        mds_mass[W] += (1 - g) * joint

    L = leftover_arrangements(K, M)
    violations: list[Violation] = []
    q_prob: dict = {}
    posteriors: dict = {}

    if any(pc_mass.values()):
        for parts in enumerate_partitions(K, M):
            masses = {}
            for block in parts:
                members = frozenset(block)
                for w in block:
                    masses[w] = pc_mass[(w, members - {w})]
            total = sum(masses.values())
            if not total:
                continue
            query = PartitionQuery(parts)
            post = {w: m / total for w, m in masses.items()}
            if keep_distribution:
                q_prob[query] = total / L
                posteriors[query] = post
            for w, p in post.items():
                if p != prior[w]:
                    violations.append(Violation(query, w, p, prior[w]))

    mds_total = sum(mds_mass.values())
    if mds_total:
        query = mds_build_query(params)
        post = {w: m / mds_total for w, m in mds_mass.items()}
        q_prob[query] = mds_total
        posteriors[query] = post
        for w, p in post.items():
            if p != prior[w]:
                violations.append(Violation(query, w, p, prior[w]))

    return PrivacyVerdict(not violations, violations, q_prob, posteriors)


# --------------------------------------------------------------------------
# Brute-force checks of the selection-probability reduction


def brute_pmf_W(profile: PopularityProfile, W: int, M: int) -> Fraction:
    """Marginal of W by direct enumeration of every side-information set."""
    K = profile.K
    total = sum(profile.lambdas)
    others = [i for i in range(1, K + 1) if i != W]
    acc = Fraction(0)
    for S in combinations(others, M):
        acc += profile[W] / (total - sum(profile[i] for i in S))
    return acc / math.comb(K, M)


def brute_joint(profile: PopularityProfile, W: int, S) -> Fraction:
    total = sum(profile.lambdas)
    return profile[W] / (total - sum(profile[i] for i in S)) / math.comb(profile.K, len(S))


def lemma4_minimizer(profile: PopularityProfile, params: ProblemParams) -> int:
    """argmin over i in [1, K-M] of p(W=i, S=[K-M+1:K]) / p(W=i); ties go to the larger i."""
    K, M = params.K, params.M
    tail = tuple(range(K - M + 1, K + 1))
    best_i, best = None, None
    for i in range(1, K - M + 1):
        val = brute_joint(profile, i, tail) / brute_pmf_W(profile, i, M)
        if best is None or val <= best:
            best_i, best = i, val
    return best_i


def full_gamma_search(profile: PopularityProfile, params: ProblemParams) -> Fraction:
    """Largest admissible base selection probability, searched over every (W, S)."""
    K, M = params.K, params.M
    marg = {w: brute_pmf_W(profile, w, M) for w in range(1, K + 1)}
    ref = brute_joint(profile, 1, range(2, M + 2)) / marg[1]
    best = Fraction(1)
    for W, S in all_demands(K, M):
        best = min(best, brute_joint(profile, W, S) / marg[W] / ref)
    return best


def gamma_search_equivalence(profile: PopularityProfile, params: ProblemParams) -> bool:
    return full_gamma_search(profile, params) == rcs_gamma_base(profile, params)


def witness_side_information(query, W: int) -> frozenset[int]:
    """Some side-information set under which W is decodable from ``query``."""
    if isinstance(query, PartitionQuery):
        return frozenset(query.parts[query.part_index(W)]) - {W}
    others = [i for i in range(1, query.K + 1) if i != W]
    return frozenset(others[: query.M])
